import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sensorplace.geometry import Polygon, regular_polygon
from sensorplace.solver import ResolutionWarning

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_resolution():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        yield


@pytest.fixture(scope="session")
def square():
    return Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.fixture(scope="session")
def disk():
    return regular_polygon(256)


@pytest.fixture(scope="session")
def rhombus():
    return Polygon([(1, 0), (0, 0.5), (-1, 0), (0, -0.5)])


def annulus_mean_distance(r: float, R: float = 1.0, p: float = 1.0) -> float:
    """2 pi int_r^R (s - r)^p s ds for a ball of radius r centered in a disk of radius R."""
    from scipy.integrate import quad
    return quad(lambda s: (s - r) ** p * 2 * math.pi * s, r, R)[0]


def bessel_objective(eps: float, r: float, R: float = 1.0, p: float = 1.0) -> float:
    """Continuum g for w = K0(s/a)/K0(r/a), a = sqrt(eps), integrated over r < s < R."""
    from scipy.integrate import quad
    from scipy.special import k0e
    a = math.sqrt(eps)

    def v(s):
        return -a * (np.log(k0e(s / a)) - s / a - np.log(k0e(r / a)) + r / a)

    return quad(lambda s: v(s) ** p * 2 * math.pi * s, r, R, limit=200)[0]


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        terminalreporter.write_line(report[n])
