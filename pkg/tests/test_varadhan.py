import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sensorplace.geometry import Placement, compute_box
from sensorplace.grid import build_grid, classify_nodes, interpolate
from sensorplace.solver import SolverError, solve_state
from sensorplace.varadhan import (eikonal_residual, exact_distance_field, fit_rate_constant,
                                  log_transform, retained_nodes, sup_error_vs_exact)


def test_log_transform_values():
    assert np.all(log_transform(np.ones((3, 3)), 0.5).v == 0)
    assert log_transform(np.array([[math.exp(-1)]]), 0.04).v[0, 0] == pytest.approx(0.2)
    with pytest.raises(SolverError):
        log_transform(np.array([[0.0]]), 0.01)


@given(st.floats(1e-6, 1.0), st.floats(1e-300, 1.0))
def test_log_transform_inverts(eps, w):
    v = log_transform(np.array([[w]]), eps).v[0, 0]
    assert v >= 0
    assert math.exp(-v / math.sqrt(eps)) == pytest.approx(w, rel=1e-9)


@pytest.fixture(scope="module")
def centered_256(disk):
    g = build_grid(compute_box(disk), 1 / 256)
    pl = Placement([(0.0, 0.0)], 0.25)
    m = classify_nodes(g, disk, pl)
    w, _ = solve_state(g, m, 1e-3)
    return g, m, pl, log_transform(w, 1e-3, g, m)


def test_distance_at_probe_point(centered_256):
    g, m, pl, v = centered_256
    assert interpolate(v.v, g, (0.75, 0.0)) == pytest.approx(0.5, abs=0.06)


def test_sup_error_self_and_bound(centered_256, disk):
    g, m, pl, v = centered_256
    assert sup_error_vs_exact(exact_distance_field(g, pl), pl, disk, m, g) == 0.0
    assert 0 < sup_error_vs_exact(v, pl, disk, m) < 0.05


def test_distance_nonnegative(centered_256):
    g, m, pl, v = centered_256
    assert np.all(v.v >= 0)


def test_residual_of_exact_distance(centered_256):
    g, m, pl, _ = centered_256
    d = exact_distance_field(g, pl)
    eps = 1e-4
    res, worst = eikonal_residual(d, g, m, eps)
    keep = retained_nodes(g, m, 4 * g.h)
    X, Y = g.coords()
    s = np.hypot(X, Y)[keep]
    # |grad d| = 1 and Lap d = 1/s for a ball, up to O(h^2) stencil error
    assert np.allclose(res[keep], math.sqrt(eps) / s, atol=2e-4)


def test_residual_of_constant(centered_256):
    g, m, _, _ = centered_256
    res, worst = eikonal_residual(np.full(g.shape, 2.0), g, m, 1e-3)
    assert worst == 1.0


def test_residual_band_precondition(centered_256):
    g, m, _, v = centered_256
    with pytest.raises(ValueError):
        eikonal_residual(v, g, m, 1e-3, safety_band=2 * g.h)


def test_retained_nodes_clear_dirichlet(centered_256):
    g, m, _, _ = centered_256
    keep = retained_nodes(g, m, 4 * g.h)
    X, Y = g.coords()
    # staircase nodes sit at most one diagonal cell inside the circle
    assert np.all(np.hypot(X, Y)[keep] > 0.25 + (4 - math.sqrt(2)) * g.h)


def test_rate_constant():
    assert fit_rate_constant(1e-4, 0.05) == pytest.approx(0.5)
