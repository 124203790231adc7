import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from sensorplace.geometry import Box, Placement, Polygon, compute_box
from sensorplace.grid import build_grid, classify_nodes
from sensorplace.solver import (LinearProblem, ResolutionWarning, adjoint_source, apply_operator,
                                solve_adjoint, solve_screened_poisson, solve_state)

UNIT = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


def unit_box_problem(th, eps=0.01):
    g = build_grid(Box((0, 0), (1, 1)), th)
    m = classify_nodes(g, UNIT, None)
    X, Y = g.coords()
    s = 1 + (1 + 2 * math.pi ** 2 * eps) * np.sin(math.pi * X) * np.sin(math.pi * Y)
    exact = 1 + np.sin(math.pi * X) * np.sin(math.pi * Y)
    return g, m, s, exact


def sparse_oracle(grid, mask, eps, b):
    """Direct solve of the same 5-point system with scipy (independent assembly)."""
    fl = mask.fluid
    idx = -np.ones(grid.shape, dtype=int)
    idx[fl] = np.arange(fl.sum())
    c = eps / grid.h ** 2
    rows, cols, vals = [], [], []
    for j, i in zip(*np.nonzero(fl)):
        k = idx[j, i]
        rows.append(k), cols.append(k), vals.append(1 + 4 * c)
        for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            kk = idx[j + dj, i + di]
            if kk >= 0:
                rows.append(k), cols.append(kk), vals.append(-c)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(fl.sum(),) * 2)
    u = np.zeros(grid.shape)
    u[fl] = spla.spsolve(A.tocsc(), b[fl])
    return u


def test_constant_solution():
    g, m, _, _ = unit_box_problem(1 / 16)
    u, rep = solve_screened_poisson(LinearProblem(g, m, 0.01, np.ones(g.shape)))
    assert rep.converged
    assert np.allclose(u, 1.0, atol=1e-12)


def test_manufactured_center_value_and_order():
    errs = []
    for th in (1 / 64, 1 / 128):
        g, m, s, exact = unit_box_problem(th)
        u, rep = solve_screened_poisson(LinearProblem(g, m, 0.01, s), tol=1e-12)
        errs.append(np.max(np.abs(u - exact)))
        if th == 1 / 128:
            assert u[64, 64] == pytest.approx(2.0, abs=1e-3)
    assert errs[0] / errs[1] >= 3.5


@pytest.mark.parametrize("preconditioner", ["mic", "jacobi"])
def test_matches_direct_solve(preconditioner, disk):
    g = build_grid(compute_box(disk), 1 / 16)
    m = classify_nodes(g, disk, Placement([(0.2, 0.1)], 0.25))
    rng = np.random.default_rng(3)
    src = rng.random(g.shape)
    prob = LinearProblem(g, m, 0.01, src)
    u, rep = solve_screened_poisson(prob, tol=1e-12, preconditioner=preconditioner)
    from sensorplace.solver import assemble_rhs
    ref = sparse_oracle(g, m, 0.01, assemble_rhs(prob))
    assert rep.converged
    assert np.allclose(u[m.fluid], ref[m.fluid], rtol=1e-9, atol=0)


def test_componentwise_accuracy_far_field(disk):
    # w spans many orders of magnitude; the small values must carry relative accuracy
    g = build_grid(compute_box(disk), 1 / 16)
    m = classify_nodes(g, disk, Placement([(0.0, 0.0)], 0.25))
    eps = 2e-3
    w, _ = solve_state(g, m, eps, tol=1e-10)
    from sensorplace.solver import assemble_rhs
    ref = sparse_oracle(g, m, eps, assemble_rhs(LinearProblem(g, m, eps)))
    sel = m.omega_fluid
    assert ref[sel].min() < 1e-6
    assert np.max(np.abs(w[sel] / ref[sel] - 1)) < 1e-8


def test_maximum_principle(disk):
    g = build_grid(compute_box(disk), 1 / 16)
    m = classify_nodes(g, disk, Placement([(0.3, -0.2)], 0.3))
    w, _ = solve_state(g, m, 1e-2)
    assert np.all(w[m.fluid] > 0) and np.all(w[m.fluid] < 1)
    assert np.all(w[m.dirichlet] == 1.0)


def test_state_weak_screening(square):
    g = build_grid(compute_box(square), 1 / 32)
    m = classify_nodes(g, square, Placement([(0.5, 0.5)], 0.2))
    w, _ = solve_state(g, m, square.diameter ** 2)
    assert 1 - w[m.fluid].min() <= 0.5


def test_state_resolution_warning(square):
    g = build_grid(compute_box(square), 1 / 16)
    m = classify_nodes(g, square, Placement([(0.5, 0.5)], 0.25))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always", ResolutionWarning)
        w, rep = solve_state(g, m, 1e-4)
    assert any(issubclass(r.category, ResolutionWarning) for r in rec)
    assert rep.converged


@pytest.mark.parametrize("p", [1, 2, 10])
def test_adjoint_sign_and_boundary(square, p):
    g = build_grid(compute_box(square), 1 / 32)
    m = classify_nodes(g, square, Placement([(0.5, 0.5)], 0.2))
    eps = 4e-3
    w, _ = solve_state(g, m, eps)
    q, rep = solve_adjoint(g, m, eps, p, w)
    assert rep.converged
    assert np.all(q[m.dirichlet] == 0.0)
    assert np.all(q >= 0)
    assert np.all(q[m.omega_fluid] > 0)


def test_adjoint_source_p1(square):
    g = build_grid(compute_box(square), 1 / 32)
    m = classify_nodes(g, square, Placement([(0.5, 0.5)], 0.2))
    eps = 4e-3
    w, _ = solve_state(g, m, eps)
    src = adjoint_source(m, eps, 1, w)
    sel = m.omega_fluid
    assert np.allclose(src[sel], math.sqrt(eps) / w[sel])
    assert np.all(src[~sel] == 0)


def test_adjoint_vanishes_for_unit_state(square):
    g = build_grid(compute_box(square), 1 / 32)
    m = classify_nodes(g, square, Placement([(0.5, 0.5)], 0.2))
    q, _ = solve_adjoint(g, m, 4e-3, 2, np.ones(g.shape))
    assert np.all(q == 0)


@given(st.integers(0, 2 ** 31))
def test_operator_symmetric_positive(seed):
    g = build_grid(Box((0, 0), (1, 1)), 1 / 12)
    m = classify_nodes(g, UNIT, Placement([(0.5, 0.5)], 0.26))
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.shape) * m.fluid
    v = rng.standard_normal(g.shape) * m.fluid
    Au = apply_operator(u, g, m, 0.01)
    Av = apply_operator(v, g, m, 0.01)
    assert np.sum(Au * v) == pytest.approx(np.sum(u * Av), rel=1e-12, abs=1e-12)
    assert np.sum(Au * u) > 0


def test_bad_arguments(square):
    g = build_grid(compute_box(square), 1 / 16)
    m = classify_nodes(g, square, None)
    with pytest.raises(ValueError):
        LinearProblem(g, m, 0.0)
    with pytest.raises(ValueError):
        solve_screened_poisson(LinearProblem(g, m, 0.01), preconditioner="ilu")
    with pytest.raises(ValueError):
        solve_adjoint(g, m, 0.01, 0.5, np.ones(g.shape))
