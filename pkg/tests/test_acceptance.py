"""Acceptance criteria 1-9 at their stated tolerances.

Each test records one PASS/FAIL line (printed in the terminal summary) before asserting,
so a failing criterion still reports its measured values.
"""
import math
import time

import numpy as np
import pytest

from conftest import annulus_mean_distance
from sensorplace.cli import main
from sensorplace.geometry import Box, Placement, Polygon, is_feasible, regular_polygon
from sensorplace.grid import build_grid, classify_nodes
from sensorplace.objective import SensorModel, evaluate_objective, exact_objective, fd_gradient
from sensorplace.optimizer import DescentConfig, Termination, multistart
from sensorplace.solver import LinearProblem, solve_screened_poisson
from sensorplace.varadhan import eikonal_residual, log_transform, sup_error_vs_exact

REPORT: dict[int, str] = {}

H_FINE = 1 / 512
SWEEP = (4e-3, 1e-3, 2.5e-4)
R_DISK = 0.25
G_STAR = 1.3254


def record(n: int, ok: bool, detail: str) -> bool:
    REPORT[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(REPORT[n])
    return ok


@pytest.fixture(scope="session")
def unit_disk():
    return regular_polygon(256)


@pytest.fixture(scope="session")
def canonical(unit_disk):
    """Centered sensor in the unit disk at h = 1/512 for each eps of the sweep."""
    pl = Placement([(0.0, 0.0)], R_DISK)
    out = {}
    t0 = time.perf_counter()
    for eps in SWEEP:
        model = SensorModel(unit_disk, eps, H_FINE)
        mask, w = model.state(pl)
        v = log_transform(w, eps, model.grid, mask)
        out[eps] = dict(model=model, mask=mask, w=w, v=v,
                        err=sup_error_vs_exact(v, pl, unit_disk, mask, model.grid),
                        g=evaluate_objective(model.grid, mask, eps, 1, w).g)
    return pl, out, time.perf_counter() - t0


def test_criterion_1_solver_order():
    t0 = time.perf_counter()
    sq = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    eps = 0.01
    errs = []
    for n in (64, 128, 256):
        g = build_grid(Box((0, 0), (1, 1)), 1 / n)
        m = classify_nodes(g, sq, None)
        X, Y = g.coords()
        s = 1 + (1 + 2 * math.pi ** 2 * eps) * np.sin(math.pi * X) * np.sin(math.pi * Y)
        u, rep = solve_screened_poisson(LinearProblem(g, m, eps, s), tol=1e-12)
        errs.append(float(np.max(np.abs(u - 1 - np.sin(math.pi * X) * np.sin(math.pi * Y)))))
    dt = time.perf_counter() - t0
    f1, f2 = errs[0] / errs[1], errs[1] / errs[2]
    ok = f1 >= 3.5 and f2 >= 3.5 and dt < 30
    assert record(1, ok, f"Linf errors {errs[0]:.3e} {errs[1]:.3e} {errs[2]:.3e}, "
                         f"factors {f1:.3f} {f2:.3f} (>= 3.5), {dt:.1f} s (< 30 s)")


def test_criterion_2_varadhan_convergence(canonical):
    _, runs, dt = canonical
    errs = [runs[e]["err"] for e in SWEEP]
    c_hat = errs[0] / SWEEP[0] ** 0.25
    decreasing = errs[0] > errs[1] > errs[2]
    bound = all(err <= c_hat * e ** 0.25 * (1 + 1e-12) for err, e in zip(errs, SWEEP))
    ok = decreasing and errs[2] <= 0.08 and bound and dt < 120
    assert record(2, ok, "sup errors " + " ".join(f"{e:.4f}" for e in errs)
                  + f", C_hat {c_hat:.4f}, bounds " + " ".join(f"{c_hat * e ** 0.25:.4f}" for e in SWEEP)
                  + f", {dt:.1f} s (< 120 s)")


def test_criterion_3_viscous_eikonal(canonical):
    _, runs, _ = canonical
    r = runs[1e-3]
    _, worst = eikonal_residual(r["v"], r["model"].grid, r["mask"], 1e-3, safety_band=4 * H_FINE)
    assert record(3, worst <= 0.1, f"max |1 - |grad v|^2 + sqrt(eps) Lap v| = {worst:.4f} (<= 0.1)")


def test_criterion_4_objective_oracle(canonical):
    pl, runs, _ = canonical
    r = runs[SWEEP[0]]
    g_exact = exact_objective(r["model"].grid, r["mask"], pl, 1).g
    analytic = annulus_mean_distance(R_DISK)
    exact_ok = abs(g_exact - G_STAR) <= 0.02 * G_STAR
    gs = [runs[e]["g"] for e in SWEEP]
    gaps = [abs(g - G_STAR) / G_STAR for g in gs]
    monotone = gaps[0] > gaps[1] > gaps[2]
    ok = exact_ok and monotone and gaps[2] <= 0.01
    assert record(4, ok, f"exact-mode g {g_exact:.4f} vs {G_STAR} (radial integral {analytic:.5f}); "
                         f"Varadhan g " + " ".join(f"{g:.4f}" for g in gs)
                  + ", gaps " + " ".join(f"{100 * x:.2f}%" for x in gaps) + " (last <= 1%)")


def test_criterion_5_gradient(canonical, unit_disk):
    _, runs, _ = canonical
    model = runs[1e-3]["model"]
    t0 = time.perf_counter()
    off = Placement([(0.2, 0.1)], R_DISK)
    cen = Placement([(0.0, 0.0)], R_DISK)
    parts, ok = [], True
    for p in (1, 2, 10):
        a = model.gradient(off, p).flat
        b = fd_gradient(unit_disk, off, 1e-3, p, model=model, step=2 * H_FINE).flat
        rel = np.linalg.norm(a - b) / np.linalg.norm(b)
        cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        ratio = model.gradient(cen, p).norm / np.linalg.norm(a)
        ok &= rel <= 0.10 and cos >= 0.99 and ratio <= 0.05
        parts.append(f"p={p}: rel {rel:.4f} cos {cos:.5f} centered/off {ratio:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt < 180
    assert record(5, ok, "; ".join(parts) + f"; {dt:.1f} s (< 180 s)")


def test_criterion_6_boundary_terms(canonical):
    pl, runs, _ = canonical
    model = runs[1e-3]["model"]
    ok, parts = True, []
    for p in (1, 2, 10):
        grad = model.gradient(pl, p)
        j_zero = bool(np.all(grad.j_term == 0.0))
        signs = bool(np.all(grad.dw < 0) and np.all(grad.dq > 0))
        ok &= j_zero and signs
        parts.append(f"p={p}: J==0 {j_zero}, max Dw {grad.dw.max():.2f}, min Dq {grad.dq.min():.3g}")
    assert record(6, ok, "; ".join(parts))


def _disk_setup(unit_disk):
    eps = 1e-3 * unit_disk.diameter ** 2
    return eps, math.sqrt(eps) / 3


def test_criterion_7_optimizer(unit_disk):
    t0 = time.perf_counter()
    eps, th = _disk_setup(unit_disk)
    model = SensorModel(unit_disk, eps, th)
    h = model.h
    # brute force over a 21 x 21 grid of candidate centers
    span = 1.0 - R_DISK
    ticks = np.linspace(-span, span, 21)
    cell = ticks[1] - ticks[0]
    brute = {p: np.full((21, 21), np.inf) for p in (1, 2, 10)}
    for a, x in enumerate(ticks):
        for b, y in enumerate(ticks):
            pl = Placement([(x, y)], R_DISK)
            if not is_feasible(pl, unit_disk):
                continue
            mask, w = model.state(pl)
            for p in brute:
                brute[p][b, a] = evaluate_objective(model.grid, mask, eps, p, w).g
    ok, parts = True, []
    for p in (1, 2, 10):
        ms = multistart(DescentConfig(p=p, eps=eps, target_h=th, seed=0), unit_disk, R_DISK, 1, 5)
        B = brute[p]
        jb, ib = np.unravel_index(np.argmin(B), B.shape)
        gb = B[jb, ib]
        nbrs = [B[jb + dj, ib + di] for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= jb + dj < 21 and 0 <= ib + di < 21 and np.isfinite(B[jb + dj, ib + di])]
        tau = max(abs(n - gb) for n in nbrs)
        dists = [np.linalg.norm(r.final.centers[0]) for r in ms.runs]
        step_tol = all(r.termination is Termination.STEP_TOL for r in ms.runs)
        near = max(dists) <= 2 * h
        match = all(abs(r.final_g - gb) <= tau for r in ms.runs)
        ok &= step_tol and near and match
        parts.append(f"p={p}: STEP_TOL {step_tol}, max |c| {max(dists) / h:.2f}h, "
                     f"g {ms.best_g:.5g} vs brute {gb:.5g} at ({ticks[ib]:+.3f},{ticks[jb]:+.3f}) "
                     f"cell tol {tau:.2g}")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    assert record(7, ok, "; ".join(parts) + f"; cell {cell:.3f}, h {h:.4f}, {dt:.1f} s (< 300 s)")


def _symmetry_defects(centers: np.ndarray) -> dict:
    """Distance between the sensor set and its image under each symmetry of the rhombus."""
    out = {}
    for name, t in (("mirror x->-x", [-1, 1]), ("mirror y->-y", [1, -1]), ("point reflection", [-1, -1])):
        img = centers * t
        out[name] = max(min(np.linalg.norm(c - m) for m in img) for c in centers)
    return out


def test_criterion_8_symmetry_breaking():
    rh = Polygon([(1, 0), (0, 0.5), (-1, 0), (0, -0.5)])
    eps = 1e-3 * rh.diameter ** 2
    th = math.sqrt(eps) / 3
    r = 0.1
    ms = multistart(DescentConfig(p=10, eps=eps, target_h=th, seed=0), rh, r, 2, 8)
    model = SensorModel(rh, eps, th)
    h = model.h
    best_sym, best_t = np.inf, None
    for t in np.arange(r, 1.0, h):
        pl = Placement([(t, 0.0), (-t, 0.0)], r)
        if is_feasible(pl, rh):
            g = model.objective(pl, 10).g
            if g < best_sym:
                best_sym, best_t = g, t
    best = ms.best.centers
    defects = _symmetry_defects(best)
    kept = ", ".join(f"{k} {v / h:.2f}h" for k, v in defects.items())
    ok = ms.best_g <= best_sym
    assert record(8, ok, f"multistart g {ms.best_g:.6g} at {np.round(best, 3).tolist()} vs symmetric "
                         f"family g {best_sym:.6g} at t={best_t:.3f}; symmetry defects of the optimum: {kept}")


def test_criterion_9_determinism(tmp_path, unit_disk):
    from sensorplace.geometry import save_polygon
    save_polygon(unit_disk, tmp_path / "disk.txt")
    same = True
    checked = 0
    for p in (1, 2, 10):
        cfg = tmp_path / f"p{p}.cfg"
        cfg.write_text(f"polygon = disk.txt\nmode = OPTIMIZE\nN = 1\nr = {R_DISK}\np = {p}\nK = 5\nseed = 0\n")
        outs = [tmp_path / f"p{p}_{k}" for k in range(2)]
        for o in outs:
            assert main([str(cfg), "--out", str(o)]) == 0
        names = ["placement.json"] + sorted(f.name for f in outs[0].glob("convergence_run*.csv"))
        for name in names:
            same &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            checked += 1
    assert record(9, same and checked == 18,
                  f"{checked} artifacts (placement.json + 5 convergence CSVs for p = 1, 2, 10) "
                  f"byte-identical: {same}")
