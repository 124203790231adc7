"""``place <config>``: run one experiment mode and write its artifacts plus a manifest."""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, Mode, parse_config, placement_centers
from .export import (export_field, write_convergence_log, write_csv, write_manifest,
                     write_placement)
from .geometry import GeometryError, Placement, Polygon, is_feasible
from .grid import ResolutionError
from .objective import GradientError, SensorModel, exact_objective, fd_gradient
from .optimizer import multistart, random_feasible_placement
from .solver import ResolutionWarning, SolverError
from .varadhan import eikonal_residual, fit_rate_constant, log_transform, sup_error_vs_exact

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _placement(cfg: ExperimentConfig, poly: Polygon) -> Placement:
    c = placement_centers(cfg)
    if c is None:
        return random_feasible_placement(poly, cfg.r, cfg.N, np.random.default_rng(cfg.descent.seed))
    pl = Placement(c, cfg.r)
    if not is_feasible(pl, poly):
        raise GeometryError("configured centers are infeasible")
    return pl


def _fields(out: Path, model: SensorModel, pl: Placement, stem: str = "v") -> list[Path]:
    mask, w = model.state(pl)
    v = log_transform(w, model.eps, model.grid, mask).v
    return (export_field(v, model.grid, out / f"{stem}.csv", "CSV")
            + export_field(v, model.grid, out / f"{stem}.pgm", "PGM16"))


def _optimize(cfg: ExperimentConfig, poly: Polygon, out: Path) -> tuple[list[Path], dict]:
    ms = multistart(cfg.descent, poly, cfg.r, cfg.N, cfg.K, workers=cfg.workers)
    files = []
    for k, run in enumerate(ms.runs):
        files.append(write_convergence_log(out / f"convergence_run{k:02d}.csv", run))
    rows = [(k, run.seed, run.termination.value, run.iterations, run.final_g)
            for k, run in enumerate(ms.runs)]
    files.append(write_csv(out / "runs.csv", ["run", "seed", "termination", "iterations", "g"], rows))
    best = ms.runs[ms.best_index]
    model = SensorModel(poly, cfg.eps, cfg.target_h, cfg.descent.tol)
    val = model.objective(best.final, cfg.p)
    files.append(write_placement(out / "placement.json", best.final, val.g, val.f, cfg.p, cfg.eps,
                                 model.h, best.seed))
    files += _fields(out, model, best.final)
    return files, {"best_run": ms.best_index, "best_g": val.g}


def _distance_field(cfg: ExperimentConfig, poly: Polygon, out: Path) -> tuple[list[Path], dict]:
    pl = _placement(cfg, poly)
    model = SensorModel(poly, cfg.eps, cfg.target_h, cfg.descent.tol)
    mask, w = model.state(pl)
    v = log_transform(w, cfg.eps, model.grid, mask)
    err = sup_error_vs_exact(v, pl, poly, mask, model.grid)
    _, res = eikonal_residual(v, model.grid, mask, cfg.eps)
    g = model.objective(pl, cfg.p)
    ge = exact_objective(model.grid, mask, pl, cfg.p)
    files = _fields(out, model, pl)
    files.append(write_csv(out / "error_report.csv",
                           ["eps", "h", "sup_error", "eikonal_residual", "g_varadhan", "g_exact"],
                           [(cfg.eps, model.h, err, res, g.g, ge.g)]))
    files.append(write_placement(out / "placement.json", pl, g.g, g.f, cfg.p, cfg.eps, model.h,
                                 cfg.descent.seed))
    return files, {"sup_error": err}


def gradient_report(poly: Polygon, pl: Placement, eps: float, p: float, target_h: float,
                    tol: float = 1e-10, M: int = 64, delta: float | None = None):
    """Analytic and FD gradients on one shared grid; returns (rows, rel_error, cosine)."""
    model = SensorModel(poly, eps, target_h, tol)
    a = model.gradient(pl, p, M, delta).flat
    b = fd_gradient(poly, pl, eps, p, model=model).flat
    nb = np.linalg.norm(b)
    rel = float(np.linalg.norm(a - b) / nb) if nb > 0 else float("inf")
    cos = float(a @ b / (np.linalg.norm(a) * nb)) if nb > 0 and np.linalg.norm(a) > 0 else float("nan")
    rows = [(i // 2, "xy"[i % 2], float(a[i]), float(b[i]), float(abs(a[i] - b[i])))
            for i in range(len(a))]
    return rows, rel, cos


def _gradient_check(cfg: ExperimentConfig, poly: Polygon, out: Path) -> tuple[list[Path], dict]:
    pl = _placement(cfg, poly)
    rows, rel, cos = gradient_report(poly, pl, cfg.eps, cfg.p, cfg.target_h, cfg.descent.tol,
                                     cfg.descent.M, cfg.descent.delta)
    f1 = write_csv(out / "gradient_check.csv", ["sensor", "axis", "analytic", "fd", "abs_diff"], rows)
    f2 = write_csv(out / "gradient_summary.csv", ["rel_l2_error", "cosine"], [(rel, cos)])
    return [f1, f2], {"rel_l2_error": rel, "cosine": cos}


def epsilon_sweep(poly: Polygon, pl: Placement, eps_list, target_h: float, p: float = 1.0,
                  tol: float = 1e-10):
    """Sup error, objective and rate constant per eps (largest eps calibrates C)."""
    eps_list = sorted(eps_list, reverse=True)
    rows = []
    c_hat = None
    for eps in eps_list:
        model = SensorModel(poly, eps, target_h, tol)
        mask, w = model.state(pl)
        v = log_transform(w, eps, model.grid, mask)
        err = sup_error_vs_exact(v, pl, poly, mask, model.grid)
        if c_hat is None:
            c_hat = fit_rate_constant(eps, err)
        g = model.objective(pl, p).g
        ge = exact_objective(model.grid, mask, pl, p).g
        rows.append((eps, model.h, err, c_hat * eps ** 0.25, g, ge))
    return rows, c_hat


def _epsilon_sweep(cfg: ExperimentConfig, poly: Polygon, out: Path) -> tuple[list[Path], dict]:
    pl = _placement(cfg, poly)
    rows, c_hat = epsilon_sweep(poly, pl, cfg.eps_sweep, cfg.target_h, cfg.p, cfg.descent.tol)
    f = write_csv(out / "eps_sweep.csv", ["eps", "h", "sup_error", "rate_bound", "g_varadhan", "g_exact"],
                  rows)
    decreasing = all(rows[i + 1][2] < rows[i][2] for i in range(len(rows) - 1))
    within = all(r[2] <= r[3] * (1 + 1e-12) for r in rows)
    return [f], {"C_hat": c_hat, "strictly_decreasing": decreasing, "within_rate_bound": within}


RUNNERS = {Mode.OPTIMIZE: _optimize, Mode.DISTANCE_FIELD: _distance_field,
           Mode.GRADIENT_CHECK: _gradient_check, Mode.EPSILON_SWEEP: _epsilon_sweep}


def run_experiment(cfg: ExperimentConfig) -> int:
    poly = cfg.load_polygon()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files, summary = RUNNERS[cfg.mode](cfg, poly, out)
    write_manifest(out, files, cfg.resolved(), {"summary": summary})
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="place", description="Sensor placement experiments.")
    ap.add_argument("config", help="key = value configuration file")
    ap.add_argument("--mode", choices=[m.value for m in Mode])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config).with_overrides(args.mode, args.seed, args.out)
    except (ConfigError, OSError) as e:
        print(f"place: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", ResolutionWarning)
            status = run_experiment(cfg)
    except (SolverError, GeometryError, GradientError, ArithmeticError) as e:
        print(f"place: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ResolutionError, ValueError) as e:
        print(f"place: invalid setting: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"place: wrote {Path(cfg.out) / 'manifest.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
