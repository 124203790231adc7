"""Projected gradient descent over feasible placements and a seeded multi-start driver.

Steps are taken along the normalized negative gradient, so ``alpha`` is a displacement
length. The Armijo test ``g(x+) <= g(x) - c * alpha * |grad g|`` is the usual
``g(x - a grad g) <= g(x) - c * a * |grad g|^2`` with ``a = alpha / |grad g|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .geometry import (GeometryError, Placement, Polygon, is_feasible, project_feasible,
                       signed_distance_polygon, signed_distances)
from .objective import GradientError, SensorModel


class InfeasibleInstanceError(GeometryError):
    """No feasible placement could be sampled."""


class Termination(str, Enum):
    STEP_TOL = "STEP_TOL"
    MAX_ITER = "MAX_ITER"
    LINESEARCH_FAIL = "LINESEARCH_FAIL"


@dataclass(frozen=True)
class DescentConfig:
    """Descent parameters. Lengths left as None are set from the grid spacing h.

    alpha0 defaults to 10h and step_tol to h/4; delta is the gradient probe offset (2h).
    """
    p: float = 2.0
    eps: float = 4e-3
    target_h: float = 0.021
    alpha0: float | None = None
    c: float = 1e-4
    beta: float = 0.5
    max_iter: int = 200
    step_tol: float | None = None
    max_trials: int = 30
    seed: int = 0
    tol: float = 1e-10
    M: int = 64
    delta: float | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not (self.eps > 0 and self.target_h > 0):
            raise ValueError("eps and target_h must be positive")
        if not (0 < self.c < 1 and 0 < self.beta < 1):
            raise ValueError("c and beta must lie in (0, 1)")
        if self.max_iter < 1 or self.max_trials < 1:
            raise ValueError("iteration limits must be positive")
        for name in ("alpha0", "step_tol", "delta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    def resolved(self, h: float) -> "DescentConfig":
        return replace(self,
                       alpha0=10 * h if self.alpha0 is None else self.alpha0,
                       step_tol=h / 4 if self.step_tol is None else self.step_tol,
                       delta=2 * h if self.delta is None else self.delta)


@dataclass
class LogRow:
    iteration: int
    g: float
    f: float
    grad_norm: float
    step: float
    accepted: bool


@dataclass
class RunResult:
    placements: list[Placement]
    g: list[float]
    grad_norms: list[float]
    termination: Termination
    log: list[LogRow] = field(default_factory=list)
    seed: int | None = None
    h: float = float("nan")

    @property
    def final(self) -> Placement:
        return self.placements[-1]

    @property
    def final_g(self) -> float:
        return self.g[-1]

    @property
    def iterations(self) -> int:
        return len(self.placements) - 1


@dataclass
class MultistartResult:
    runs: list[RunResult]
    best_index: int

    @property
    def best(self) -> Placement:
        return self.runs[self.best_index].final

    @property
    def best_g(self) -> float:
        return self.runs[self.best_index].final_g


def random_feasible_placement(poly: Polygon, r: float, N: int, rng: np.random.Generator,
                              max_draws: int = 100_000, pair_distance: float | None = None) -> Placement:
    """Rejection sampling of N centers, uniform in the bounding box of the polygon."""
    if N < 1 or not r > 0:
        raise ValueError("need N >= 1 and r > 0")
    sep = 2 * r if pair_distance is None else pair_distance
    lo, hi = poly.bbox
    centers: list[np.ndarray] = []
    drawn = 0
    while drawn < max_draws:
        n = min(4096, max_draws - drawn)
        xs = lo + (hi - lo) * rng.random((n, 2))
        drawn += n
        # vectorized prefilter, confirmed by the scalar test below
        ok = signed_distances(poly, xs) <= -r * (1 - 1e-9)
        for x in xs[ok]:
            if signed_distance_polygon(poly, x) > -r:
                continue
            if any(math.hypot(*(x - c)) < sep for c in centers):
                continue
            centers.append(x)
            if len(centers) == N:
                pl = Placement(np.array(centers), r)
                if is_feasible(pl, poly, sep):
                    return pl
                centers.clear()
    raise InfeasibleInstanceError(f"no feasible placement of {N} balls of radius {r} after {max_draws} draws")


def _pair_distance(model: SensorModel, r: float, delta: float) -> float:
    # gradient probes reach 3 delta into the fluid, plus one bilinear cell
    return 2 * r + 3 * delta + 2 * model.h


def descend(cfg: DescentConfig, poly: Polygon, pl0: Placement, model: SensorModel | None = None,
            seed: int | None = None) -> RunResult:
    """Projected steepest descent with Armijo backtracking from ``pl0``.

    Stops with STEP_TOL once a trial displacement drops to ``step_tol``, MAX_ITER after
    ``max_iter`` accepted steps and LINESEARCH_FAIL when ``max_trials`` backtracks all fail.
    """
    if model is None:
        model = SensorModel(poly, cfg.eps, cfg.target_h, cfg.tol)
    cfg = cfg.resolved(model.h)
    sep = _pair_distance(model, pl0.radius, cfg.delta)
    if not is_feasible(pl0, poly):
        raise GeometryError("starting placement is infeasible")
    if pl0.n > 1 and not is_feasible(pl0, poly, sep):
        proj = project_feasible(pl0, poly, pair_distance=sep)
        if not proj.feasible:
            raise GradientError("start is too tight for the gradient probes")
        pl0 = proj.placement

    x = pl0
    val = model.objective(x, cfg.p)
    grad = model.gradient(x, cfg.p, cfg.M, cfg.delta)
    placements, gs, norms = [x], [val.g], [grad.norm]
    log = [LogRow(0, val.g, val.f, grad.norm, 0.0, True)]
    reason = Termination.MAX_ITER
    for it in range(1, cfg.max_iter + 1):
        gnorm = grad.norm
        if gnorm == 0.0:
            reason = Termination.STEP_TOL
            break
        direction = grad.vectors / gnorm
        alpha = cfg.alpha0
        accepted = None
        stop = False
        for _ in range(cfg.max_trials):
            proj = project_feasible(x.moved(x.centers - alpha * direction), poly, pair_distance=sep)
            trial = proj.placement
            step = float(np.linalg.norm(trial.centers - x.centers))
            if step <= cfg.step_tol:
                stop = True
                break
            if proj.feasible:
                tv = model.objective(trial, cfg.p)
                ok = tv.g <= val.g - cfg.c * alpha * gnorm
                log.append(LogRow(it, tv.g, tv.f, gnorm, step, ok))
                if ok:
                    accepted = (trial, tv)
                    break
            alpha *= cfg.beta
        if stop:
            reason = Termination.STEP_TOL
            break
        if accepted is None:
            reason = Termination.LINESEARCH_FAIL
            break
        x, val = accepted
        grad = model.gradient(x, cfg.p, cfg.M, cfg.delta)
        placements.append(x)
        gs.append(val.g)
        norms.append(grad.norm)
    return RunResult(placements, gs, norms, reason, log, seed, model.h)


def _run_one(cfg: DescentConfig, poly: Polygon, r: float, N: int, k: int,
             model: SensorModel | None) -> RunResult:
    seed = cfg.seed + k
    if model is None:
        model = SensorModel(poly, cfg.eps, cfg.target_h, cfg.tol)
    res = cfg.resolved(model.h)
    pl0 = random_feasible_placement(poly, r, N, np.random.default_rng(seed),
                                    pair_distance=_pair_distance(model, r, res.delta) if N > 1 else None)
    return descend(cfg, poly, pl0, model, seed=seed)


def multistart(cfg: DescentConfig, poly: Polygon, r: float, N: int, K: int,
               workers: int = 1) -> MultistartResult:
    """K descents from random starts with seeds seed+0 .. seed+K-1; best by final g.

    With ``workers > 1`` the starts run in separate processes; results are gathered in
    start order so the outcome does not depend on scheduling.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_one, cfg, poly, r, N, k, None) for k in range(K)]
            outcomes = []
            for f in futs:
                try:
                    outcomes.append(f.result())
                except (GeometryError, GradientError, ArithmeticError, RuntimeError) as e:
                    outcomes.append(e)
    else:
        model = SensorModel(poly, cfg.eps, cfg.target_h, cfg.tol)
        outcomes = []
        for k in range(K):
            try:
                outcomes.append(_run_one(cfg, poly, r, N, k, model))
            except (GeometryError, GradientError, ArithmeticError, RuntimeError) as e:
                outcomes.append(e)
    runs = [o for o in outcomes if isinstance(o, RunResult)]
    if not runs:
        raise outcomes[0]
    best = min(range(len(runs)), key=lambda i: (runs[i].final_g, i))
    return MultistartResult(runs, best)
