"""Objective g = int_Omega v^p, its adjoint-based placement gradient and an FD oracle."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (Ball, GeometryError, Placement, Polygon, compute_box, is_feasible)
from .grid import (Grid, NodeMask, build_grid, classify_nodes, grid_in_polygon, integrate_masked,
                   interpolate)
from .solver import solve_adjoint, solve_state
from .varadhan import exact_distance_field, log_transform


class GradientError(ValueError):
    """The placement is too tight for the boundary probes or FD perturbations."""


@dataclass(frozen=True)
class ObjectiveValue:
    g: float
    f: float
    p: float
    eps: float


@dataclass(frozen=True)
class PlacementGradient:
    vectors: np.ndarray
    M: int
    delta: float
    dw: np.ndarray | None = None
    dq: np.ndarray | None = None
    j_term: np.ndarray | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vectors))

    @property
    def flat(self) -> np.ndarray:
        return self.vectors.ravel()


def objective_from_distance(v: np.ndarray, grid: Grid, mask: NodeMask, p: float,
                            eps: float = float("nan")) -> ObjectiveValue:
    if p < 1:
        raise ValueError("p must be >= 1")
    g = integrate_masked(np.abs(v) ** p, grid, mask)
    return ObjectiveValue(g, g ** (1.0 / p), p, eps)


def evaluate_objective(grid: Grid, mask: NodeMask, eps: float, p: float, w: np.ndarray) -> ObjectiveValue:
    """g = h^2 sum_{Omega fluid} v^p with v the log transform of the state."""
    v = log_transform(w, eps, grid, mask).v
    return objective_from_distance(v, grid, mask, p, eps)


def exact_objective(grid: Grid, mask: NodeMask, pl: Placement, p: float) -> ObjectiveValue:
    """Same quadrature with the exact distance to the sensors as integrand."""
    return objective_from_distance(exact_distance_field(grid, pl), grid, mask, p, 0.0)


def boundary_points(ball: Ball, M: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(M) / M
    n = np.column_stack([np.cos(theta), np.sin(theta)])
    return ball.center + ball.radius * n, n


def boundary_normal_derivative(field: np.ndarray, grid: Grid, ball: Ball, boundary_value: float,
                               M: int = 64, delta: float | None = None,
                               outward: bool = True) -> np.ndarray:
    """One-sided second-order derivative at M points of the circle, into the fluid.

    Uses the exact boundary value and two probes at distances delta and 2*delta along the
    outward normal of the ball. With ``outward=False`` the derivative is reported along the
    opposite direction (same probes, sign flipped).
    """
    if M < 16:
        raise ValueError("need at least 16 quadrature points")
    delta = 2 * grid.h if delta is None else delta
    if delta < grid.h * (1 - 1e-12):
        raise ValueError("probe offset must be at least h")
    b, n = boundary_points(ball, M)
    f1 = interpolate(field, grid, b + delta * n)
    f2 = interpolate(field, grid, b + 2 * delta * n)
    d = (-3.0 * boundary_value + 4.0 * f1 - f2) / (2.0 * delta)
    return d if outward else -d


def _extrapolate(f1, f2, f3, delta):
    """Value and slope at 0 of the quadratic through samples at delta, 2 delta, 3 delta."""
    return 3.0 * f1 - 3.0 * f2 + f3, (-2.5 * f1 + 4.0 * f2 - 1.5 * f3) / delta


def layer_normal_derivatives(w: np.ndarray, q: np.ndarray, grid: Grid, ball: Ball, M: int = 64,
                             delta: float | None = None, outward: bool = True):
    """Into-fluid normal derivatives of state and adjoint on the circle, (Dw, Dq).

    The staircase Dirichlet set sits up to a cell inside the true circle, so a stencil
    pinned to the exact boundary value carries an O(1) relative bias when delta ~ h.
    Here nothing is pinned: log w and the ratio q / (1 - w), both smooth across the
    boundary layer, are extrapolated from probes at delta, 2 delta and 3 delta, and

        Dw = w0 * (log w)'(0),    Dq = -rho0 * Dw,    rho = q / (1 - w).
    """
    if M < 16:
        raise ValueError("need at least 16 quadrature points")
    delta = 2 * grid.h if delta is None else delta
    if delta < grid.h * (1 - 1e-12):
        raise ValueError("probe offset must be at least h")
    b, n = boundary_points(ball, M)
    W = [interpolate(w, grid, b + k * delta * n) for k in (1, 2, 3)]
    Q = [interpolate(q, grid, b + k * delta * n) for k in (1, 2, 3)]
    if any(np.any(x <= 0) | np.any(x >= 1) for x in W):
        raise GradientError("state probes must lie strictly between 0 and 1")
    l0, l1 = _extrapolate(*[np.log(x) for x in W], delta)
    dw = np.exp(l0) * l1
    rho0, _ = _extrapolate(*[qq / (1.0 - ww) for qq, ww in zip(Q, W)], delta)
    dq = -rho0 * dw
    return (dw, dq) if outward else (-dw, -dq)


def _check_probe_clearance(pl: Placement, delta: float, reach: float = 3.0) -> None:
    c = pl.centers
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            gap = math.hypot(*(c[i] - c[j])) - 2 * pl.radius
            if gap < reach * delta * (1 - 1e-12):
                raise GradientError(
                    f"sensors {i} and {j} are {gap:.3g} apart, probes need {reach * delta:.3g}")


def shape_gradient(w: np.ndarray, q: np.ndarray, grid: Grid, pl: Placement, eps: float, p: float,
                   M: int = 64, delta: float | None = None) -> PlacementGradient:
    """dg/dx_i^k = int_{dB_i} ((-sqrt(eps) log w)^p + eps Dw Dq) nu_k dsigma.

    Dw, Dq are derivatives into the fluid (``layer_normal_derivatives``) and nu is the
    unit normal pointing out of the ball. ``q`` must be the adjoint with nonnegative
    source from ``solve_adjoint``. On the circle w = 1, so the first term is identically
    zero; it is kept so the quadrature mirrors the formula term by term.
    """
    delta = 2 * grid.h if delta is None else delta
    _check_probe_clearance(pl, delta)
    r = pl.radius
    vec = np.zeros((pl.n, 2))
    dws, dqs, js = [], [], []
    for i, ball in enumerate(pl.balls):
        _, n = boundary_points(ball, M)
        dw, dq = layer_normal_derivatives(w, q, grid, ball, M, delta)
        jt = np.full(M, (-math.sqrt(eps) * math.log(1.0)) ** p)
        integrand = jt + eps * dw * dq
        vec[i] = (2.0 * np.pi * r / M) * (integrand[:, None] * n).sum(axis=0)
        dws.append(dw)
        dqs.append(dq)
        js.append(jt)
    return PlacementGradient(vec, M, delta, np.array(dws), np.array(dqs), np.array(js))


class SensorModel:
    """State/adjoint pipeline on one fixed grid for a given domain, eps and resolution.

    The grid and the Omega indicator are computed once; state solves are cached per
    placement so objective and gradient evaluations at the same point share them.
    """

    def __init__(self, poly: Polygon, eps: float, target_h: float, tol: float = 1e-10,
                 cache_size: int = 6, preconditioner: str = "mic"):
        self.poly = poly
        self.eps = float(eps)
        self.tol = tol
        self.preconditioner = preconditioner
        self.box = compute_box(poly)
        self.grid = build_grid(self.box, target_h)
        self.in_omega = grid_in_polygon(self.grid, poly)
        self._cache: OrderedDict[bytes, tuple[NodeMask, np.ndarray]] = OrderedDict()
        self._cache_size = cache_size
        self.n_solves = 0

    @property
    def h(self) -> float:
        return self.grid.h

    def mask(self, pl: Placement) -> NodeMask:
        return classify_nodes(self.grid, self.poly, pl, in_omega=self.in_omega)

    def state(self, pl: Placement) -> tuple[NodeMask, np.ndarray]:
        key = pl.key()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        mask = self.mask(pl)
        w, _ = solve_state(self.grid, mask, self.eps, self.tol, preconditioner=self.preconditioner)
        self.n_solves += 1
        self._cache[key] = (mask, w)
        while len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return mask, w

    def objective(self, pl: Placement, p: float) -> ObjectiveValue:
        mask, w = self.state(pl)
        return evaluate_objective(self.grid, mask, self.eps, p, w)

    def adjoint(self, pl: Placement, p: float) -> np.ndarray:
        mask, w = self.state(pl)
        q, _ = solve_adjoint(self.grid, mask, self.eps, p, w, self.tol, preconditioner=self.preconditioner)
        self.n_solves += 1
        return q

    def gradient(self, pl: Placement, p: float, M: int = 64, delta: float | None = None) -> PlacementGradient:
        mask, w = self.state(pl)
        q = self.adjoint(pl, p)
        return shape_gradient(w, q, self.grid, pl, self.eps, p, M, delta)


def fd_gradient(poly: Polygon, pl: Placement, eps: float, p: float, target_h: float | None = None,
                step: float | None = None, functional: Callable[[Placement], float] | None = None,
                model: SensorModel | None = None, tol: float = 1e-10) -> PlacementGradient:
    """Central differences of ``functional`` (default: g on a fixed grid) per center coordinate."""
    if functional is None:
        if model is None:
            if target_h is None:
                raise ValueError("target_h or a model is required")
            model = SensorModel(poly, eps, target_h, tol)
        functional = lambda q: model.objective(q, p).g  # noqa: E731
        if step is None:
            step = 2 * model.h
    if step is None:
        raise ValueError("step is required with a custom functional")
    vec = np.zeros((pl.n, 2))
    for i in range(pl.n):
        for k in range(2):
            vals = []
            for s in (1.0, -1.0):
                c = np.array(pl.centers)
                c[i, k] += s * step
                moved = pl.moved(c)
                if not is_feasible(moved, poly):
                    raise GeometryError(f"perturbation of sensor {i} along axis {k} leaves the feasible set")
                vals.append(functional(moved))
            vec[i, k] = (vals[0] - vals[1]) / (2 * step)
    return PlacementGradient(vec, 0, step)
