"""Screened Poisson solves u - eps * Lap(u) = s with Dirichlet data on sensor/outer nodes.

The state ``w`` and adjoint ``q`` decay exponentially away from the Dirichlet sets,
so the log transform is only meaningful if small values carry full relative
accuracy. The conjugate-gradient stopping test is therefore componentwise: the
residual at each monitored node is measured against ``|A||u| + |b|`` at that node,
not against the global right-hand side norm.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels as K
from .grid import Grid, NodeMask

W_FLOOR = 1e-290


class SolverError(RuntimeError):
    pass


class ResolutionWarning(UserWarning):
    """sqrt(eps) spans fewer than three cells; the boundary layer is under-resolved."""


@dataclass(frozen=True)
class LinearProblem:
    grid: Grid
    mask: NodeMask
    eps: float
    source: np.ndarray | None = None
    sensor_value: float = 1.0
    outer_value: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    componentwise: float
    converged: bool


def _dirichlet_values(prob: LinearProblem) -> np.ndarray:
    g = np.zeros(prob.grid.shape)
    g[prob.mask.sensor] = prob.sensor_value
    g[prob.mask.outer] = prob.outer_value
    return g


def assemble_rhs(prob: LinearProblem) -> np.ndarray:
    """Right-hand side after eliminating Dirichlet nodes (zero off the fluid set)."""
    c = prob.eps / prob.grid.h ** 2
    fl = prob.mask.fluid
    g = _dirichlet_values(prob)
    b = np.zeros(prob.grid.shape)
    if prob.source is not None:
        b += np.asarray(prob.source, dtype=float)
    nb = np.zeros(prob.grid.shape)
    nb[1:-1, 1:-1] = g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:]
    b += c * nb
    b[~fl] = 0.0
    return b


def apply_operator(u: np.ndarray, grid: Grid, mask: NodeMask, eps: float) -> np.ndarray:
    """(I - eps Lap_h) restricted to fluid nodes, with u taken as zero on Dirichlet nodes."""
    fl = mask.fluid.astype(float)
    out = np.zeros(grid.shape)
    K.apply_operator(np.ascontiguousarray(u * fl), fl, eps / grid.h ** 2, out)
    return out


def omega_monitor(grid: Grid, mask: NodeMask, eps: float, layers: float = 3.0) -> np.ndarray:
    """Fluid nodes within ``layers * sqrt(eps)`` (Chebyshev distance) of Omega."""
    k = max(1, math.ceil(layers * math.sqrt(eps) / grid.h))
    near = ndimage.maximum_filter(mask.in_omega.astype(np.uint8), size=2 * k + 1) > 0
    return near & mask.fluid


def solve_screened_poisson(prob: LinearProblem, tol: float = 1e-10, max_iter: int | None = None,
                           preconditioner: str = "mic", monitor: np.ndarray | None = None,
                           check_every: int = 10, stall_checks: int = 50):
    """Preconditioned CG for the 5-point discretization; returns (u, SolveReport).

    ``monitor`` selects the nodes on which the componentwise residual must drop below
    ``tol`` (default: all fluid nodes). The normwise relative residual must also be
    below ``tol``. Dirichlet nodes carry their prescribed values exactly.
    """
    if not 0 < tol <= 1e-2:
        raise ValueError("tol must lie in (0, 1e-2]")
    grid, mask = prob.grid, prob.mask
    flb = mask.fluid
    if not flb.any():
        raise SolverError("no fluid nodes to solve for")
    if max_iter is None:
        max_iter = 10 * (grid.nx + grid.ny)
    c = prob.eps / grid.h ** 2
    fl = flb.astype(float)
    b = assemble_rhs(prob)
    mon = flb if monitor is None else (monitor & flb)

    if preconditioner == "mic":
        d = K.mic_diagonal(fl, c)
        if np.any(d[flb] <= 0):
            raise SolverError("incomplete factorization broke down")
        solve_m = K.mic_solve
    elif preconditioner == "jacobi":
        d = np.full(grid.shape, 1.0 + 4.0 * c)
        solve_m = K.jacobi_solve
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    fd = fl / d
    cd = c * fd

    u = np.zeros(grid.shape)
    r = b.copy()
    z = np.zeros(grid.shape)
    q = np.zeros(grid.shape)
    bnorm = math.sqrt(K.dot(b, b))
    it = 0
    cw = K.componentwise_residual(u, b, fl, mon, c)
    if bnorm > 0 and cw > tol:
        solve_m(r, fd, cd, z)
        p = z.copy()
        rz = K.dot(r, z)
        best, since = cw, 0
        while it < max_iter:
            pq = K.apply_operator(p, fl, c, q)
            if pq <= 0:
                break
            alpha = rz / pq
            K.axpy_pair(u, r, p, q, alpha)
            it += 1
            if it % check_every == 0:
                cw = K.componentwise_residual(u, b, fl, mon, c)
                if cw <= tol:
                    break
                if cw < 0.5 * best:
                    best, since = cw, 0
                else:
                    since += 1
                    if since >= stall_checks:
                        break
            solve_m(r, fd, cd, z)
            rz_new = K.dot(r, z)
            if rz_new == 0:
                break
            K.new_direction(p, z, rz_new / rz)
            rz = rz_new
        cw = K.componentwise_residual(u, b, fl, mon, c)
    true_res = b - apply_operator(u, grid, mask, prob.eps)
    nw = math.sqrt(K.dot(true_res, true_res)) / bnorm if bnorm > 0 else 0.0
    out = np.where(flb, u, _dirichlet_values(prob))
    return out, SolveReport(it, nw, float(cw), bool(cw <= tol and nw <= tol))


def _check_resolution(grid: Grid, eps: float) -> None:
    if math.sqrt(eps) < 3 * grid.h:
        warnings.warn(f"sqrt(eps)={math.sqrt(eps):.3g} spans fewer than 3 cells of h={grid.h:.3g}",
                      ResolutionWarning, stacklevel=3)


def solve_state(grid: Grid, mask: NodeMask, eps: float, tol: float = 1e-10, **kw):
    """w - eps Lap w = 0 off the sensors, w = 1 on sensor and outer nodes.

    Only monitored nodes (by default those near Omega) are solved to componentwise
    accuracy. Far-field values can be swamped by round-off, even negative, so fluid
    nodes outside the monitor are floored at W_FLOOR to keep the log transform defined.
    """
    _check_resolution(grid, eps)
    kw.setdefault("monitor", omega_monitor(grid, mask, eps))
    monitor = kw["monitor"]
    w, rep = solve_screened_poisson(LinearProblem(grid, mask, eps), tol=tol, **kw)
    if not rep.converged:
        raise SolverError(f"state solve did not converge: {rep}")
    if monitor is not None:
        far = mask.fluid & ~monitor
        w[far] = np.maximum(w[far], W_FLOOR)
    return w, rep


def adjoint_source(mask: NodeMask, eps: float, p: float, w: np.ndarray) -> np.ndarray:
    fl = mask.fluid
    if np.any(w[fl] <= 0):
        raise SolverError("state is nonpositive at a fluid node")
    wc = np.maximum(w, W_FLOOR)
    root = math.sqrt(eps)
    v = -root * np.log(wc)
    # -d/dw of (-sqrt(eps) log w)^p
    src = (p * root / wc) * v ** (p - 1)
    return np.where(mask.omega_fluid, src, 0.0)


def solve_adjoint(grid: Grid, mask: NodeMask, eps: float, p: float, w: np.ndarray,
                  tol: float = 1e-10, **kw):
    """Adjoint of g = int_Omega v^p, v = -sqrt(eps) log w.

    Solves q - eps Lap q = -j'(w) 1_Omega with j(w) = (-sqrt(eps) log w)^p, that is
    source (p sqrt(eps) / w) v^(p-1) >= 0, and q = 0 on sensor and outer nodes.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    src = adjoint_source(mask, eps, p, w)
    kw.setdefault("monitor", omega_monitor(grid, mask, eps))
    prob = LinearProblem(grid, mask, eps, src, sensor_value=0.0, outer_value=0.0)
    q, rep = solve_screened_poisson(prob, tol=tol, **kw)
    if not rep.converged:
        raise SolverError(f"adjoint solve did not converge: {rep}")
    return q, rep
