"""Log transform of the state into an approximate distance field, plus error checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import Placement, Polygon, exact_distance_to_sensors
from .grid import Grid, NodeMask, discrete_gradient, discrete_laplacian
from .solver import W_FLOOR, SolverError


@dataclass(frozen=True)
class DistanceField:
    v: np.ndarray
    eps: float
    grid: Grid | None = None


def log_transform(w: np.ndarray, eps: float, grid: Grid | None = None,
                  mask: NodeMask | None = None) -> DistanceField:
    """v = -sqrt(eps) log(max(w, W_FLOOR)); nodes with w == 1 map to exactly 0."""
    w = np.asarray(w, dtype=float)
    check = w if mask is None else w[mask.fluid]
    if np.any(check <= 0):
        raise SolverError("nonpositive state value at a fluid node")
    v = -math.sqrt(eps) * np.log(np.maximum(w, W_FLOOR)) + 0.0
    return DistanceField(v, eps, grid)


def exact_distance_field(grid: Grid, pl: Placement) -> np.ndarray:
    X, Y = grid.coords()
    return exact_distance_to_sensors(np.stack([X, Y], axis=-1), pl)


def sup_error_vs_exact(v: DistanceField | np.ndarray, pl: Placement, poly: Polygon | None,
                       mask: NodeMask, grid: Grid | None = None) -> float:
    """Max over fluid nodes in Omega of |v - d(., union of sensors)|."""
    if isinstance(v, DistanceField):
        grid = grid or v.grid
        v = v.v
    if grid is None:
        raise ValueError("a grid is needed to locate the nodes")
    sel = mask.omega_fluid
    exact = exact_distance_field(grid, pl)
    return float(np.max(np.abs(v[sel] - exact[sel]))) if sel.any() else 0.0


def retained_nodes(grid: Grid, mask: NodeMask, safety_band: float) -> np.ndarray:
    """Fluid nodes in Omega at distance >= safety_band from every Dirichlet node."""
    dist = ndimage.distance_transform_edt(mask.fluid) * grid.h
    return mask.omega_fluid & (dist >= safety_band * (1 - 1e-12))


def eikonal_residual(v: DistanceField | np.ndarray, grid: Grid, mask: NodeMask, eps: float,
                     safety_band: float | None = None) -> tuple[np.ndarray, float]:
    """R = 1 - |grad_h v|^2 + sqrt(eps) Lap_h v on retained nodes (zero elsewhere)."""
    if isinstance(v, DistanceField):
        v = v.v
    if safety_band is None:
        safety_band = 4 * grid.h
    if safety_band < 3 * grid.h * (1 - 1e-12):
        raise ValueError("safety_band must be at least 3h")
    gx, gy = discrete_gradient(v, grid)
    res = 1.0 - (gx ** 2 + gy ** 2) + math.sqrt(eps) * discrete_laplacian(v, grid)
    keep = retained_nodes(grid, mask, safety_band)
    res = np.where(keep, res, 0.0)
    return res, float(np.max(np.abs(res[keep]))) if keep.any() else 0.0


def fit_rate_constant(eps: float, error: float) -> float:
    """C such that error = C * eps^(1/4)."""
    return error / eps ** 0.25
