"""Uniform Cartesian grid over the enclosing box, node classification and quadrature.

Fields are numpy arrays of shape ``(ny, nx)``: row ``j`` holds the nodes at
``y = y0 + j*h`` and column ``i`` the nodes at ``x = x0 + i*h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geometry import (Box, GeometryError, Placement, Polygon, _crossing_abscissae,
                       _segment_distances)


class ResolutionError(ValueError):
    """The grid is too coarse for the requested geometry."""


class NodeClass(IntEnum):
    FLUID = 0
    SENSOR_DIRICHLET = 1
    OUTER_DIRICHLET = 2


@dataclass(frozen=True)
class Grid:
    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def box(self) -> Box:
        return Box(self.origin, (self.origin[0] + (self.nx - 1) * self.h,
                                 self.origin[1] + (self.ny - 1) * self.h))

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="xy")

    def node(self, i: int, j: int) -> np.ndarray:
        return np.array([self.origin[0] + i * self.h, self.origin[1] + j * self.h])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class NodeMask:
    cls: np.ndarray
    in_omega: np.ndarray

    @property
    def fluid(self) -> np.ndarray:
        return self.cls == NodeClass.FLUID

    @property
    def sensor(self) -> np.ndarray:
        return self.cls == NodeClass.SENSOR_DIRICHLET

    @property
    def outer(self) -> np.ndarray:
        return self.cls == NodeClass.OUTER_DIRICHLET

    @property
    def dirichlet(self) -> np.ndarray:
        return self.cls != NodeClass.FLUID

    @property
    def omega_fluid(self) -> np.ndarray:
        return self.in_omega & (self.cls == NodeClass.FLUID)


def build_grid(box: Box, target_h: float) -> Grid:
    """Isotropic grid covering ``box`` with spacing <= target_h.

    The box is padded symmetrically along the axis whose cell count leaves slack, so
    both axes share one spacing.
    """
    w, hgt = box.width, box.height
    if not target_h > 0 or target_h > min(w, hgt) / 2:
        raise ResolutionError(
            f"target_h={target_h} too coarse for a {w:g} x {hgt:g} box (need <= {min(w, hgt) / 2:g})")
    ncx = max(1, math.ceil(w / target_h - 1e-9))
    ncy = max(1, math.ceil(hgt / target_h - 1e-9))
    h = max(w / ncx, hgt / ncy)
    x0 = box.lo[0] - 0.5 * (ncx * h - w)
    y0 = box.lo[1] - 0.5 * (ncy * h - hgt)
    return Grid((float(x0), float(y0)), float(h), ncx + 1, ncy + 1)


def grid_in_polygon(grid: Grid, poly: Polygon) -> np.ndarray:
    """``point_in_polygon`` evaluated at every node (scanline, same arithmetic)."""
    xs_nodes = grid.x
    inside = np.zeros(grid.shape, dtype=bool)
    for j, y in enumerate(grid.y):
        xs = np.sort(_crossing_abscissae(poly, y))
        if len(xs) == 0:
            continue
        count = len(xs) - np.searchsorted(xs, xs_nodes, side="right")
        inside[j] = count % 2 == 1
    tol = poly.edge_tolerance
    a_all, b_all = poly.edges
    for a, b in zip(a_all, b_all):
        lo = np.minimum(a, b) - tol
        hi = np.maximum(a, b) + tol
        i0 = max(0, math.ceil((lo[0] - grid.origin[0]) / grid.h) - 1)
        i1 = min(grid.nx - 1, math.floor((hi[0] - grid.origin[0]) / grid.h) + 1)
        j0 = max(0, math.ceil((lo[1] - grid.origin[1]) / grid.h) - 1)
        j1 = min(grid.ny - 1, math.floor((hi[1] - grid.origin[1]) / grid.h) + 1)
        if i1 < i0 or j1 < j0:
            continue
        X, Y = np.meshgrid(xs_nodes[i0:i1 + 1], grid.y[j0:j1 + 1], indexing="xy")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        near = _segment_distances(pts, a[None, :], b[None, :])[:, 0] <= tol
        inside[j0:j1 + 1, i0:i1 + 1] |= near.reshape(X.shape)
    return inside


def sensor_nodes(grid: Grid, pl: Placement | None) -> np.ndarray:
    """Nodes inside some closed sensor disk."""
    out = np.zeros(grid.shape, dtype=bool)
    if pl is None:
        return out
    r = pl.radius
    # ties at exactly distance r are decided by this tolerance, not by rounding
    rt = r + 1e-9 * grid.h
    for c in pl.centers:
        i0 = max(0, math.floor((c[0] - rt - grid.origin[0]) / grid.h))
        i1 = min(grid.nx - 1, math.ceil((c[0] + rt - grid.origin[0]) / grid.h))
        j0 = max(0, math.floor((c[1] - rt - grid.origin[1]) / grid.h))
        j1 = min(grid.ny - 1, math.ceil((c[1] + rt - grid.origin[1]) / grid.h))
        dx = grid.x[i0:i1 + 1] - c[0]
        dy = grid.y[j0:j1 + 1] - c[1]
        out[j0:j1 + 1, i0:i1 + 1] |= np.hypot(dx[None, :], dy[:, None]) <= rt
    return out


def classify_nodes(grid: Grid, poly: Polygon, pl: Placement | None,
                   in_omega: np.ndarray | None = None) -> NodeMask:
    """Outer box boundary, sensor disks (closed balls) and the Omega indicator.

    ``in_omega`` may be passed in when it was already computed for the same grid/polygon.
    """
    if pl is not None and pl.radius < 3 * grid.h * (1 - 1e-12):
        raise ResolutionError(f"sensor radius {pl.radius:g} is under-resolved (need >= 3h = {3 * grid.h:g})")
    if in_omega is None:
        in_omega = grid_in_polygon(grid, poly)
    cls = np.full(grid.shape, NodeClass.FLUID, dtype=np.int8)
    cls[sensor_nodes(grid, pl)] = NodeClass.SENSOR_DIRICHLET
    cls[0, :] = cls[-1, :] = cls[:, 0] = cls[:, -1] = NodeClass.OUTER_DIRICHLET
    return NodeMask(cls, in_omega)


def interpolate(field: np.ndarray, grid: Grid, x) -> np.ndarray | float:
    """Bilinear interpolation at point(s) ``x`` of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    fx = (x[..., 0] - grid.origin[0]) / grid.h
    fy = (x[..., 1] - grid.origin[1]) / grid.h
    slack = 1e-9
    if np.any(fx < -slack) or np.any(fx > grid.nx - 1 + slack) or \
            np.any(fy < -slack) or np.any(fy > grid.ny - 1 + slack):
        raise GeometryError("interpolation point outside the grid")
    i = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
    j = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
    tx = fx - i
    ty = fy - j
    out = ((1 - tx) * (1 - ty) * field[j, i] + tx * (1 - ty) * field[j, i + 1]
           + (1 - tx) * ty * field[j + 1, i] + tx * ty * field[j + 1, i + 1])
    return float(out) if out.ndim == 0 else out


def integrate_masked(field: np.ndarray, grid: Grid, mask: NodeMask) -> float:
    """Nodal quadrature h^2 * sum over fluid nodes inside Omega."""
    return float(grid.h ** 2 * np.sum(field[mask.omega_fluid]))


def discrete_gradient(field: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(field, dtype=float)
    gy = np.zeros_like(field, dtype=float)
    gx[1:-1, 1:-1] = (field[1:-1, 2:] - field[1:-1, :-2]) / (2 * grid.h)
    gy[1:-1, 1:-1] = (field[2:, 1:-1] - field[:-2, 1:-1]) / (2 * grid.h)
    return gx, gy


def discrete_laplacian(field: np.ndarray, grid: Grid) -> np.ndarray:
    lap = np.zeros_like(field, dtype=float)
    lap[1:-1, 1:-1] = (field[1:-1, 2:] + field[1:-1, :-2] + field[2:, 1:-1] + field[:-2, 1:-1]
                       - 4 * field[1:-1, 1:-1]) / grid.h ** 2
    return lap
