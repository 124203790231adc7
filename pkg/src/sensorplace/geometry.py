"""Polygonal domains, disk sensors and the feasible set of sensor centers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Relative tolerance (times the polygon diameter) under which a point counts as on an edge.
EDGE_RTOL = 1e-12
# Slack used by the repair steps so repaired placements pass the strict feasibility test.
_REPAIR_SLACK = 1e-12


class GeometryError(ValueError):
    """Raised for invalid polygons, boxes or placements."""


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 * o2 < 0 and o3 * o4 < 0


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from ``points`` (P, 2) to every segment ``a[k]-b[k]``; returns (P, K)."""
    d = b - a
    len2 = np.einsum("kj,kj->k", d, d)
    rel = points[:, None, :] - a[None, :, :]
    t = np.einsum("pkj,kj->pk", rel, d) / np.where(len2 > 0, len2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * d[None, :, :]
    return np.hypot(points[:, None, 0] - closest[..., 0], points[:, None, 1] - closest[..., 1])


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given by a closed loop of vertices, stored counterclockwise."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("vertices must be an (n, 2) array")
        if len(v) > 3 and np.allclose(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise GeometryError(f"a polygon needs at least 3 vertices, got {len(v)}")
        if np.any(np.all(v == np.roll(v, -1, axis=0), axis=1)):
            raise GeometryError("consecutive vertices must differ")
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area == 0:
            raise GeometryError("polygon has zero area")
        if area < 0:
            v = v[::-1].copy()
        n = len(v)
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise GeometryError(f"polygon is self-intersecting (edges {i} and {j})")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def diameter(self) -> float:
        return polygon_diameter(self)

    @property
    def edge_tolerance(self) -> float:
        return EDGE_RTOL * self.diameter


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))


@dataclass(frozen=True)
class Placement:
    """N sensor centers sharing one radius."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.centers, dtype=float).reshape(-1, 2)
        if len(c) == 0:
            raise GeometryError("a placement needs at least one sensor")
        if not self.radius > 0:
            raise GeometryError("sensor radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return len(self.centers)

    @property
    def balls(self) -> list[Ball]:
        return [Ball(c, self.radius) for c in self.centers]

    def moved(self, centers) -> "Placement":
        return Placement(centers, self.radius)

    def key(self) -> bytes:
        return self.centers.tobytes() + np.float64(self.radius).tobytes()


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(2)
        hi = np.asarray(self.hi, dtype=float).reshape(2)
        if not np.all(hi > lo):
            raise GeometryError("box upper corner must exceed lower corner")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return float(self.hi[0] - self.lo[0])

    @property
    def height(self) -> float:
        return float(self.hi[1] - self.lo[1])


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> Polygon:
    """Regular n-gon inscribed in the circle of given radius (used to polygonize disks)."""
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    v = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center, dtype=float)
    return Polygon(v)


def load_polygon(path) -> Polygon:
    """Read a polygon from a plain ``x y`` vertex file or a GeoJSON-style file (first ring)."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if data.get("type") == "FeatureCollection":
            data = data["features"][0]
        if data.get("type") == "Feature":
            data = data["geometry"]
        coords = data["coordinates"]
        if data.get("type") == "MultiPolygon":
            coords = coords[0]
        return Polygon(np.asarray(coords[0], dtype=float))
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise GeometryError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        rows.append([float(parts[0]), float(parts[1])])
    return Polygon(np.asarray(rows))


def save_polygon(poly: Polygon, path) -> None:
    Path(path).write_text("".join(f"{float(x)!r} {float(y)!r}\n" for x, y in poly.vertices))


def _crossing_abscissae(poly: Polygon, y: float) -> np.ndarray:
    """x-coordinates where the horizontal line at ``y`` crosses edges (half-open rule)."""
    a, b = poly.edges
    hit = (a[:, 1] > y) != (b[:, 1] > y)
    a, b = a[hit], b[hit]
    return a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])


def point_in_polygon(poly: Polygon, x) -> bool:
    """Closed inside test: boundary points (within the edge tolerance) count as inside."""
    x = np.asarray(x, dtype=float).reshape(2)
    a, b = poly.edges
    if _segment_distances(x[None, :], a, b).min() <= poly.edge_tolerance:
        return True
    xs = _crossing_abscissae(poly, x[1])
    return bool(np.count_nonzero(xs > x[0]) % 2)


def points_in_polygon(poly: Polygon, pts) -> np.ndarray:
    """Vectorized :func:`point_in_polygon` for an (P, 2) array."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    a, b = poly.edges
    out = np.empty(len(pts), dtype=bool)
    tol = poly.edge_tolerance
    for start in range(0, len(pts), 4096):
        p = pts[start:start + 4096]
        near = _segment_distances(p, a, b).min(axis=1) <= tol
        hit = (a[None, :, 1] > p[:, None, 1]) != (b[None, :, 1] > p[:, None, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = a[None, :, 0] + (p[:, None, 1] - a[None, :, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        count = np.count_nonzero(hit & (xs > p[:, None, 0]), axis=1)
        out[start:start + 4096] = near | (count % 2 == 1)
    return out


def _nearest_on_boundary(poly: Polygon, x: np.ndarray) -> tuple[np.ndarray, int, float]:
    a, b = poly.edges
    d = b - a
    len2 = np.einsum("kj,kj->k", d, d)
    t = np.clip(((x - a) * d).sum(axis=1) / len2, 0.0, 1.0)
    closest = a + t[:, None] * d
    dist = np.hypot(*(x - closest).T)
    k = int(np.argmin(dist))
    return closest[k], k, float(dist[k])


def signed_distance_polygon(poly: Polygon, x) -> float:
    """Negative inside, positive outside; magnitude is the distance to the boundary."""
    x = np.asarray(x, dtype=float).reshape(2)
    _, _, dist = _nearest_on_boundary(poly, x)
    if dist <= poly.edge_tolerance:
        return 0.0
    return -dist if point_in_polygon(poly, x) else dist


def signed_distances(poly: Polygon, pts) -> np.ndarray:
    """Vectorized :func:`signed_distance_polygon` (may differ from it by round-off)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    a, b = poly.edges
    dist = np.concatenate([_segment_distances(pts[s:s + 4096], a, b).min(axis=1)
                           for s in range(0, len(pts), 4096)]) if len(pts) else np.zeros(0)
    sign = np.where(points_in_polygon(poly, pts), -1.0, 1.0)
    return np.where(dist <= poly.edge_tolerance, 0.0, sign * dist)


def _signed_distance_and_gradient(poly: Polygon, x: np.ndarray) -> tuple[float, np.ndarray]:
    p, k, dist = _nearest_on_boundary(poly, x)
    inside = point_in_polygon(poly, x)
    if dist <= poly.edge_tolerance:
        a, b = poly.vertices[k], poly.vertices[(k + 1) % poly.n_vertices]
        e = (b - a) / np.hypot(*(b - a))
        # outward normal of a counterclockwise edge
        return 0.0, np.array([e[1], -e[0]])
    g = (x - p) / dist
    return (-dist, -g) if inside else (dist, g)


def polygon_diameter(poly: Polygon) -> float:
    v = poly.vertices
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


def compute_box(poly: Polygon) -> Box:
    """Bounding box of ``poly`` inflated by its diameter on every side."""
    if not isinstance(poly, Polygon):
        poly = Polygon(poly)
    lo, hi = poly.bbox
    m = poly.diameter
    return Box(lo - m, hi + m)


def exact_distance_to_sensors(x, pl: Placement):
    """Euclidean distance from ``x`` (shape (..., 2)) to the union of the sensor disks."""
    x = np.asarray(x, dtype=float)
    d = np.full(x.shape[:-1], np.inf)
    for c in pl.centers:
        d = np.minimum(d, np.hypot(x[..., 0] - c[0], x[..., 1] - c[1]))
    d = np.maximum(d - pl.radius, 0.0)
    return float(d) if d.ndim == 0 else d


def _min_pair_distance(centers: np.ndarray) -> float:
    if len(centers) < 2:
        return np.inf
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    dist[np.diag_indices(len(centers))] = np.inf
    return float(dist.min())


def is_feasible(pl: Placement, poly: Polygon, pair_distance: float | None = None) -> bool:
    """Pairwise separation 2r (or ``pair_distance``) and wall clearance r for every center."""
    r = pl.radius
    sep = 2 * r if pair_distance is None else pair_distance
    if _min_pair_distance(pl.centers) < sep * (1 - EDGE_RTOL):
        return False
    for c in pl.centers:
        if not point_in_polygon(poly, c):
            return False
        if -signed_distance_polygon(poly, c) < r * (1 - EDGE_RTOL):
            return False
    return True


@dataclass(frozen=True)
class ProjectionResult:
    placement: Placement
    feasible: bool
    sweeps: int = 0


def _push_inside(poly: Polygon, x: np.ndarray, r: float, max_steps: int = 50) -> np.ndarray:
    target = r * (1 + _REPAIR_SLACK)
    for _ in range(max_steps):
        s, g = _signed_distance_and_gradient(poly, x)
        if s <= -r:
            break
        x = x - (s + target) * g
    return x


def project_feasible(pl: Placement, poly: Polygon, max_sweeps: int = 50,
                     pair_distance: float | None = None) -> ProjectionResult:
    """Repair a placement towards the feasible set by alternating pair and wall sweeps.

    Violating pairs are pushed apart symmetrically about their midpoint (along +x when the
    centers coincide); centers closer than r to the boundary walk along the negative
    signed-distance gradient onto the inward r-offset. This is a heuristic repair, not an
    exact Euclidean projection.
    """
    sep = 2 * pl.radius if pair_distance is None else pair_distance
    if is_feasible(pl, poly, sep):
        return ProjectionResult(pl, True, 0)
    x = np.array(pl.centers)
    r = pl.radius
    for sweep in range(1, max_sweeps + 1):
        for i in range(len(x)):
            for j in range(i + 1, len(x)):
                d = x[j] - x[i]
                dist = np.hypot(*d)
                if dist >= sep:
                    continue
                u = d / dist if dist > 0 else np.array([1.0, 0.0])
                mid = 0.5 * (x[i] + x[j])
                half = 0.5 * sep * (1 + _REPAIR_SLACK)
                x[i], x[j] = mid - half * u, mid + half * u
        for i in range(len(x)):
            if signed_distance_polygon(poly, x[i]) > -r or not point_in_polygon(poly, x[i]):
                x[i] = _push_inside(poly, x[i], r)
        out = pl.moved(x)
        if is_feasible(out, poly, sep):
            return ProjectionResult(out, True, sweep)
    return ProjectionResult(pl.moved(x), False, max_sweeps)
