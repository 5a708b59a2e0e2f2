"""Convex polyhedra as bounded halfspace systems with cached vertex data.

Halfspaces are the authoritative representation (rows ``[nx, ny, nz, b]``
meaning ``n . x <= b`` with unit normals).  Vertices, edges and the bounding
box are derived once per polyhedron and cached, since boolean operations need
halfspaces while hulls, volumes and distances need vertices.

All objects are immutable after construction; every operation returns fresh
objects and is safe to call concurrently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

TAU_GEOM = 1e-6


class GeometryError(ValueError):
    """Raised when an operation's geometric preconditions are violated."""


@dataclass(frozen=True)
class ToleranceConfig:
    """Numeric tolerances: rho for curved-region approximation, tau_geom for halfspace tests."""

    rho: float = 10.0
    tau_geom: float = TAU_GEOM

    def __post_init__(self):
        if not self.rho > 0:
            raise GeometryError(f"rho must be positive, got {self.rho}")
        if not 0 < self.tau_geom < self.rho:
            raise GeometryError(
                f"tau_geom must satisfy 0 < tau_geom < rho, got {self.tau_geom}"
            )


def _unit_rows(hs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(hs[:, :3], axis=1)
    good = norms > 1e-12
    out = hs[good].copy()
    out /= norms[good, None]
    return out


def _dedupe_points(pts: np.ndarray, tol: float) -> np.ndarray:
    """Grid-round dedupe of near-coincident points (hulls tolerate stragglers)."""
    if len(pts) == 0:
        return pts
    _, idx = np.unique(np.round(pts / tol).astype(np.int64), axis=0, return_index=True)
    return pts[np.sort(idx)]


def _dedupe_halfspaces(hs: np.ndarray, tol: float) -> np.ndarray:
    """Drop repeated halfspace rows (e.g. qhull's coplanar facet triangles)."""
    key = np.round(hs / max(tol * 1e-3, 1e-12)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return hs[np.sort(idx)]


class ConvexPolyhedron:
    """Bounded convex region ``{x : n_i . x <= b_i}`` with cached derived data."""

    __slots__ = ("halfspaces", "vertices", "bbox", "_edges", "_hull_volume", "_is_box")

    def __init__(self, halfspaces: np.ndarray, vertices: np.ndarray, edges: np.ndarray | None = None):
        self.halfspaces = np.asarray(halfspaces, dtype=float)
        self.halfspaces.setflags(write=False)
        self.vertices = np.asarray(vertices, dtype=float)
        self.vertices.setflags(write=False)
        self.bbox = np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])
        self.bbox.setflags(write=False)
        self._edges = edges
        self._hull_volume = None
        n = self.halfspaces[:, :3]
        self._is_box = len(n) == 6 and bool(
            np.all(np.isclose(np.abs(n).max(axis=1), 1.0))
            and np.all(np.count_nonzero(np.abs(n) > 1e-12, axis=1) == 1)
        )

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_vertices(points: np.ndarray, tol: float = TAU_GEOM) -> "ConvexPolyhedron | None":
        """Build from a point cloud; returns None if the hull is degenerate."""
        points = np.asarray(points, dtype=float)
        if len(points) < 4:
            return None
        try:
            hull = ConvexHull(points)
        except (QhullError, ValueError):
            return None
        return ConvexPolyhedron._from_hull(hull, points, tol)

    @staticmethod
    def _from_hull(hull, points: np.ndarray, tol: float) -> "ConvexPolyhedron | None":
        if hull.volume <= (tol ** 3):
            return None
        verts = points[hull.vertices]
        nv = len(hull.vertices)
        remap = np.full(len(points), -1, dtype=np.int64)
        remap[hull.vertices] = np.arange(nv)
        simp = remap[hull.simplices]
        e = np.concatenate([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [0, 2]]])
        keys = np.unique(e.min(axis=1) * nv + e.max(axis=1))
        edges = np.column_stack([keys // nv, keys % nv])
        eqs = hull.equations  # unit rows [n | -b], coplanar triangles repeat them
        if len(eqs) > 24:
            # dedupe coplanar triangle repeats only when it pays off
            key = np.round(eqs * 1e9).astype(np.int64)
            _, idx = np.unique(key, axis=0, return_index=True)
            eqs = eqs[np.sort(idx)]
        hs = np.column_stack([eqs[:, :3], -eqs[:, 3]])
        poly = ConvexPolyhedron(hs, verts, edges)
        poly._hull_volume = float(hull.volume)
        return poly

    def canonical_sorted(self) -> "ConvexPolyhedron":
        """Copy with snapped, deduplicated, lexicographically ordered rows
        (the stable form used for serialization fixpoints)."""
        hs = self.halfspaces.copy()
        key = np.round(hs * 1e9).astype(np.int64)
        _, idx = np.unique(key, axis=0, return_index=True)
        hs = hs[np.sort(idx)]
        hs[np.abs(hs) < 1e-12] = 0.0
        hs = hs[np.lexsort(hs.T[::-1])]
        out = ConvexPolyhedron(hs, self.vertices, self._edges)
        out._hull_volume = self._hull_volume
        return out

    @staticmethod
    def from_halfspaces(
        halfspaces: np.ndarray, tol: float = TAU_GEOM
    ) -> "ConvexPolyhedron | None":
        """Canonicalize a raw halfspace system.

        Returns None for empty or lower-dimensional feasible sets; raises
        GeometryError if the region is unbounded.
        """
        hs = _unit_rows(np.asarray(halfspaces, dtype=float))
        if len(hs) < 4:
            raise GeometryError("halfspace system cannot be bounded with < 4 rows")
        hs = _dedupe_halfspaces(hs, tol)
        center, radius = chebyshev_center(hs)
        if center is None or radius <= tol:
            return None
        try:
            with np.errstate(divide="ignore", invalid="ignore"):
                hsi = HalfspaceIntersection(
                    np.column_stack([hs[:, :3], -hs[:, 3]]), center
                )
        except (QhullError, ValueError) as exc:
            if "unbounded" in str(exc).lower() or "feasible point" in str(exc).lower():
                raise GeometryError(f"halfspace system appears unbounded: {exc}")
            return None
        verts = hsi.intersections
        if not np.all(np.isfinite(verts)):
            raise GeometryError("halfspace system is unbounded")
        verts = _dedupe_points(verts, tol)
        poly = ConvexPolyhedron.from_vertices(verts, tol)
        return poly.canonical_sorted() if poly is not None else None

    _BOX_EDGES = np.array(
        [[0, 1], [0, 2], [0, 4], [1, 3], [1, 5], [2, 3], [2, 6],
         [3, 7], [4, 5], [4, 6], [5, 7], [6, 7]]
    )

    @staticmethod
    def box(lo, hi) -> "ConvexPolyhedron":
        """Axis-aligned box [lo, hi]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(hi <= lo):
            raise GeometryError(f"degenerate box: lo={lo}, hi={hi}")
        eye = np.eye(3)
        hs = np.vstack(
            [np.column_stack([eye, hi]), np.column_stack([-eye, -lo])]
        )
        corners = np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )
        return ConvexPolyhedron(hs, corners, ConvexPolyhedron._BOX_EDGES)

    # -- basic queries ------------------------------------------------------

    def contains(self, points: np.ndarray, tol: float = TAU_GEOM) -> np.ndarray:
        """Vectorized membership test: True where all halfspaces hold within tol."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        slack = pts @ self.halfspaces[:, :3].T - self.halfspaces[:, 3]
        return np.all(slack <= tol, axis=1)

    def support(self, directions: np.ndarray) -> np.ndarray:
        """Support function h(d) = max_{x in P} d . x over rows of `directions`."""
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        return (d @ self.vertices.T).max(axis=1)

    @property
    def volume(self) -> float:
        if self._hull_volume is None:
            self._hull_volume = float(ConvexHull(self.vertices).volume)
        return self._hull_volume

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def edges(self) -> np.ndarray:
        """Unique vertex-index pairs forming hull edges (superset incl. coplanar diagonals)."""
        if self._edges is None:
            hull = ConvexHull(self.vertices)
            simp = hull.simplices
            pairs = np.vstack([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [0, 2]]])
            pairs.sort(axis=1)
            self._edges = np.unique(pairs, axis=0)
        return self._edges

    # -- clipping (the workhorse for intersections) --------------------------

    def clip(self, normal: np.ndarray, offset: float, tol: float = TAU_GEOM) -> "ConvexPolyhedron | None":
        """Intersect with halfspace ``normal . x <= offset``; None when emptied."""
        n = np.asarray(normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn <= 1e-12:
            return self
        n = n / nn
        b = float(offset) / nn
        s = self.vertices @ n - b
        if np.all(s <= tol):
            return self
        if np.all(s >= -tol):
            return None
        keep = self.vertices[s <= tol]
        cut_pts = []
        for i, j in self.edges():
            si, sj = s[i], s[j]
            if (si > tol and sj < -tol) or (sj > tol and si < -tol):
                t = si / (si - sj)
                cut_pts.append(self.vertices[i] + t * (self.vertices[j] - self.vertices[i]))
        pts = np.vstack([keep] + ([np.array(cut_pts)] if cut_pts else []))
        return ConvexPolyhedron.from_vertices(pts, tol)

    def clip_many(self, halfspaces: np.ndarray, tol: float = TAU_GEOM) -> "ConvexPolyhedron | None":
        """Intersect with many halfspaces, skipping redundant rows cheaply.

        A row excluding every current vertex empties the result; a row
        containing every current vertex is redundant.  Only rows that actually
        cut the vertex set trigger a clip, one at a time.
        """
        rows = np.atleast_2d(np.asarray(halfspaces, dtype=float))
        if rows.size == 0:
            return self
        norms = np.linalg.norm(rows[:, :3], axis=1)
        ok = norms > 1e-12
        rows = rows[ok] / norms[ok, None]
        poly: ConvexPolyhedron = self
        while len(rows):
            slack = poly.vertices @ rows[:, :3].T - rows[:, 3]
            if np.any(np.all(slack > tol, axis=0)):
                return None
            cutting = np.any(slack > tol, axis=0)
            if not cutting.any():
                return poly
            i = int(np.argmax(cutting))
            clipped = poly.clip(rows[i, :3], rows[i, 3], tol)
            if clipped is None:
                return None
            poly = clipped
            rows = np.delete(rows, i, axis=0)
        return poly

    def intersect(self, other: "ConvexPolyhedron", tol: float = TAU_GEOM) -> "ConvexPolyhedron | None":
        if boxes_disjoint(self.bbox, other.bbox, tol):
            return None
        return self.clip_many(other.halfspaces, tol)

    def translate(self, delta: np.ndarray) -> "ConvexPolyhedron":
        delta = np.asarray(delta, dtype=float)
        hs = self.halfspaces.copy()
        hs[:, 3] += hs[:, :3] @ delta
        return ConvexPolyhedron(hs, self.vertices + delta)

    # -- exact distances -----------------------------------------------------

    def distance(self, points: np.ndarray, tol: float = TAU_GEOM) -> np.ndarray:
        """Exact Euclidean distance from each point to the polyhedron (0 inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._is_box:
            nearest = np.clip(pts, self.bbox[0], self.bbox[1])
            return np.linalg.norm(pts - nearest, axis=1)
        slack = pts @ self.halfspaces[:, :3].T - self.halfspaces[:, 3]
        inside = np.all(slack <= tol, axis=1)
        d = np.full(len(pts), np.inf)
        # vertex candidates
        dv = np.linalg.norm(pts[:, None, :] - self.vertices[None, :, :], axis=2)
        d = np.minimum(d, dv.min(axis=1))
        # edge candidates
        e = self.edges()
        if len(e):
            a = self.vertices[e[:, 0]]
            dvec = self.vertices[e[:, 1]] - a
            L2 = (dvec ** 2).sum(axis=1)
            t = ((pts[:, None, :] - a[None, :, :]) * dvec[None, :, :]).sum(axis=2) / L2
            t = np.clip(t, 0.0, 1.0)
            proj = a[None, :, :] + t[:, :, None] * dvec[None, :, :]
            d = np.minimum(d, np.linalg.norm(pts[:, None, :] - proj, axis=2).min(axis=1))
        # face candidates: foot of perpendicular must land on the face
        for i, (nx, ny, nz, b) in enumerate(self.halfspaces):
            nvec = np.array([nx, ny, nz])
            si = slack[:, i]
            foot = pts - si[:, None] * nvec[None, :]
            on_face = np.all(
                foot @ self.halfspaces[:, :3].T - self.halfspaces[:, 3] <= 10 * tol, axis=1
            )
            cand = np.where(on_face & (si > 0), si, np.inf)
            d = np.minimum(d, cand)
        d[inside] = 0.0
        return d


def chebyshev_center(hs: np.ndarray) -> tuple[np.ndarray | None, float]:
    """Largest-inscribed-ball center of ``{n.x <= b}``; (None, 0) when infeasible."""
    A = np.column_stack([hs[:, :3], np.ones(len(hs))])
    c = np.array([0.0, 0.0, 0.0, -1.0])
    res = linprog(
        c, A_ub=A, b_ub=hs[:, 3],
        bounds=[(None, None)] * 3 + [(0, None)],
        method="highs",
    )
    if res.status == 3:  # unbounded radius: fat unbounded region
        raise GeometryError("halfspace system is unbounded")
    if not res.success:
        return None, 0.0
    return res.x[:3], float(res.x[3])


def boxes_disjoint(a: np.ndarray, b: np.ndarray, tol: float = 0.0) -> bool:
    return bool(np.any(a[0] > b[1] + tol) or np.any(b[0] > a[1] + tol))


class PolyUnion:
    """Finite union of nonempty convex polyhedra; membership is the disjunction."""

    __slots__ = ("polys",)

    def __init__(self, polys):
        self.polys = tuple(p for p in polys if p is not None)

    def __iter__(self):
        return iter(self.polys)

    def __len__(self):
        return len(self.polys)

    def __bool__(self):
        return len(self.polys) > 0

    @property
    def bbox(self) -> np.ndarray | None:
        if not self.polys:
            return None
        lo = np.min([p.bbox[0] for p in self.polys], axis=0)
        hi = np.max([p.bbox[1] for p in self.polys], axis=0)
        return np.array([lo, hi])

    def contains(self, points: np.ndarray, tol: float = TAU_GEOM) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=bool)
        for p in self.polys:
            rest = ~out
            if not rest.any():
                break
            sub = pts[rest]
            inbox = np.all((sub >= p.bbox[0] - tol) & (sub <= p.bbox[1] + tol), axis=1)
            if inbox.any():
                hit = np.zeros(inbox.shape, dtype=bool)
                hit[inbox] = p.contains(sub[inbox], tol)
                out[rest.nonzero()[0][hit]] = True
        return out

    @staticmethod
    def from_boxes(boxes) -> "PolyUnion":
        return PolyUnion([ConvexPolyhedron.box(lo, hi) for lo, hi in boxes])


# -- segments ---------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Straight segment between two points (degenerate A == B allowed)."""

    a: np.ndarray
    b: np.ndarray

    def __init__(self, a, b):
        object.__setattr__(self, "a", np.asarray(a, dtype=float))
        object.__setattr__(self, "b", np.asarray(b, dtype=float))


def segments_intersect_poly(
    starts: np.ndarray, ends: np.ndarray, poly: ConvexPolyhedron, tol: float = TAU_GEOM
) -> np.ndarray:
    """Vectorized segment-vs-polyhedron intersection via halfspace clipping."""
    starts = np.atleast_2d(starts)
    ends = np.atleast_2d(ends)
    d = ends - starts
    t_lo = np.zeros(len(starts))
    t_hi = np.ones(len(starts))
    for nx, ny, nz, b in poly.halfspaces:
        n = np.array([nx, ny, nz])
        denom = d @ n
        num = b + tol - starts @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        entering = denom < -1e-15
        leaving = denom > 1e-15
        parallel_out = (np.abs(denom) <= 1e-15) & (num < 0)
        t_lo = np.where(entering, np.maximum(t_lo, t), t_lo)
        t_hi = np.where(leaving, np.minimum(t_hi, t), t_hi)
        t_lo = np.where(parallel_out, 1.0, t_lo)
        t_hi = np.where(parallel_out, 0.0, t_hi)
    return t_lo <= t_hi


def segments_distance_poly(
    starts: np.ndarray, ends: np.ndarray, poly: ConvexPolyhedron, tol: float = TAU_GEOM,
    iters: int = 40,
) -> np.ndarray:
    """Exact-to-precision distance from each segment to a convex polyhedron.

    Distance along the segment parameter is convex, so non-intersecting
    segments are resolved by a coarse bracket followed by golden-section
    search on t, vectorized over the whole batch.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    hit = segments_intersect_poly(starts, ends, poly, tol)
    out = np.zeros(len(starts))
    idx = np.nonzero(~hit)[0]
    if len(idx) == 0:
        return out
    a = starts[idx]
    d = ends[idx] - starts[idx]
    # bracket the convex minimum on a coarse grid
    grid = np.linspace(0.0, 1.0, 9)
    vals = np.stack([poly.distance(a + t * d, tol) for t in grid], axis=1)
    best = np.argmin(vals, axis=1)
    lo = grid[np.maximum(best - 1, 0)]
    hi = grid[np.minimum(best + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    m1 = hi - invphi * (hi - lo)
    m2 = lo + invphi * (hi - lo)
    f1 = poly.distance(a + m1[:, None] * d, tol)
    f2 = poly.distance(a + m2[:, None] * d, tol)
    for _ in range(iters):
        take1 = f1 <= f2
        hi = np.where(take1, m2, hi)
        lo = np.where(take1, lo, m1)
        m1 = hi - invphi * (hi - lo)
        m2 = lo + invphi * (hi - lo)
        f1 = poly.distance(a + m1[:, None] * d, tol)
        f2 = poly.distance(a + m2[:, None] * d, tol)
    t_best = (lo + hi) / 2.0
    out[idx] = poly.distance(a + t_best[:, None] * d, tol)
    return out


def distance_point_region(point: np.ndarray, region: PolyUnion, tol: float = TAU_GEOM) -> float:
    """Min distance from a point to a union of polyhedra; 0 iff the point is inside."""
    if not region:
        raise GeometryError("distance to an empty region is undefined")
    p = np.asarray(point, dtype=float)[None, :]
    return float(min(poly.distance(p, tol)[0] for poly in region))


def distance_segment_region(seg: Segment, region: PolyUnion, tol: float = TAU_GEOM) -> float:
    """Min distance between a segment and a union of polyhedra."""
    if not region:
        raise GeometryError("distance to an empty region is undefined")
    best = math.inf
    for poly in region:
        best = min(best, float(segments_distance_poly(seg.a[None, :], seg.b[None, :], poly, tol)[0]))
        if best == 0.0:
            break
    return best


def angle_at(x, a, b) -> float:
    """Angle at X formed by rays toward A and B, in [0, pi]."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = a - x
    v = b - x
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu <= 1e-12 or nv <= 1e-12:
        raise GeometryError("angle undefined for coincident points")
    c = float(np.dot(u, v) / (nu * nv))
    return math.acos(max(-1.0, min(1.0, c)))


def angles_at(xs: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized angle_at over rows of xs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    u = a[None, :] - xs
    v = b[None, :] - xs
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    denom = np.maximum(nu * nv, 1e-300)
    c = np.clip((u * v).sum(axis=1) / denom, -1.0, 1.0)
    return np.arccos(c)
