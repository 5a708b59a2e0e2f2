"""Certified polyhedral approximations of curved regions.

Every constructor here takes an approximation mode ("under" or "over") and a
tolerance rho, and guarantees

    under(args)  is a subset of  exact region  is a subset of  over(args)

with one-sided Hausdorff error at most rho against the curved surfaces.
Spheres use geodesic icosahedral subdivisions; angle regions are solids of
revolution built from exact circular-arc cross sections, lifted either as a
single convex body (profiles touching the axis across their full extent) or
wedge by wedge.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.spatial import ConvexHull

from .poly import (
    TAU_GEOM,
    ConvexPolyhedron,
    GeometryError,
    PolyUnion,
    boxes_disjoint,
)

# -- geodesic spheres ---------------------------------------------------------

_ICO_PHI = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _ICO_PHI, 0], [1, _ICO_PHI, 0], [-1, -_ICO_PHI, 0], [1, -_ICO_PHI, 0],
        [0, -1, _ICO_PHI], [0, 1, _ICO_PHI], [0, -1, -_ICO_PHI], [0, 1, -_ICO_PHI],
        [_ICO_PHI, 0, -1], [_ICO_PHI, 0, 1], [-_ICO_PHI, 0, -1], [-_ICO_PHI, 0, 1],
    ],
    dtype=float,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


@lru_cache(maxsize=32)
def _unit_sphere_mesh(freq: int) -> tuple[np.ndarray, float]:
    """Unit geodesic sphere at subdivision frequency `freq`.

    Returns (vertices on the unit sphere, d_min), where d_min is the minimum
    distance from the origin to any hull facet plane.  The inscribed mesh has
    Hausdorff error (1 - d_min); the circumscribed dual has (1/d_min - 1).
    """
    base = _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])
    pts = []
    for tri in _ICO_FACES:
        a, b, c = base[tri]
        for i in range(freq + 1):
            for j in range(freq + 1 - i):
                k = freq - i - j
                p = (i * a + j * b + k * c) / freq
                pts.append(p / np.linalg.norm(p))
    pts = np.array(pts)
    _, idx = np.unique(np.round(pts * 1e9).astype(np.int64), axis=0, return_index=True)
    verts = pts[np.sort(idx)]
    hull = ConvexHull(verts)
    d_min = float(np.min(-hull.equations[:, 3]))
    return verts, d_min


def _sphere_freq(r: float, rho: float, mode: str) -> int:
    for freq in range(1, 64):
        _, d_min = _unit_sphere_mesh(freq)
        err = r * (1.0 - d_min) if mode == "under" else r * (1.0 / d_min - 1.0)
        if err <= rho:
            return freq
    raise GeometryError(f"sphere tolerance rho={rho} unattainably small for r={r}")


def sphere_approx(
    center, r: float, mode: str, rho: float, tol: float = TAU_GEOM
) -> ConvexPolyhedron:
    """Geodesic polyhedron inscribed in (under) or circumscribing (over) a ball."""
    if r <= 0:
        raise GeometryError(f"sphere radius must be positive, got {r}")
    if rho <= 0:
        raise GeometryError(f"rho must be positive, got {rho}")
    if mode not in ("under", "over"):
        raise GeometryError(f"unknown sphere mode {mode!r}")
    center = np.asarray(center, dtype=float)
    freq = _sphere_freq(r, rho, mode)
    verts, d_min = _unit_sphere_mesh(freq)
    scale = r if mode == "under" else r / d_min
    poly = ConvexPolyhedron.from_vertices(center + scale * verts, tol)
    if poly is None:
        raise GeometryError("degenerate sphere approximation")
    return poly


def sphere_vertex_count(r: float, rho: float, mode: str = "under") -> int:
    verts, _ = _unit_sphere_mesh(_sphere_freq(r, rho, mode))
    return len(verts)


# -- bloating -----------------------------------------------------------------


def bloat_poly(
    poly: ConvexPolyhedron, beta: float, mode: str, rho: float, tol: float = TAU_GEOM
) -> ConvexPolyhedron:
    """Inflate one polyhedron by distance beta.

    The exact bloating is the hull of radius-beta balls at the vertices; the
    balls are replaced by their geodesic under/over approximations, which the
    convex hull inherits (hulls are 1-Lipschitz in Hausdorff distance).
    """
    if beta < 0:
        raise GeometryError(f"bloat distance must be non-negative, got {beta}")
    if beta == 0:
        return poly
    freq = _sphere_freq(beta, rho, mode)
    verts, d_min = _unit_sphere_mesh(freq)
    scale = beta if mode == "under" else beta / d_min
    pts = (poly.vertices[:, None, :] + scale * verts[None, :, :]).reshape(-1, 3)
    out = ConvexPolyhedron.from_vertices(pts, tol)
    if out is None:
        raise GeometryError("degenerate bloat result")
    return out


def bloat(region: PolyUnion, beta: float, mode: str, rho: float, tol: float = TAU_GEOM) -> PolyUnion:
    """Member-wise bloating of a union (bloating distributes over unions)."""
    if beta < 0:
        raise GeometryError(f"bloat distance must be non-negative, got {beta}")
    if beta == 0:
        return region
    return PolyUnion([bloat_poly(p, beta, mode, rho, tol) for p in region])


# -- projection (shadow) ------------------------------------------------------


def _facet_vertex_incidence(poly: ConvexPolyhedron, tol: float) -> np.ndarray:
    slack = poly.vertices @ poly.halfspaces[:, :3].T - poly.halfspaces[:, 3]
    return np.abs(slack) <= 100 * tol  # (V, F) boolean


def project_poly(
    x: np.ndarray, poly: ConvexPolyhedron, clip: PolyUnion, tol: float = TAU_GEOM
) -> list[ConvexPolyhedron]:
    """Shadow of one convex polyhedron from viewpoint x, clipped.

    The shadow {Y : segment XY meets P} is itself convex: its facets are the
    facets of P facing x plus the planes through x spanned by silhouette
    edges.  Both families are exact, so no under/over split is needed here.
    """
    x = np.asarray(x, dtype=float)
    if bool(poly.contains(x[None, :], tol)[0]) or poly.distance(x[None, :], tol)[0] <= tol:
        return list(clip.polys)
    hs = poly.halfspaces
    sx = hs[:, :3] @ x - hs[:, 3]
    front = sx > tol
    grazing = np.abs(sx) <= tol
    shadow_rows = [hs[i] for i in np.nonzero(front | grazing)[0]]
    inc = _facet_vertex_incidence(poly, tol)
    centroid = poly.centroid
    for i in np.nonzero(front)[0]:
        for j in np.nonzero(~front & ~grazing)[0]:
            shared = np.nonzero(inc[:, i] & inc[:, j])[0]
            if len(shared) < 2:
                continue
            # silhouette edge between front facet i and back facet j
            v1, v2 = poly.vertices[shared[0]], poly.vertices[shared[1]]
            n = np.cross(v1 - x, v2 - x)
            nn = np.linalg.norm(n)
            if nn <= 1e-12:
                continue
            n /= nn
            b = float(n @ x)
            if n @ centroid > b:
                n, b = -n, -b
            shadow_rows.append(np.array([n[0], n[1], n[2], b]))
    shadow = np.array(shadow_rows)
    out = []
    for c in clip:
        piece = c.clip_many(shadow, tol)
        if piece is not None:
            out.append(piece)
    return out


def project(
    x, region: PolyUnion, clip: PolyUnion, mode: str = "over", tol: float = TAU_GEOM
) -> PolyUnion:
    """Projection of x through a union: all Y in clip whose segment to x meets it.

    Shadows of polyhedra are exactly polyhedral, so `mode` does not change the
    result; it is accepted so call sites can thread their approximation
    direction through uniformly.
    """
    del mode
    x = np.asarray(x, dtype=float)
    out: list[ConvexPolyhedron] = []
    for p in region:
        out.extend(project_poly(x, p, clip, tol))
    return PolyUnion(out)


# -- 2D profile polygons -------------------------------------------------------


class Polygon2D:
    """Convex 2D polygon in (u, w) profile coordinates."""

    __slots__ = ("verts",)

    def __init__(self, verts: np.ndarray):
        self.verts = np.asarray(verts, dtype=float)

    @staticmethod
    def from_points(pts: np.ndarray) -> "Polygon2D | None":
        pts = np.asarray(pts, dtype=float)
        if len(pts) < 3:
            return None
        try:
            hull = ConvexHull(pts)
        except Exception:
            return None
        if hull.volume <= 1e-12:  # qhull "volume" of a 2D hull is its area
            return None
        return Polygon2D(pts[hull.vertices])

    def edges(self) -> np.ndarray:
        """Rows [nu, nw, c] with n . p <= c inside, unit outward normals."""
        v = self.verts
        nxt = np.roll(v, -1, axis=0)
        d = nxt - v
        normals = np.column_stack([d[:, 1], -d[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        offs = (normals * v).sum(axis=1)
        c = v.mean(axis=0)
        flip = normals @ c > offs
        normals[flip] *= -1.0
        offs[flip] *= -1.0
        return np.column_stack([normals, offs])

    def contains(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        e = self.edges()
        pts = np.atleast_2d(pts)
        return np.all(pts @ e[:, :2].T - e[:, 2] <= tol, axis=1)

    def clip(self, n: np.ndarray, c: float) -> "Polygon2D | None":
        """Sutherland-Hodgman clip against n . p <= c."""
        out = []
        v = self.verts
        s = v @ n - c
        m = len(v)
        for i in range(m):
            j = (i + 1) % m
            if s[i] <= 0:
                out.append(v[i])
            if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
                t = s[i] / (s[i] - s[j])
                out.append(v[i] + t * (v[j] - v[i]))
        if len(out) < 3:
            return None
        return Polygon2D.from_points(np.array(out))

    def clip_many(self, rows: np.ndarray) -> "Polygon2D | None":
        poly: Polygon2D | None = self
        for nu, nw, c in np.atleast_2d(rows):
            if poly is None:
                return None
            poly = poly.clip(np.array([nu, nw]), c)
        return poly

    def scale_w(self, factor: float) -> "Polygon2D":
        v = self.verts.copy()
        v[:, 1] *= factor
        return Polygon2D(v)

    def intersect(self, other: "Polygon2D") -> "Polygon2D | None":
        return self.clip_many(other.edges())

    def hull_with(self, other: "Polygon2D") -> "Polygon2D":
        merged = Polygon2D.from_points(np.vstack([self.verts, other.verts]))
        if merged is None:
            raise GeometryError("degenerate 2D hull")
        return merged

    @property
    def u_range(self) -> tuple[float, float]:
        return float(self.verts[:, 0].min()), float(self.verts[:, 0].max())

    @property
    def w_max(self) -> float:
        return float(self.verts[:, 1].max())

    def touches_axis_fully(self, tol: float = 1e-9) -> bool:
        """True when the w = 0 contact spans the polygon's whole u extent."""
        v = self.verts
        on_axis = v[np.abs(v[:, 1]) <= tol]
        if len(on_axis) < 2:
            return False
        u0, u1 = self.u_range
        return (
            abs(float(on_axis[:, 0].min()) - u0) <= tol
            and abs(float(on_axis[:, 0].max()) - u1) <= tol
        )


def _tile_polygon(q: Polygon2D, tile: float, w_overlap: float = 0.0) -> list[Polygon2D]:
    """Chop a convex 2D polygon into grid tiles of extent at most `tile`.

    `w_overlap` extends every tile upward so the radial shrink of an under
    lift cannot open seams between radially adjacent tiles.
    """
    u0, u1 = q.u_range
    w1 = q.w_max
    w0 = float(q.verts[:, 1].min())
    nu = max(1, int(math.ceil((u1 - u0) / tile)))
    nw = max(1, int(math.ceil((w1 - w0) / tile)))
    if nu * nw == 1:
        return [q]
    out = []
    for i in range(nu):
        lo_u = u0 + (u1 - u0) * i / nu
        hi_u = u0 + (u1 - u0) * (i + 1) / nu
        strip = q.clip(np.array([1.0, 0.0]), hi_u)
        if strip is not None:
            strip = strip.clip(np.array([-1.0, 0.0]), -lo_u)
        if strip is None:
            continue
        for k in range(nw):
            lo_w = w0 + (w1 - w0) * k / nw
            hi_w = w0 + (w1 - w0) * (k + 1) / nw + w_overlap
            cell = strip.clip(np.array([0.0, 1.0]), hi_w)
            if cell is not None:
                cell = cell.clip(np.array([0.0, -1.0]), -lo_w)
            if cell is not None:
                out.append(cell)
    return out or [q]


def poly2d_diff(a: Polygon2D, b: Polygon2D, prev_dilate: float = 0.0) -> list[Polygon2D]:
    """Fan decomposition of a minus b into convex 2D polygons.

    `prev_dilate` pushes the interior fan boundaries outward so consecutive
    pieces overlap; the region boundary (each piece's own beyond-edge) stays
    exact.  Wedge-lifting shrinks pieces toward their own interior, so the
    overlap keeps the union of lifted pieces free of seams.
    """
    pieces: list[Polygon2D] = []
    prev: list[np.ndarray] = []
    edges = b.edges()
    s = a.verts @ edges[:, :2].T - edges[:, 2]
    if np.any(np.all(s > 1e-12, axis=0)):
        return [a]
    for i, (nu, nw, c) in enumerate(edges):
        if (s[:, i] > 1e-12).any():
            piece: Polygon2D | None = a.clip(np.array([-nu, -nw]), -c)
            if piece is not None and prev:
                piece = piece.clip_many(np.array(prev))
            if piece is not None:
                pieces.append(piece)
        prev.append(np.array([nu, nw, c + prev_dilate]))
    return pieces


# -- solids of revolution -------------------------------------------------------


class RevolutionFrame:
    """Orthonormal frame for solids of revolution about the line through a and b."""

    def __init__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        axis = b - a
        length = float(np.linalg.norm(axis))
        if length <= 1e-12:
            raise GeometryError("revolution axis endpoints coincide")
        self.mid = (a + b) / 2.0
        self.axis = axis / length
        self.half = length / 2.0
        ref = np.array([1.0, 0.0, 0.0])
        if abs(self.axis @ ref) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        self.e1 = np.cross(self.axis, ref)
        self.e1 /= np.linalg.norm(self.e1)
        self.e2 = np.cross(self.axis, self.e1)

    def uw_of(self, pts: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.mid
        u = rel @ self.axis
        w = np.hypot(rel @ self.e1, rel @ self.e2)
        return np.column_stack([u, w])

    def world_of(self, u, w, phi):
        return (
            self.mid
            + u * self.axis
            + w * (math.cos(phi) * self.e1 + math.sin(phi) * self.e2)
        )

    def _dir_range(self, phi0: float, phi1: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate range of cos(phi) e1 + sin(phi) e2 over [phi0, phi1]."""
        los, his = [], []
        for i in range(3):
            amp = math.hypot(self.e1[i], self.e2[i])
            psi = math.atan2(self.e2[i], self.e1[i])
            cands = [phi0, phi1]
            for k in range(-2, 4):
                crit = psi + k * math.pi
                if phi0 <= crit <= phi1:
                    cands.append(crit)
            vals = [math.cos(p - psi) * amp for p in cands]
            los.append(min(vals))
            his.append(max(vals))
        return np.array(los), np.array(his)

    def swept_bbox(
        self, u0: float, u1: float, w_max: float, phi0: float, phi1: float
    ) -> np.ndarray:
        """Conservative bbox of {mid + u axis + w dir(phi)} over the parameter box."""
        d_lo, d_hi = self._dir_range(phi0, phi1)
        ax_lo = np.minimum(u0 * self.axis, u1 * self.axis)
        ax_hi = np.maximum(u0 * self.axis, u1 * self.axis)
        rad_lo = np.minimum(0.0, w_max * d_lo)
        rad_hi = np.maximum(0.0, w_max * d_hi)
        return np.array([self.mid + ax_lo + rad_lo, self.mid + ax_hi + rad_hi])

    def lift_polygon(
        self,
        q: Polygon2D,
        n_rev: int,
        mode: str,
        clip: PolyUnion,
        tol: float = TAU_GEOM,
        tile: float | None = None,
    ) -> list[ConvexPolyhedron]:
        """Lift a convex (u, w) profile into clipped polyhedra.

        Profiles touching the axis across their whole u extent revolve into a
        convex solid and produce one piece per clip member.  Other profiles
        are lifted one angular wedge at a time: within a wedge the radius is
        replaced by the projection onto the wedge bisector, with the profile
        pre-shrunk (under) or pre-grown (over) by the wedge cosine so the
        substitution stays on the safe side.

        `tile` chops the profile into strips of at most that extent before
        the wedge lift, trading piece count for tight bounding boxes (long
        radial wedges otherwise defeat spatial indexing downstream).
        """
        if mode not in ("under", "over"):
            raise GeometryError(f"unknown revolve mode {mode!r}")
        if tile is not None and not q.touches_axis_fully():
            seam = (
                (1.0 - math.cos(math.pi / n_rev)) * q.w_max if mode == "under" else 0.0
            )
            out: list[ConvexPolyhedron] = []
            for piece in _tile_polygon(q, tile, w_overlap=seam):
                out.extend(self.lift_polygon(piece, n_rev, mode, clip, tol, tile=None))
            return out
        dphi = 2.0 * math.pi / n_rev
        u0, u1 = q.u_range
        w_top = q.w_max
        if q.touches_axis_fully():
            full_lo, full_hi = self.swept_bbox(u0, u1, w_top, 0.0, 2.0 * math.pi)
            members = [
                m for m in clip if not boxes_disjoint(np.array([full_lo, full_hi]), m.bbox, tol)
            ]
            if not members:
                return []
            if mode == "under":
                phis = np.arange(n_rev) * dphi
                dirs = np.cos(phis)[:, None] * self.e1 + np.sin(phis)[:, None] * self.e2
                pts = [
                    self.mid + v[0] * self.axis + v[1] * dirs[k]
                    for v in q.verts
                    for k in (range(n_rev) if v[1] > 1e-12 else (0,))
                ]
                body = ConvexPolyhedron.from_vertices(np.array(pts), tol)
                if body is None:
                    return []
                rows = body.halfspaces
            else:
                rows = []
                phis = (np.arange(n_rev) + 0.5) * dphi
                for nu, nw, c in q.edges():
                    if nw < -1e-12:
                        continue  # the w >= 0 edge carries no 3D constraint
                    for phi in phis:
                        e_mid = math.cos(phi) * self.e1 + math.sin(phi) * self.e2
                        n3 = nu * self.axis + nw * e_mid
                        rows.append(np.array([*n3, c + float(n3 @ self.mid)]))
                rows = np.array(rows)
            out = []
            for m in members:
                piece = m.clip_many(rows, tol)
                if piece is not None:
                    out.append(piece)
            return out

        # wedge path
        out = []
        for rows, wedge_bbox in self.wedge_entries(q, n_rev, mode):
            members = [m for m in clip if not boxes_disjoint(wedge_bbox, m.bbox, tol)]
            for m in members:
                piece = m.clip_many(rows, tol)
                if piece is not None:
                    out.append(piece)
        return out

    def wedge_entries(self, q: Polygon2D, n_rev: int, mode: str) -> list:
        """Per-wedge halfspace systems for the revolved profile.

        Returns rows [(halfspace rows, conservative bbox)], one per angular
        wedge, ready to clip any target polyhedron against; the union of the
        clipped results approximates the revolved profile on the `mode` side.
        """
        dphi = 2.0 * math.pi / n_rev
        cos_half = math.cos(dphi / 2.0)
        if mode == "under":
            adj = q.intersect(q.scale_w(cos_half))
        else:
            adj = q.hull_with(q.scale_w(cos_half))
        if adj is None:
            return []
        prof_edges = adj.edges()
        au0, au1 = adj.u_range
        aw = adj.w_max
        out = []
        for k in range(n_rev):
            phi0 = k * dphi
            phi1 = phi0 + dphi
            wedge_bbox = self.swept_bbox(au0, au1, aw, phi0, phi1)
            phi_mid = phi0 + dphi / 2.0
            e_mid = math.cos(phi_mid) * self.e1 + math.sin(phi_mid) * self.e2
            in_lo = -math.sin(phi0) * self.e1 + math.cos(phi0) * self.e2
            in_hi = math.sin(phi1) * self.e1 - math.cos(phi1) * self.e2
            rows = []
            for nvec in (-in_lo, -in_hi):
                rows.append(np.array([*nvec, float(nvec @ self.mid)]))
            for nu, nw, c in prof_edges:
                n3 = nu * self.axis + nw * e_mid
                rows.append(np.array([*n3, c + float(n3 @ self.mid)]))
            out.append((np.array(rows), wedge_bbox))
        return out


# -- angle regions --------------------------------------------------------------


def _angle_disk(half_len: float, theta: float) -> tuple[float, float]:
    """Cross-section circle (center height c, radius R) of {angle >= theta}."""
    c = half_len / math.tan(theta)
    r = half_len / math.sin(theta)
    return c, r


def _arc_samples(theta: float, r: float, budget: float, n_min: int = 8) -> np.ndarray:
    """Circle parameter angles of the w >= 0 arc, dense enough for `budget`."""
    t_b = theta - math.pi / 2.0
    t_a = 1.5 * math.pi - theta
    span = t_a - t_b
    if budget >= r:
        n = n_min
    else:
        step = 2.0 * min(math.acos(max(1.0 - budget / r, 0.0)), math.acos(r / (r + budget)))
        n = max(n_min, int(math.ceil(span / max(step, 1e-6))))
    return np.linspace(t_b, t_a, min(n, 4096) + 1)


def _arc_polygon_under(theta: float, half_len: float, budget: float) -> Polygon2D:
    """Inscribed polygon of the circular segment {w >= 0} n disk((0, c), R)."""
    c, r = _angle_disk(half_len, theta)
    ts = _arc_samples(theta, r, budget)
    pts = np.column_stack([r * np.cos(ts), c + r * np.sin(ts)])
    pts[0] = [half_len, 0.0]
    pts[-1] = [-half_len, 0.0]
    poly = Polygon2D.from_points(pts)
    if poly is None:
        raise GeometryError("degenerate angle cross-section")
    return poly


def _arc_polygon_over(theta: float, half_len: float, budget: float) -> Polygon2D:
    """Circumscribed polygon: tangent lines at arc samples, clipped to w >= 0."""
    c, r = _angle_disk(half_len, theta)
    ts = _arc_samples(theta, r, budget)
    w_top = c + r
    ext = 2.0 * (r + half_len)
    poly: Polygon2D | None = Polygon2D(
        np.array([[-ext, 0.0], [ext, 0.0], [ext, w_top + r], [-ext, w_top + r]])
    )
    for t in ts:
        n = np.array([math.cos(t), math.sin(t)])
        poly = poly.clip(n, r + n[1] * c)
        if poly is None:
            raise GeometryError("degenerate angle cross-section")
    return poly


def _rev_count(w_max: float, budget: float, n_min: int = 16) -> int:
    n = n_min
    while w_max * (1.0 / math.cos(math.pi / n) - 1.0) > budget and n < 4096:
        n += 2
    return n


def revolved_angle_solid(
    a,
    b,
    theta: float,
    clip: PolyUnion,
    mode: str,
    rho: float,
    tol: float = TAU_GEOM,
) -> PolyUnion:
    """Polyhedral approximation of {X in clip : angle AXB >= theta}.

    The solid of revolution of the circular segment over chord AB; convex for
    obtuse theta (single-piece fast paths apply), a spindle with axial
    dimples for acute theta (wedge lift).
    """
    if not (0.0 < theta < math.pi):
        raise GeometryError(f"need 0 < theta < pi, got {theta}")
    if mode not in ("under", "over"):
        raise GeometryError(f"unknown angle mode {mode!r}")
    if not clip:
        return PolyUnion([])
    frame = RevolutionFrame(a, b)
    bb = clip.bbox
    corners = np.array([[x, y, z] for x in bb[:, 0] for y in bb[:, 1] for z in bb[:, 2]])
    uw = frame.uw_of(corners)
    w_clip = float(uw[:, 1].max())
    budget = rho / 2.0
    arc_top = sum(_angle_disk(frame.half, theta))
    n_rev = _rev_count(min(w_clip + 1.0, arc_top + budget), budget)
    seg = (
        _arc_polygon_under(theta, frame.half, budget)
        if mode == "under"
        else _arc_polygon_over(theta, frame.half, budget)
    )
    return PolyUnion(frame.lift_polygon(seg, n_rev, mode, clip, tol))


class LazyBand:
    """Deferred angle-band geometry: per-wedge halfspace systems with bboxes.

    Materializing the band globally yields hundreds of long radial wedges;
    clipping a small target against the few wedges whose bbox it meets stays
    cheap and produces at most a handful of pieces.
    """

    __slots__ = ("rows", "lo", "hi", "bbox", "frame", "seg_min", "seg_max", "ring")

    def __init__(self, entries, frame=None, seg_min=None, seg_max=None, ring=1.0):
        self.rows = [rows for rows, _ in entries]
        if entries:
            self.lo = np.array([b[0] for _, b in entries])
            self.hi = np.array([b[1] for _, b in entries])
            self.bbox = np.array([self.lo.min(axis=0), self.hi.max(axis=0)])
        else:
            self.lo = np.zeros((0, 3))
            self.hi = np.zeros((0, 3))
            self.bbox = None
        self.frame = frame
        self.seg_min = seg_min
        self.seg_max = seg_max
        self.ring = ring  # cos(pi / n_rev): radial slack of the wedge lift

    def clip_to(self, target: ConvexPolyhedron, tol: float = TAU_GEOM) -> list[ConvexPolyhedron]:
        if not self.rows:
            return []
        t_lo, t_hi = target.bbox
        hits = np.nonzero(
            ~(np.any(self.lo > t_hi + tol, axis=1) | np.any(t_lo > self.hi + tol, axis=1))
        )[0]
        out = []
        for i in hits:
            piece = target.clip_many(self.rows[i], tol)
            if piece is not None:
                out.append(piece)
        return out

    def profile_verdict(self, u0, u1, w0, w1) -> str | None:
        """Sound containment verdict for a profile rectangle.

        "covers": every point whose (u, w) profile lies in the rectangle is
        inside the lifted band. "empty": no such point is. None: undecided.
        The rectangle is dilated radially by the wedge-lift slack so both
        verdicts hold for the lifted (not just the exact) band.
        """
        if self.frame is None or self.seg_min is None:
            return None
        eps = 1e-9 * max(1.0, abs(w1))
        lo_w = max(w0 * self.ring - eps, 0.0)
        hi_w = w1 / self.ring + eps
        corners = np.array([[u0, lo_w], [u1, lo_w], [u0, hi_w], [u1, hi_w]])
        in_min = self.seg_min.contains(corners, 1e-9)
        sep_min = _rect_separated(self.seg_min, u0, u1, lo_w, hi_w)
        if self.seg_max is not None:
            in_max = self.seg_max.contains(corners, -1e-9)
            sep_max = _rect_separated(self.seg_max, u0, u1, lo_w, hi_w)
        else:
            in_max = np.zeros(4, dtype=bool)
            sep_max = True
        if in_min.all() and sep_max:
            return "covers"
        if sep_min or in_max.all():
            return "empty"
        return None


def _rect_separated(poly: Polygon2D, u0, u1, w0, w1) -> bool:
    """True when the rectangle provably misses the convex polygon (SAT)."""
    v = poly.verts
    if v[:, 0].max() < u0 or v[:, 0].min() > u1 or v[:, 1].max() < w0 or v[:, 1].min() > w1:
        return True
    corners = np.array([[u0, w0], [u1, w0], [u1, w1], [u0, w1]])
    edges = poly.edges()
    slack = corners @ edges[:, :2].T - edges[:, 2]
    return bool(np.any(np.all(slack > 1e-12, axis=0)))


def angle_band_lazy(
    a,
    b,
    theta_min: float,
    theta_max: float,
    clip_bbox: np.ndarray,
    mode: str,
    rho: float,
) -> LazyBand:
    """Angle-band wedge systems covering the given bbox at tolerance rho.

    The band {theta_min <= angle <= theta_max} is a solid of revolution whose
    cross-section is the theta_min circular segment minus the theta_max one;
    the difference happens in 2D and each convex 2D piece contributes one
    halfspace system per angular wedge.
    """
    if not (0.0 < theta_min < theta_max < math.pi):
        raise GeometryError(
            f"need 0 < theta_min < theta_max < pi, got [{theta_min}, {theta_max}]"
        )
    if mode not in ("under", "over"):
        raise GeometryError(f"unknown angle mode {mode!r}")
    frame = RevolutionFrame(a, b)
    bb = np.asarray(clip_bbox, dtype=float)
    corners = np.array([[x, y, z] for x in bb[:, 0] for y in bb[:, 1] for z in bb[:, 2]])
    uw = frame.uw_of(corners)
    w_clip = float(uw[:, 1].max())
    budget = rho / 2.0
    arc_top = max(
        sum(_angle_disk(frame.half, theta_min)), sum(_angle_disk(frame.half, theta_max))
    )
    n_rev = _rev_count(min(w_clip + 1.0, arc_top + budget), budget)
    seg_min = (
        _arc_polygon_under(theta_min, frame.half, budget)
        if mode == "under"
        else _arc_polygon_over(theta_min, frame.half, budget)
    )
    seg_max = (
        _arc_polygon_over(theta_max, frame.half, budget)
        if mode == "under"
        else _arc_polygon_under(theta_max, frame.half, budget)
    )
    seam = (1.0 - math.cos(math.pi / n_rev)) * (arc_top + budget) if mode == "under" else 0.0
    entries = []
    for q in poly2d_diff(seg_min, seg_max, prev_dilate=seam):
        entries.extend(frame.wedge_entries(q, n_rev, mode))
    return LazyBand(entries, frame, seg_min, seg_max, math.cos(math.pi / n_rev))


def angle_band(
    a,
    b,
    theta_min: float,
    theta_max: float,
    clip: PolyUnion,
    mode: str,
    rho: float,
    tol: float = TAU_GEOM,
) -> PolyUnion:
    """Materialized angle band {theta_min <= angle AXB <= theta_max} within clip."""
    if not clip:
        return PolyUnion([])
    lazy = angle_band_lazy(a, b, theta_min, theta_max, clip.bbox, mode, rho)
    pieces: list[ConvexPolyhedron] = []
    for member in clip:
        pieces.extend(lazy.clip_to(member, tol))
    return PolyUnion(pieces)


def _opposite_mode(mode: str) -> str:
    return "over" if mode == "under" else "under"


def angle_region(
    a,
    b,
    theta_min: float,
    theta_max: float,
    clip: PolyUnion,
    mode: str,
    rho: float,
    tol: float = TAU_GEOM,
) -> PolyUnion:
    """Polyhedral approximation of {X in clip : angle AXB outside [theta_min, theta_max]}.

    The too-shallow part (angle < theta_min) is the complement of the
    theta_min revolution solid; the too-wide part (angle > theta_max) is the
    theta_max solid itself.  Cross sections are circular segments over the
    chord AB, handled exactly up to the polygonal budget.
    """
    if np.allclose(np.asarray(a, float), np.asarray(b, float)):
        raise GeometryError("angle region undefined for coincident sensors")
    if not (0.0 < theta_min < theta_max < math.pi):
        raise GeometryError(
            f"need 0 < theta_min < theta_max < pi, got [{theta_min}, {theta_max}]"
        )
    if mode not in ("under", "over"):
        raise GeometryError(f"unknown angle mode {mode!r}")
    if not clip:
        return PolyUnion([])
    frame = RevolutionFrame(a, b)
    bb = clip.bbox
    corners = np.array([[x, y, z] for x in bb[:, 0] for y in bb[:, 1] for z in bb[:, 2]])
    uw = frame.uw_of(corners)
    u_lo = min(float(uw[:, 0].min()), -frame.half) - 1.0
    u_hi = max(float(uw[:, 0].max()), frame.half) + 1.0
    w_clip = float(uw[:, 1].max())

    budget = rho / 2.0
    # the wedge count only needs to resolve the curved revolution surfaces;
    # flat profile-box edges are pushed outside the clip by a margin instead
    arc_top = max(
        sum(_angle_disk(frame.half, theta_min)), sum(_angle_disk(frame.half, theta_max))
    )
    n_rev = _rev_count(min(w_clip + 1.0, arc_top + budget), budget)
    w_hi = (w_clip + 1.0) / math.cos(math.pi / n_rev) + 1.0

    pieces: list[ConvexPolyhedron] = []

    # region (a): angle < theta_min == profile box minus the theta_min segment
    box_prof = Polygon2D(np.array([[u_lo, 0.0], [u_hi, 0.0], [u_hi, w_hi], [u_lo, w_hi]]))
    seg_min = (
        _arc_polygon_over(theta_min, frame.half, budget)
        if mode == "under"
        else _arc_polygon_under(theta_min, frame.half, budget)
    )
    seam = (1.0 - math.cos(math.pi / n_rev)) * w_hi if mode == "under" else 0.0
    tile = max(float(np.linalg.norm(bb[1] - bb[0])) / 8.0, 4.0 * rho)
    for q in poly2d_diff(box_prof, seg_min, prev_dilate=seam):
        pieces.extend(frame.lift_polygon(q, n_rev, mode, clip, tol, tile=tile))

    # region (b): angle > theta_max == the theta_max revolution solid
    seg_max = (
        _arc_polygon_under(theta_max, frame.half, budget)
        if mode == "under"
        else _arc_polygon_over(theta_max, frame.half, budget)
    )
    seg_max_clipped = seg_max.clip_many(box_prof.edges())
    if seg_max_clipped is not None:
        pieces.extend(frame.lift_polygon(seg_max_clipped, n_rev, mode, clip, tol, tile=tile))
    return PolyUnion(pieces)
