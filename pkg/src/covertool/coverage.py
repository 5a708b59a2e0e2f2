"""Point-coverage oracles, constraint evaluation, and closed-form uncovered regions.

A point is covered at quality q by a sensor pair when it is in range of both,
both lines of sight clear every obstacle by more than the Fresnel radius, and
the triangulation angle lies in the quality's band.  The fault-tolerant
uncovered region unions, over fault sets F, the intersection over surviving
pairs of per-pair uncovered regions; this module computes both the exact
pointwise oracles and certified polyhedral under/over approximations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .geom.curved import angle_band, angle_region, bloat, project, sphere_approx
from .geom.ops import bool_diff, poly_diff
from .geom.poly import (
    TAU_GEOM,
    ConvexPolyhedron,
    GeometryError,
    PolyUnion,
    angles_at,
    boxes_disjoint,
    segments_distance_poly,
)
from .index import IndexedUnion, iuop_create, iuop_diff, simplify
from .scenario import Deployment, Scenario


# -- exact pointwise geometry ----------------------------------------------------


class DeploymentGeometry:
    """Per-deployment cache of the exact quantities behind the coverage test.

    Distances are computed once per (sensor, point batch) and shared across
    quality levels and sensor pairs.
    """

    def __init__(self, d: Deployment, sc: Scenario, tol: float = TAU_GEOM):
        self.sc = sc
        self.tol = tol
        self.ids = [s.id for s in sc.sensors if s.id in d.positions]
        self.specs = [sc.sensor(sid) for sid in self.ids]
        self.pos = np.array([d.positions[sid] for sid in self.ids]) if self.ids else np.zeros((0, 3))
        self.pairs = list(combinations(range(len(self.ids)), 2))

    def eligible_pairs(self, q: str) -> list[int]:
        """Pairs close enough to possibly triangulate anywhere at level q."""
        out = []
        for pi, (i, j) in enumerate(self.pairs):
            reach = self.specs[i].range_for(q) + self.specs[j].range_for(q)
            if np.linalg.norm(self.pos[i] - self.pos[j]) < reach:
                out.append(pi)
        return out

    def point_distances(self, pts: np.ndarray) -> np.ndarray:
        """(N, S) Euclidean distances from each point to each sensor."""
        return np.linalg.norm(pts[:, None, :] - self.pos[None, :, :], axis=2)

    def max_ranges(self) -> np.ndarray:
        return np.array(
            [max(s.range_for(q) for q in self.sc.quality_ids) for s in self.specs]
        )

    def sight_clearances(self, pts: np.ndarray, need: np.ndarray | None = None) -> np.ndarray:
        """(N, S) min distance from each sight segment to any obstacle.

        Entries where `need` is False are skipped (reported +inf); the
        coverage logic never reads them because the range test already fails.
        """
        n = len(pts)
        out = np.full((n, len(self.ids)), np.inf)
        for si in range(len(self.ids)):
            rows = np.nonzero(need[:, si])[0] if need is not None else np.arange(n)
            if len(rows) == 0:
                continue
            sub = pts[rows]
            ends = np.repeat(self.pos[si][None, :], len(rows), axis=0)
            acc = np.full(len(rows), np.inf)
            for poly in self.sc.obstacles:
                acc = np.minimum(acc, segments_distance_poly(sub, ends, poly, self.tol))
            out[rows, si] = acc
        return out

    def pair_cover(self, pts: np.ndarray, q: str,
                   dists: np.ndarray | None = None,
                   clear: np.ndarray | None = None) -> np.ndarray:
        """(N, n_pairs) exact per-pair coverage at quality q."""
        pts = np.atleast_2d(pts)
        if dists is None:
            dists = self.point_distances(pts)
        if clear is None:
            clear = self.sight_clearances(pts)
        ql = self.sc.quality(q)
        n = len(pts)
        out = np.zeros((n, len(self.pairs)), dtype=bool)
        for pi, (i, j) in enumerate(self.pairs):
            in_range = (dists[:, i] <= self.specs[i].range_for(q)) & (
                dists[:, j] <= self.specs[j].range_for(q)
            )
            if not in_range.any():
                continue
            sight = (clear[:, i] > self.specs[i].fresnel_for(q)) & (
                clear[:, j] > self.specs[j].fresnel_for(q)
            )
            ang = angles_at(pts, self.pos[i], self.pos[j])
            ok_ang = (ang >= ql.theta_min) & (ang <= ql.theta_max)
            out[:, pi] = in_range & sight & ok_ang
        return out

    def fault_masks(self, j: int) -> list[np.ndarray]:
        """Surviving-pair boolean masks for every fault set of size min(j, S)."""
        size = min(j, len(self.ids))
        masks = []
        for faulty in combinations(range(len(self.ids)), size):
            fs = set(faulty)
            masks.append(
                np.array([i not in fs and jj not in fs for (i, jj) in self.pairs], dtype=bool)
            )
        return masks


def cover_jq_batch(
    pts: np.ndarray, d: Deployment, sc: Scenario, js, qs, tol: float = TAU_GEOM,
    geom: DeploymentGeometry | None = None,
) -> dict:
    """Exact fault-tolerant coverage bits per (j, q) at many points.

    Points inside obstacles count as covered (they cannot host a drone).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    geom = geom or DeploymentGeometry(d, sc, tol)
    in_obstacle = sc.obstacles.contains(pts, tol) if len(sc.obstacles) else np.zeros(len(pts), bool)
    dists = geom.point_distances(pts) if geom.ids else None
    clear = (
        geom.sight_clearances(pts, need=dists <= geom.max_ranges()[None, :])
        if geom.ids
        else None
    )
    out = {}
    for q in qs:
        pair_ok = (
            geom.pair_cover(pts, q, dists, clear)
            if geom.ids
            else np.zeros((len(pts), 0), dtype=bool)
        )
        for j in js:
            covered = np.ones(len(pts), dtype=bool)
            for mask in geom.fault_masks(j):
                covered &= pair_ok[:, mask].any(axis=1) if mask.any() else np.zeros(len(pts), bool)
            out[(j, q)] = (covered | in_obstacle).astype(np.int8)
    return out


def point_q_cover(x, s1: str, s2: str, q: str, d: Deployment, sc: Scenario,
                  tol: float = TAU_GEOM) -> bool:
    """Exact two-sensor coverage test at one point (range, sight, angle)."""
    x = np.asarray(x, dtype=float)
    if s1 == s2:
        raise GeometryError("coverage requires two distinct sensors")
    if not sc.roi.contains(x[None, :], tol)[0]:
        raise GeometryError("point outside the region of interest")
    if len(sc.obstacles) and sc.obstacles.contains(x[None, :], tol)[0]:
        raise GeometryError("point inside an obstacle")
    geom = DeploymentGeometry(d, sc, tol)
    i = geom.ids.index(s1)
    j = geom.ids.index(s2)
    mask = geom.pair_cover(x[None, :], q)
    pi = geom.pairs.index((min(i, j), max(i, j)))
    return bool(mask[0, pi])


def cover_jq(x, j: int, q: str, d: Deployment, sc: Scenario, tol: float = TAU_GEOM) -> int:
    """Fault-tolerant coverage bit at one point (obstacle points count covered)."""
    return int(cover_jq_batch(np.asarray(x, float)[None, :], d, sc, [j], [q], tol)[(j, q)][0])


def uncovered_exact_batch(
    pts: np.ndarray, d: Deployment, sc: Scenario, js, qs, tol: float = TAU_GEOM,
    geom: DeploymentGeometry | None = None,
) -> dict:
    """Exact membership in the geometric uncovered-region formula.

    Evaluates, pointwise and without polyhedral approximation, the union over
    fault sets of the intersection over surviving pairs of the per-pair
    uncovered sets (out-of-range, obstructed sight, bad angle), minus
    obstacles.  Used as the structural mirror of :func:`cover_jq_batch`.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    geom = geom or DeploymentGeometry(d, sc, tol)
    in_roi = sc.roi.contains(pts, tol)
    in_obstacle = sc.obstacles.contains(pts, tol) if len(sc.obstacles) else np.zeros(len(pts), bool)
    dists = geom.point_distances(pts) if geom.ids else None
    clear = (
        geom.sight_clearances(pts, need=dists <= geom.max_ranges()[None, :])
        if geom.ids
        else None
    )
    out = {}
    for q in qs:
        ql = sc.quality(q)
        n_pairs = len(geom.pairs)
        u_pair = np.ones((len(pts), n_pairs), dtype=bool)
        for pi, (i, jj) in enumerate(geom.pairs):
            u_range = (dists[:, i] > geom.specs[i].range_for(q)) | (
                dists[:, jj] > geom.specs[jj].range_for(q)
            )
            u_obst = (clear[:, i] <= geom.specs[i].fresnel_for(q)) | (
                clear[:, jj] <= geom.specs[jj].fresnel_for(q)
            )
            ang = angles_at(pts, geom.pos[i], geom.pos[jj])
            u_ang = (ang < ql.theta_min) | (ang > ql.theta_max)
            u_pair[:, pi] = u_range | u_obst | u_ang
        for j in js:
            uncov = np.zeros(len(pts), dtype=bool)
            for mask in geom.fault_masks(j):
                if mask.any():
                    uncov |= u_pair[:, mask].all(axis=1)
                else:
                    uncov |= np.ones(len(pts), dtype=bool)
            out[(j, q)] = uncov & in_roi & ~in_obstacle
    return out


# -- constraint evaluation --------------------------------------------------------


@dataclass(frozen=True)
class SensorConstraints:
    obstacle: float
    admissible: float
    isolation: float

    @property
    def values(self) -> tuple:
        return (self.obstacle, self.admissible, self.isolation)


@dataclass(frozen=True)
class ConstraintReport:
    """Signed constraint values per sensor: positive = violated by that much."""

    per_sensor: dict

    @property
    def max_violation(self) -> float:
        vals = [v for c in self.per_sensor.values() for v in c.values]
        return max(vals) if vals else 0.0

    @property
    def feasible(self) -> bool:
        return self.max_violation <= 0.0

    def flat(self) -> list[float]:
        return [v for _, c in sorted(self.per_sensor.items()) for v in c.values]


class _ComplementCache:
    """Polyhedral complements used by robustness distances, cached per scenario."""

    def __init__(self, sc: Scenario, tol: float = TAU_GEOM):
        self.sc = sc
        self.tol = tol
        self._adm: dict = {}

    def admissible_complement(self, sid: str) -> PolyUnion:
        if sid not in self._adm:
            spec = self.sc.sensor(sid)
            lo, hi = self.sc.bbox
            margin = 0.05 * float(np.max(hi - lo)) + 1.0
            box = PolyUnion([ConvexPolyhedron.box(lo - margin, hi + margin)])
            self._adm[sid] = bool_diff(box, spec.admissible, "over", self.tol)
        return self._adm[sid]


def eval_constraints(
    d: Deployment, sc: Scenario, tol: float = TAU_GEOM, cache: _ComplementCache | None = None
) -> ConstraintReport:
    """Signed placement constraints at the lowest quality level.

    Obstacle clearance uses the exact identity dist(p, bloat(O, f)) =
    dist(p, O) - f; the violated-side magnitude is the single-obstacle escape
    distance (exact unless escape paths are jointly blocked by other
    obstacles or the region boundary).
    """
    cache = cache or _ComplementCache(sc, tol)
    q0 = sc.quality_ids[0]
    report = {}
    ids = [s.id for s in sc.sensors if s.id in d.positions]
    pos = {sid: d.positions[sid] for sid in ids}
    for sid in ids:
        spec = sc.sensor(sid)
        p = pos[sid][None, :]
        f0 = spec.fresnel_for(q0)

        if len(sc.obstacles):
            d_obs = min(float(poly.distance(p, tol)[0]) for poly in sc.obstacles)
            inside = [poly for poly in sc.obstacles if poly.contains(p, tol)[0]]
            if inside:
                depth = max(
                    float(np.min(poly.halfspaces[:, 3] - poly.halfspaces[:, :3] @ pos[sid]))
                    for poly in inside
                )
                c_obst = f0 + depth
            else:
                c_obst = f0 - d_obs
        else:
            c_obst = -math.inf

        d_in_adm = min(float(poly.distance(p, tol)[0]) for poly in spec.admissible)
        if d_in_adm > tol:
            c_admis = d_in_adm
        else:
            comp = cache.admissible_complement(sid)
            c_admis = -min(float(poly.distance(p, tol)[0]) for poly in comp)

        others = [s for s in ids if s != sid]
        if others:
            c_isol = min(
                float(np.linalg.norm(pos[sid] - pos[o]))
                - spec.range_for(q0)
                - sc.sensor(o).range_for(q0)
                for o in others
            )
        else:
            c_isol = math.inf
        report[sid] = SensorConstraints(c_obst, c_admis, c_isol)
    return ConstraintReport(report)


# -- per-pair uncovered regions ----------------------------------------------------


@dataclass
class PairRegions:
    """Regions attached to one sensor pair at one quality level."""

    s1: str
    s2: str
    q: str
    u_pair: IndexedUnion
    r_pair: IndexedUnion
    components: dict  # cause -> list[ConvexPolyhedron], for the viewer


def _opposite(mode: str) -> str:
    return "over" if mode == "under" else "under"


class RegionBuilder:
    """Caches per-sensor and per-pair region constructions for one deployment."""

    def __init__(self, d: Deployment, sc: Scenario, rho: float, tol: float = TAU_GEOM):
        self.d = d
        self.sc = sc
        self.rho = rho
        self.tol = tol
        self.geom = DeploymentGeometry(d, sc, tol)
        self._range: dict = {}
        self._obst: dict = {}
        self._bloat: dict = {}
        self._pair: dict = {}
        self._cov: dict = {}

    def _sphere(self, sid: str, q: str, mode: str) -> ConvexPolyhedron:
        spec = self.sc.sensor(sid)
        center = self.d.positions[sid]
        return sphere_approx(center, spec.range_for(q), mode, self.rho, self.tol)

    def range_region(self, sid: str, q: str, mode: str) -> list[ConvexPolyhedron]:
        """Out-of-range region: roi minus the range sphere (mode-correct)."""
        key = (sid, q, mode)
        if key not in self._range:
            sphere = self._sphere(sid, q, _opposite(mode))
            pieces: list[ConvexPolyhedron] = []
            shift = self.tol if mode == "under" else -self.tol
            for member in self.sc.roi:
                if boxes_disjoint(member.bbox, sphere.bbox):
                    pieces.append(member)
                else:
                    pieces.extend(poly_diff(member, sphere, shift, self.tol))
            self._range[key] = pieces
        return self._range[key]

    def obstructed_region(self, sid: str, q: str, mode: str) -> list[ConvexPolyhedron]:
        """Sight-blocked region: shadow of Fresnel-bloated obstacles from the sensor."""
        if not len(self.sc.obstacles):
            return []
        key = (sid, q, mode)
        if key not in self._obst:
            spec = self.sc.sensor(sid)
            f = spec.fresnel_for(q)
            bkey = (f, mode)
            if bkey not in self._bloat:
                self._bloat[bkey] = bloat(self.sc.obstacles.polys, f, mode, self.rho, self.tol)
            shadow = project(
                self.d.positions[sid], self._bloat[bkey], self.sc.roi.polys, mode, self.tol
            )
            self._obst[key] = list(shadow)
        return self._obst[key]

    def pair_regions(self, s1: str, s2: str, q: str, mode: str) -> PairRegions:
        key = (s1, s2, q, mode)
        if key not in self._pair:
            self._pair[key] = self._build_pair(s1, s2, q, mode)
        return self._pair[key]

    def covered_lazy(self, s1: str, s2: str, q: str, cov_mode: str) -> "LazyCovered":
        """Deferred covered region for the pair, approximated on `cov_mode`.

        The covered set is the intersection of both range spheres, both clear
        lines of sight, and the angle band; it is kept as clip systems and
        only materialized against small targets (cells), where it amounts to
        a handful of convex pieces.
        """
        key = (s1, s2, q, cov_mode)
        if key not in self._cov:
            from .geom.curved import angle_band_lazy

            ql = self.sc.quality(q)
            sph1 = self._sphere(s1, q, cov_mode)
            sph2 = self._sphere(s2, q, cov_mode)
            band = angle_band_lazy(
                self.d.positions[s1],
                self.d.positions[s2],
                ql.theta_min,
                ql.theta_max,
                self.sc.bbox,
                cov_mode,
                self.rho,
            )
            shadows: list[ConvexPolyhedron] = []
            if len(self.sc.obstacles):
                shadow_mode = _opposite(cov_mode)
                for sid in (s1, s2):
                    shadows.extend(self.obstructed_region(sid, q, shadow_mode))
            self._cov[key] = LazyCovered(
                s1, s2, np.vstack([sph1.halfspaces, sph2.halfspaces]),
                band, shadows, cov_mode,
                _bbox_intersection([sph1.bbox, sph2.bbox, band.bbox, self.sc.bbox]),
            )
        return self._cov[key]

    def _build_pair(self, s1: str, s2: str, q: str, mode: str) -> PairRegions:
        ql = self.sc.quality(q)
        p1 = self.d.positions[s1]
        p2 = self.d.positions[s2]
        comp = {
            "range": self.range_region(s1, q, mode) + self.range_region(s2, q, mode),
            "obstacle": self.obstructed_region(s1, q, mode)
            + self.obstructed_region(s2, q, mode),
            "angle": list(
                angle_region(
                    p1, p2, ql.theta_min, ql.theta_max, self.sc.roi.polys, mode, self.rho, self.tol
                )
            ),
        }
        members = [p for pieces in comp.values() for p in pieces]
        u_pair = iuop_create(PolyUnion(members))

        # in-range overlap, approximated on the opposite side
        sp_mode = _opposite(mode)
        sphere1 = self._sphere(s1, q, sp_mode)
        sphere2 = self._sphere(s2, q, sp_mode)
        overlap: list[ConvexPolyhedron] = []
        for member in self.sc.roi:
            piece = member.clip_many(
                np.vstack([sphere1.halfspaces, sphere2.halfspaces]), self.tol
            )
            if piece is not None:
                overlap.append(piece)
        r_pair = iuop_create(PolyUnion(overlap))
        return PairRegions(s1, s2, q, u_pair, r_pair, comp)


# -- closed-form uncovered region ----------------------------------------------------


def _bbox_intersection(boxes) -> np.ndarray | None:
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return None
    lo = np.max([b[0] for b in boxes], axis=0)
    hi = np.min([b[1] for b in boxes], axis=0)
    if np.any(lo > hi):
        return None
    return np.array([lo, hi])


class LazyCovered:
    """Per-pair covered region as clip systems: spheres, angle band, shadows."""

    __slots__ = ("s1", "s2", "sphere_rows", "band", "shadows", "cov_mode", "bbox")

    def __init__(self, s1, s2, sphere_rows, band, shadows, cov_mode, bbox):
        self.s1 = s1
        self.s2 = s2
        self.sphere_rows = sphere_rows
        self.band = band
        self.shadows = shadows
        self.cov_mode = cov_mode
        self.bbox = bbox

    def quick_verdict(self, target: ConvexPolyhedron, tol: float) -> str | None:
        """Cheap sound classification of a small box against this coverage.

        "covers": the box is entirely covered by the pair (on this
        approximation side); "empty": the pair covers none of it; None:
        undecided, requiring actual clipping.
        """
        if self.bbox is None or boxes_disjoint(self.bbox, target.bbox, tol):
            return "empty"
        lo, hi = target.bbox
        corners = np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )
        slack = corners @ self.sphere_rows[:, :3].T - self.sphere_rows[:, 3]
        if np.any(np.all(slack > tol, axis=0)):
            return "empty"  # a range-sphere facet excludes the whole box
        sphere_pass = bool(np.all(slack <= tol))
        fr = self.band.frame
        if fr is None:
            return None
        uw = fr.uw_of(corners)
        u0, u1 = float(uw[:, 0].min()), float(uw[:, 0].max())
        w1 = float(uw[:, 1].max())
        center_w = float(fr.uw_of(((lo + hi) / 2.0)[None, :])[0, 1])
        half_diag = 0.5 * float(np.linalg.norm(hi - lo))
        w0 = max(center_w - half_diag, 0.0)
        verdict = self.band.profile_verdict(u0, u1, w0, w1)
        if verdict == "empty":
            return "empty"
        if verdict == "covers" and sphere_pass:
            if all(boxes_disjoint(sh.bbox, target.bbox, tol) for sh in self.shadows):
                return "covers"
        return None

    def clip_to(self, target: ConvexPolyhedron, tol: float) -> list[ConvexPolyhedron]:
        """Covered pieces inside `target` (usually one cell fragment)."""
        if self.bbox is None or boxes_disjoint(self.bbox, target.bbox, tol):
            return []
        base = target.clip_many(self.sphere_rows, tol)
        if base is None:
            return []
        pieces = self.band.clip_to(base, tol)
        shadow_shift = -tol if self.cov_mode == "over" else tol
        for sh in self.shadows:
            if not pieces:
                break
            nxt: list[ConvexPolyhedron] = []
            for piece in pieces:
                if boxes_disjoint(piece.bbox, sh.bbox, tol):
                    nxt.append(piece)
                else:
                    nxt.extend(poly_diff(piece, sh, shadow_shift, tol))
            pieces = nxt
        return pieces


def grid_dims(m: int, extents: np.ndarray) -> tuple[int, int, int]:
    """Factor m into three grid counts tracking the box extents."""
    best = None
    for a in range(1, m + 1):
        if m % a:
            continue
        rest = m // a
        for b in range(1, rest + 1):
            if rest % b:
                continue
            c = rest // b
            dims = (a, b, c)
            sizes = extents / np.array(dims)
            cost = float(sizes.max() / sizes.min())
            if best is None or cost < best[0]:
                best = (cost, dims)
    return best[1]


def roi_cells(sc: Scenario, m: int, tol: float = TAU_GEOM) -> list[list[ConvexPolyhedron]]:
    """Partition of the roi into m congruent axis-aligned grid cells (each
    intersected with the roi; empty intersections stay as empty lists)."""
    if m < 1:
        raise GeometryError(f"cell count must be >= 1, got {m}")
    lo, hi = sc.bbox
    dims = grid_dims(m, hi - lo)
    step = (hi - lo) / np.array(dims)
    cells = []
    for ix in range(dims[0]):
        for iy in range(dims[1]):
            for iz in range(dims[2]):
                clo = lo + step * np.array([ix, iy, iz])
                chi = clo + step
                cell_box = ConvexPolyhedron.box(clo, chi)
                pieces = []
                for mi in sc.roi.query(cell_box.bbox):
                    piece = sc.roi.polys.polys[mi].intersect(cell_box, tol)
                    if piece is not None:
                        pieces.append(piece)
                cells.append(pieces)
    return cells


def _prune_contained(pieces: list[ConvexPolyhedron], tol: float) -> list[ConvexPolyhedron]:
    """Drop members whose vertices all lie inside another member."""
    n = len(pieces)
    if n < 2:
        return pieces
    dead = [False] * n
    for i in range(n):
        if dead[i]:
            continue
        for j in range(n):
            if i == j or dead[j] or dead[i]:
                continue
            if boxes_disjoint(pieces[i].bbox, pieces[j].bbox, tol):
                continue
            if pieces[j].contains(pieces[i].vertices, 10 * tol).all():
                if i < j or not pieces[i].contains(pieces[j].vertices, 10 * tol).all():
                    dead[i] = True
                    break
    return [p for i, p in enumerate(pieces) if not dead[i]]


def _fault_subsets(sensor_ids, j):
    return list(combinations(sensor_ids, min(j, len(sensor_ids))))


_COVERS = "covers"


class _Frag(Exception):
    """A subtraction chain fragmented beyond the node budget."""


def _chain(cell_pieces, locals_by_pair, surviving, shift, tol, cap):
    """Box minus the union of surviving pairs' in-box covered pieces.

    Raises _Frag when the intermediate piece count exceeds `cap`.
    """
    pieces = list(cell_pieces)
    for pi in surviving:
        lp = locals_by_pair[pi]
        if lp is _COVERS:
            return []
        for qp in lp:
            nxt: list[ConvexPolyhedron] = []
            for piece in pieces:
                if boxes_disjoint(piece.bbox, qp.bbox, tol):
                    nxt.append(piece)
                else:
                    nxt.extend(poly_diff(piece, qp, shift, tol))
            pieces = nxt
            if not pieces:
                return []
        if len(pieces) > 6:
            pieces = _prune_contained(pieces, tol)
        if len(pieces) > cap:
            raise _Frag
    return pieces


def _lattice_counts(extents: np.ndarray, target: float) -> np.ndarray:
    """Subdivision counts per axis with box edges at most `target`."""
    return np.maximum(np.ceil(extents / target).astype(np.int64), 1)


def _cell_uncovered(
    cell_pieces: list[ConvexPolyhedron],
    cov_list: list,
    sensor_ids: list[str],
    js,
    shift: float,
    tol: float,
    lattice,
    mode: str = "under",
    obstacles: list | None = None,
    box_cache: dict | None = None,
    cell_key=None,
) -> dict:
    """Uncovered portion of one cell per fault count.

    The cell is cut along a global power-of-two lattice (independent of the
    cell layout, so results match for any cell count).  Per lattice box, the
    surviving pairs' covered pieces are subtracted with a tight fragment
    budget; boxes whose chains still fragment are classified instead of
    resolved (dropped for under mode, kept whole for over), which keeps the
    output a certified under/over pair while bounding work everywhere.

    `shift` is the complement-plane offset of the differences (+tau keeps the
    result strictly uncovered for under mode, -tau keeps closure for over).
    """
    out: dict = {j: [] for j in js}
    if not cell_pieces:
        return out
    cell_bbox = np.array(
        [
            np.min([p.bbox[0] for p in cell_pieces], axis=0),
            np.max([p.bbox[1] for p in cell_pieces], axis=0),
        ]
    )
    roi_lo, step, counts = lattice
    i_lo = np.maximum(np.floor((cell_bbox[0] - roi_lo) / step - 1e-9).astype(int), 0)
    i_hi = np.minimum(
        np.ceil((cell_bbox[1] - roi_lo) / step + 1e-9).astype(int), counts
    )
    candidates = [
        pi for pi, lc in enumerate(cov_list)
        if lc.bbox is not None and not boxes_disjoint(lc.bbox, cell_bbox, tol)
    ]
    js = sorted(js)
    subsets = {j: _fault_subsets(sensor_ids, j) for j in js}

    for ix in range(i_lo[0], i_hi[0]):
        for iy in range(i_lo[1], i_hi[1]):
            for iz in range(i_lo[2], i_hi[2]):
                lo = roi_lo + step * np.array([ix, iy, iz], dtype=float)
                hi = np.minimum(lo + step, cell_bbox[1])
                lo = np.maximum(lo, cell_bbox[0])
                if np.any(hi - lo <= tol):
                    continue
                box = ConvexPolyhedron.box(lo, hi)
                cache_key = (cell_key, ix, iy, iz) if box_cache is not None else None
                if cache_key is not None and cache_key in box_cache:
                    box_pieces = box_cache[cache_key]
                else:
                    box_pieces = []
                    for cp in cell_pieces:
                        if boxes_disjoint(cp.bbox, box.bbox, tol):
                            continue
                        r = cp.intersect(box, tol)
                        if r is not None:
                            box_pieces.append(r)
                    # obstacle points are never uncovered: carve them out here
                    # (exact closure, so both modes can share these pieces)
                    for ob in obstacles or []:
                        if not box_pieces:
                            break
                        if boxes_disjoint(ob.bbox, box.bbox, tol):
                            continue
                        nxt = []
                        for bp in box_pieces:
                            if boxes_disjoint(bp.bbox, ob.bbox, tol):
                                nxt.append(bp)
                            else:
                                nxt.extend(poly_diff(bp, ob, 0.0, tol))
                        box_pieces = nxt
                    if cache_key is not None:
                        box_cache[cache_key] = box_pieces
                if not box_pieces:
                    continue
                box_verts = np.vstack([p.vertices for p in box_pieces])
                locals_by_pair: dict = {}
                eligible: list[int] = []
                for pi in candidates:
                    lc = cov_list[pi]
                    if boxes_disjoint(lc.bbox, box.bbox, tol):
                        continue
                    verdict = lc.quick_verdict(box, tol)
                    if verdict == "empty":
                        continue
                    if verdict == "covers":
                        locals_by_pair[pi] = _COVERS
                        eligible.append(pi)
                        continue
                    pieces: list[ConvexPolyhedron] = []
                    for bp in box_pieces:
                        pieces.extend(lc.clip_to(bp, tol))
                    if not pieces:
                        continue
                    value = pieces
                    for p in pieces:
                        if p.contains(box_verts, 10 * tol).all():
                            value = _COVERS
                            break
                    if value is not _COVERS and len(pieces) > 3:
                        value = _prune_contained(pieces, tol)
                    locals_by_pair[pi] = value
                    eligible.append(pi)
                # most-covering pairs first so chains annihilate early
                eligible.sort(
                    key=lambda pi: -(
                        float("inf")
                        if locals_by_pair[pi] is _COVERS
                        else sum(p.volume for p in locals_by_pair[pi])
                    )
                )
                # base remainder, shared by every fault set: box minus all coverage
                if eligible:
                    try:
                        d_all = _chain(box_pieces, locals_by_pair, eligible, shift, tol, 10)
                    except _Frag:
                        d_all = None  # classify: absent for under, whole box for over
                for j in js:
                    if not eligible:
                        out[j].extend(box_pieces)
                        continue
                    if d_all is None and mode == "over":
                        out[j].extend(box_pieces)
                        continue
                    if d_all:
                        out[j].extend(d_all)
                    if j == 0:
                        continue
                    # remaining fault sets add (killed coverage) minus (surviving)
                    saturated = False
                    for faulty in subsets[j]:
                        fs = set(faulty)
                        surviving, killed = [], []
                        for pi in eligible:
                            if cov_list[pi].s1 in fs or cov_list[pi].s2 in fs:
                                killed.append(pi)
                            else:
                                surviving.append(pi)
                        if not surviving:
                            out[j].extend(box_pieces)
                            saturated = True
                            break
                        if not killed:
                            continue
                        start: list[ConvexPolyhedron] = []
                        for pi in killed:
                            lp = locals_by_pair[pi]
                            start.extend(box_pieces if lp is _COVERS else lp)
                        if len(start) > 3:
                            start = _prune_contained(start, tol)
                        try:
                            bracket = _chain(start, locals_by_pair, surviving, shift, tol, 12)
                        except _Frag:
                            if mode == "over":
                                out[j].extend(box_pieces)
                                saturated = True
                                break
                            bracket = []  # dropped: still an under-approximation
                        out[j].extend(bracket)
                    if saturated:
                        continue
    return out


def uncovered_region_multi(
    d: Deployment,
    js,
    q: str,
    sc: Scenario,
    m: int,
    mode: str,
    rho: float,
    builder: RegionBuilder | None = None,
    workers: int = 1,
    tol: float = TAU_GEOM,
) -> dict:
    """Certified polyhedral approximations of the (j, q)-uncovered regions
    for every fault count in `js` at once.

    The roi is split into m congruent cells processed independently; within
    each cell the kernel subtracts per-pair covered regions along a global
    lattice shared by every cell layout, so results are identical for any m
    and any worker count.
    """
    if m < 1:
        raise GeometryError(f"cell count must be >= 1, got {m}")
    for j in js:
        if j > sc.k:
            raise GeometryError(f"fault count {j} exceeds scenario budget k={sc.k}")
    builder = builder or RegionBuilder(d, sc, rho, tol)
    geom = builder.geom
    cov_mode = _opposite(mode)
    cov_list = []
    for pi in geom.eligible_pairs(q):
        i, jj = geom.pairs[pi]
        s1, s2 = geom.ids[i], geom.ids[jj]
        cov_list.append(builder.covered_lazy(s1, s2, q, cov_mode))
    cells = roi_cells(sc, m, tol)
    ids = list(geom.ids)
    js = sorted(set(js))
    shift = tol if mode == "under" else -tol
    # global lattice independent of the cell layout, so any m agrees pointwise
    lo, hi = sc.bbox
    target = max(float(np.max(hi - lo)) / 8.0, 2.5 * rho)
    counts = _lattice_counts(hi - lo, target)
    lattice = (lo, (hi - lo) / counts, counts)

    obstacles = list(sc.obstacles.polys)
    if workers > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        args = [
            (cell, cov_list, ids, js, shift, tol, lattice, mode, obstacles)
            for cell in cells
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(_cell_uncovered_star, args, chunksize=max(1, len(cells) // (4 * workers)))
            )
    else:
        if not hasattr(builder, "_box_cache"):
            builder._box_cache = {}
        cache = builder._box_cache.setdefault(m, {})
        results = [
            _cell_uncovered(
                cell, cov_list, ids, js, shift, tol, lattice, mode, obstacles,
                box_cache=cache, cell_key=ci,
            )
            for ci, cell in enumerate(cells)
        ]

    out = {}
    for j in js:
        pieces: list[ConvexPolyhedron] = []
        for r in results:
            pieces.extend(r[j])
        out[j] = iuop_create(simplify(PolyUnion(pieces), tol, max_members=1500))
    return out


def uncovered_region(
    d: Deployment,
    j: int,
    q: str,
    sc: Scenario,
    m: int,
    mode: str,
    rho: float,
    builder: RegionBuilder | None = None,
    workers: int = 1,
    tol: float = TAU_GEOM,
) -> IndexedUnion:
    """Single-fault-count convenience wrapper around uncovered_region_multi."""
    return uncovered_region_multi(
        d, [j], q, sc, m, mode, rho, builder=builder, workers=workers, tol=tol
    )[j]


def _cell_uncovered_star(args):
    return _cell_uncovered(*args)


@dataclass
class UncoveredResult:
    """Under/over polyhedral approximations per (j, q), plus per-pair regions."""

    entries: dict  # (j, q) -> {"under": IndexedUnion, "over": IndexedUnion}
    pairs: dict  # (s1, s2, q, mode) -> PairRegions


def uncovered_full(
    d: Deployment,
    sc: Scenario,
    js,
    qs,
    m: int,
    rho: float,
    workers: int = 1,
    tol: float = TAU_GEOM,
) -> UncoveredResult:
    """Under and over approximations for every requested (j, q)."""
    entries = {}
    pairs = {}
    builders = {}
    for mode in ("under", "over"):
        builders[mode] = RegionBuilder(d, sc, rho, tol)
    for q in qs:
        for mode in ("under", "over"):
            per_j = uncovered_region_multi(
                d, js, q, sc, m, mode, rho, builder=builders[mode], workers=workers, tol=tol
            )
            for j in js:
                entries.setdefault((j, q), {})[mode] = per_j[j]
    for mode in ("under", "over"):
        pairs.update(builders[mode]._pair)
    return UncoveredResult(entries, pairs)
