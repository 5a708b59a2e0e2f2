"""AABB-tree-indexed unions of polyhedra with accelerated set operations.

The tree is a binary hierarchy over member bounding boxes, built top-down by
splitting the centroid-sorted axis of largest extent at the position
minimizing the children's total bounding surface area.  The index is an
accelerator only: indexed operations return the same point sets as their
unindexed counterparts in :mod:`covertool.geom.ops`.
"""
from __future__ import annotations

import numpy as np

from .geom.ops import poly_diff, union_volume
from .geom.poly import TAU_GEOM, ConvexPolyhedron, PolyUnion, boxes_disjoint


def _surfaces(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = hi - lo
    return 2.0 * (d[:, 0] * d[:, 1] + d[:, 1] * d[:, 2] + d[:, 0] * d[:, 2])


class _Tree:
    """Flat-array binary AABB tree: node i has children left[i]/right[i],
    or carries member index leaf[i] when left[i] < 0.  Flat storage keeps
    pickling and traversal iterative regardless of tree shape."""

    __slots__ = ("bbox_lo", "bbox_hi", "left", "right", "leaf")

    def __init__(self, boxes: np.ndarray):
        n = len(boxes)
        cap = 2 * n - 1
        self.bbox_lo = np.empty((cap, 3))
        self.bbox_hi = np.empty((cap, 3))
        self.left = np.full(cap, -1, dtype=np.int64)
        self.right = np.full(cap, -1, dtype=np.int64)
        self.leaf = np.full(cap, -1, dtype=np.int64)
        next_id = [1]
        stack = [(0, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            lo = boxes[idx, 0].min(axis=0)
            hi = boxes[idx, 1].max(axis=0)
            self.bbox_lo[node] = lo
            self.bbox_hi[node] = hi
            if len(idx) == 1:
                self.leaf[node] = int(idx[0])
                continue
            centroids = boxes[idx].mean(axis=1)
            axis = int(np.argmax(hi - lo))
            order = idx[np.argsort(centroids[:, axis], kind="stable")]
            sorted_boxes = boxes[order]
            pre_lo = np.minimum.accumulate(sorted_boxes[:, 0], axis=0)
            pre_hi = np.maximum.accumulate(sorted_boxes[:, 1], axis=0)
            suf_lo = np.minimum.accumulate(sorted_boxes[::-1, 0], axis=0)[::-1]
            suf_hi = np.maximum.accumulate(sorted_boxes[::-1, 1], axis=0)[::-1]
            m = len(order)
            cost = _surfaces(pre_lo[: m - 1], pre_hi[: m - 1]) + _surfaces(suf_lo[1:], suf_hi[1:])
            best_k = int(np.argmin(cost)) + 1
            if cost.max() - cost.min() <= 1e-12 * max(float(cost.max()), 1.0):
                best_k = m // 2  # identical boxes: keep the tree balanced
            l_id, r_id = next_id[0], next_id[0] + 1
            next_id[0] += 2
            self.left[node] = l_id
            self.right[node] = r_id
            stack.append((l_id, order[:best_k]))
            stack.append((r_id, order[best_k:]))


class IndexedUnion:
    """Union of convex polyhedra carrying an AABB-tree index over member bboxes."""

    __slots__ = ("polys", "tree")

    def __init__(self, polys: PolyUnion):
        self.polys = polys
        if len(polys) == 0:
            self.tree = None
        else:
            boxes = np.array([p.bbox for p in polys])
            self.tree = _Tree(boxes)

    def __iter__(self):
        return iter(self.polys)

    def __len__(self):
        return len(self.polys)

    def __bool__(self):
        return len(self.polys) > 0

    @property
    def bbox(self):
        if self.tree is None:
            return None
        return np.array([self.tree.bbox_lo[0], self.tree.bbox_hi[0]])

    def contains(self, points: np.ndarray, tol: float = TAU_GEOM) -> np.ndarray:
        return self.polys.contains(points, tol)

    def query(self, probe_bbox: np.ndarray, tol: float = 0.0) -> list[int]:
        """Indices of all members whose bbox intersects the probe bbox."""
        probe = np.asarray(probe_bbox, dtype=float)
        if self.tree is None:
            return []
        t = self.tree
        out: list[int] = []
        stack = [0]
        while stack:
            node = stack.pop()
            if np.any(t.bbox_lo[node] > probe[1] + tol) or np.any(
                probe[0] > t.bbox_hi[node] + tol
            ):
                continue
            if t.left[node] < 0:
                out.append(int(t.leaf[node]))
            else:
                stack.append(int(t.left[node]))
                stack.append(int(t.right[node]))
        return sorted(out)

    def volume(self, tol: float = TAU_GEOM) -> float:
        return union_volume(self.polys, tol)


def iuop_create(polys, simplify_first: bool = False, tol: float = TAU_GEOM) -> IndexedUnion:
    if not isinstance(polys, PolyUnion):
        polys = PolyUnion(polys)
    if simplify_first:
        polys = simplify(polys, tol)
    return IndexedUnion(polys)


def iuop_intersect(a: IndexedUnion, b: IndexedUnion, tol: float = TAU_GEOM) -> IndexedUnion:
    """Index-pruned pairwise intersection, re-simplified and re-indexed."""
    out = []
    for p in a:
        for j in b.query(p.bbox, tol):
            q = b.polys.polys[j]
            r = p.intersect(q, tol)
            if r is not None:
                out.append(r)
    return iuop_create(simplify(PolyUnion(out), tol))


def iuop_union(unions, tol: float = TAU_GEOM) -> IndexedUnion:
    members = []
    for u in unions:
        members.extend(u.polys if isinstance(u, IndexedUnion) else u)
    return iuop_create(simplify(PolyUnion(members), tol))


def iuop_diff(a: IndexedUnion, b: IndexedUnion, mode: str = "under", tol: float = TAU_GEOM) -> IndexedUnion:
    """Index-pruned difference: only b-members whose bbox meets a piece are subtracted."""
    shift = tol if mode == "under" else -tol
    out: list[ConvexPolyhedron] = []
    for p in a:
        pieces = [p]
        for j in b.query(p.bbox, tol):
            q = b.polys.polys[j]
            nxt: list[ConvexPolyhedron] = []
            for piece in pieces:
                if boxes_disjoint(piece.bbox, q.bbox, tol):
                    nxt.append(piece)
                else:
                    nxt.extend(poly_diff(piece, q, shift, tol))
            pieces = nxt
            if not pieces:
                break
        out.extend(pieces)
    return iuop_create(simplify(PolyUnion(out), tol))


def _try_merge(p: ConvexPolyhedron, q: ConvexPolyhedron, tol: float) -> ConvexPolyhedron | None:
    """Merged hull if hull(p u q) equals the union exactly (volume test)."""
    from scipy.spatial import ConvexHull, QhullError

    pts = np.vstack([p.vertices, q.vertices])
    try:
        hull = ConvexHull(pts)
    except (QhullError, ValueError):
        return None
    eps = 1e-9 * max(hull.volume, 1.0)
    if hull.volume > p.volume + q.volume + eps:
        return None  # hull strictly exceeds any possible union volume
    inter = p.intersect(q, tol)
    v_union = p.volume + q.volume - (inter.volume if inter is not None else 0.0)
    if abs(hull.volume - v_union) <= eps:
        return ConvexPolyhedron._from_hull(hull, pts, tol)
    return None


def simplify(polys: PolyUnion, tol: float = TAU_GEOM, max_members: int = 2000) -> PolyUnion:
    """Heuristic pair merging until fixpoint, preserving the point set.

    A merge is accepted only when the hull of the pair equals their union up
    to 1e-9 relative volume.  Candidate pairs are limited to touching bboxes,
    tried smallest-combined-vertex-count first, and each failed pair is
    remembered so it is never retried unless one partner changed.
    """
    members: list[ConvexPolyhedron | None] = list(polys)
    if len(members) > max_members or len(members) < 2:
        return PolyUnion([m for m in members if m is not None])
    failed: set[tuple[int, int]] = set()

    def candidates(i):
        out = []
        for j, m in enumerate(members):
            if j == i or m is None or members[i] is None:
                continue
            a, b = min(i, j), max(i, j)
            if (a, b) in failed:
                continue
            if not boxes_disjoint(members[i].bbox, m.bbox, 10 * tol):
                out.append((len(members[i].vertices) + len(m.vertices), a, b))
        out.sort()
        return out

    stack = sorted(range(len(members)), key=lambda i: len(members[i].vertices))
    while stack:
        i = stack.pop()
        if members[i] is None:
            continue
        for _, a, b in candidates(i):
            if members[a] is None or members[b] is None:
                continue
            merged = _try_merge(members[a], members[b], tol)
            if merged is None:
                failed.add((a, b))
                continue
            members[a] = None
            members[b] = None
            members.append(merged)
            stack.append(len(members) - 1)
            break
    return PolyUnion([m for m in members if m is not None])
