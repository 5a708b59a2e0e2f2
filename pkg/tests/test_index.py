"""AABB-indexed unions: build invariants, query completeness, op transparency, simplify."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertool.geom import ConvexPolyhedron, PolyUnion, bool_diff, bool_intersect, bool_union, union_volume
from covertool.index import IndexedUnion, iuop_create, iuop_diff, iuop_intersect, iuop_union, simplify


def random_boxes(rng, n, lo=-10, hi=10, smin=0.5, smax=3.0):
    out = []
    for _ in range(n):
        a = rng.uniform(lo, hi - smax, 3)
        out.append(ConvexPolyhedron.box(a, a + rng.uniform(smin, smax, 3)))
    return PolyUnion(out)


def walk_invariants(tree, polys):
    """Every internal bbox contains its children; leaves match member bboxes."""
    leaves = 0
    stack = [0]
    while stack:
        node = stack.pop()
        if tree.left[node] < 0:
            leaf = int(tree.leaf[node])
            assert np.allclose(tree.bbox_lo[node], polys.polys[leaf].bbox[0])
            assert np.allclose(tree.bbox_hi[node], polys.polys[leaf].bbox[1])
            leaves += 1
            continue
        for child in (int(tree.left[node]), int(tree.right[node])):
            assert np.all(tree.bbox_lo[node] <= tree.bbox_lo[child] + 1e-12)
            assert np.all(tree.bbox_hi[node] >= tree.bbox_hi[child] - 1e-12)
            stack.append(child)
    return leaves


class TestCreate:
    def test_empty(self):
        u = iuop_create(PolyUnion([]))
        assert u.tree is None
        assert len(u) == 0
        assert u.query(np.array([[0, 0, 0], [1, 1, 1]])) == []

    def test_single_box(self):
        box = ConvexPolyhedron.box([0, 0, 0], [1, 2, 3])
        u = iuop_create(PolyUnion([box]))
        assert int(u.tree.leaf[0]) == 0
        assert np.allclose(u.bbox, box.bbox)

    def test_hundred_boxes_invariants(self):
        rng = np.random.default_rng(0)
        polys = random_boxes(rng, 100)
        u = iuop_create(polys)
        assert walk_invariants(u.tree, u.polys) == 100


class TestQuery:
    def test_disjoint_probe(self):
        rng = np.random.default_rng(1)
        u = iuop_create(random_boxes(rng, 30))
        assert u.query(np.array([[100, 100, 100], [101, 101, 101]])) == []

    def test_root_probe_returns_all(self):
        rng = np.random.default_rng(2)
        u = iuop_create(random_boxes(rng, 30))
        assert u.query(u.bbox) == list(range(30))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_matches_linear_scan(self, seed):
        rng = np.random.default_rng(seed)
        u = iuop_create(random_boxes(rng, 40))
        lo = rng.uniform(-12, 10, 3)
        probe = np.array([lo, lo + rng.uniform(0.5, 6, 3)])
        got = u.query(probe)
        want = [
            i
            for i, p in enumerate(u.polys)
            if not (np.any(probe[0] > p.bbox[1]) or np.any(p.bbox[0] > probe[1]))
        ]
        assert got == want


class TestIndexedOps:
    def test_disjoint_unions_prune_all_pairs(self):
        a = iuop_create(PolyUnion([ConvexPolyhedron.box([0, 0, 0], [1, 1, 1])]))
        b = iuop_create(PolyUnion([ConvexPolyhedron.box([5, 5, 5], [6, 6, 6])]))
        # pruning contract: no pairwise intersections attempted for disjoint bboxes
        assert b.query(a.polys.polys[0].bbox) == []
        assert len(iuop_intersect(a, b)) == 0

    def test_union_with_empty_is_identity(self):
        rng = np.random.default_rng(3)
        u = iuop_create(random_boxes(rng, 10))
        out = iuop_union([u, iuop_create(PolyUnion([]))])
        pts = rng.uniform(-12, 12, size=(2000, 3))
        assert np.array_equal(out.contains(pts), u.contains(pts))

    @pytest.mark.parametrize("seed", range(6))
    def test_ops_match_unindexed_oracle(self, seed):
        rng = np.random.default_rng(seed)
        pa = random_boxes(rng, 8)
        pb = random_boxes(rng, 8)
        a, b = iuop_create(pa), iuop_create(pb)
        pts = rng.uniform(-12, 12, size=(1000, 3))
        got_i = iuop_intersect(a, b).contains(pts)
        want_i = bool_intersect(pa, pb).contains(pts)
        assert np.array_equal(got_i, want_i)
        got_u = iuop_union([a, b]).contains(pts)
        want_u = bool_union([pa, pb]).contains(pts)
        assert np.array_equal(got_u, want_u)
        got_d = iuop_diff(a, b, "under").contains(pts)
        want_d = bool_diff(pa, pb, "under").contains(pts)
        # differences may disagree within tau of b's boundary
        near = np.zeros(len(pts), dtype=bool)
        for q in pb:
            near |= np.abs(pts @ q.halfspaces[:, :3].T - q.halfspaces[:, 3]).min(axis=1) <= 1e-5
        assert np.array_equal(got_d[~near], want_d[~near])


class TestSimplify:
    def test_face_sharing_halves_merge(self):
        u = PolyUnion(
            [
                ConvexPolyhedron.box([0, 0, 0], [1, 1, 1]),
                ConvexPolyhedron.box([1, 0, 0], [2, 1, 1]),
            ]
        )
        out = simplify(u)
        assert len(out) == 1
        assert union_volume(out) == pytest.approx(2.0, rel=1e-9)

    def test_corner_touch_does_not_merge(self):
        u = PolyUnion(
            [
                ConvexPolyhedron.box([0, 0, 0], [1, 1, 1]),
                ConvexPolyhedron.box([1, 1, 1], [2, 2, 2]),
            ]
        )
        out = simplify(u)
        assert len(out) == 2

    @pytest.mark.parametrize("seed", range(4))
    def test_volume_preserved(self, seed):
        rng = np.random.default_rng(seed)
        u = random_boxes(rng, 12, lo=-4, hi=4, smin=0.5, smax=2.5)
        out = simplify(u)
        assert len(out) <= len(u)
        assert union_volume(out) == pytest.approx(union_volume(u), rel=1e-9)

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        u = random_boxes(rng, 10, lo=-3, hi=3)
        once = simplify(u)
        twice = simplify(once)
        assert len(twice) == len(once)

    def test_grid_of_boxes_collapses(self):
        cells = []
        for i in range(3):
            for j in range(3):
                cells.append(ConvexPolyhedron.box([i, j, 0], [i + 1, j + 1, 1]))
        out = simplify(PolyUnion(cells))
        assert len(out) == 1
        assert union_volume(out) == pytest.approx(9.0, rel=1e-9)
