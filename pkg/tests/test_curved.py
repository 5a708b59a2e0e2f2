"""Curved-region approximations: spheres, bloat, projection, angle regions."""
import math

import numpy as np
import pytest

from covertool.geom import (
    ConvexPolyhedron,
    GeometryError,
    PolyUnion,
    angle_region,
    angles_at,
    bloat,
    project,
    sphere_approx,
    sphere_vertex_count,
)
from covertool.geom.curved import RevolutionFrame, _angle_disk


def fib_directions(n, seed=0):
    """Deterministic quasi-uniform directions on the sphere."""
    i = np.arange(n) + 0.5
    phi = math.pi * (1 + 5 ** 0.5) * i
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z ** 2)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


class TestSphere:
    @pytest.mark.parametrize("rho_frac", [0.1, 0.01])
    def test_under_support_within_rho(self, rho_frac):
        r = 2.0
        rho = rho_frac * r
        p = sphere_approx([0, 0, 0], r, "under", rho)
        dirs = fib_directions(1000)
        support = p.support(dirs)
        assert np.all(support <= r + 1e-9)
        assert np.max(r - support) <= rho + 1e-9

    @pytest.mark.parametrize("rho_frac", [0.1, 0.01])
    def test_over_support_within_rho(self, rho_frac):
        r = 2.0
        rho = rho_frac * r
        p = sphere_approx([0, 0, 0], r, "over", rho)
        dirs = fib_directions(1000)
        support = p.support(dirs)
        assert np.all(support >= r - 1e-9)
        assert np.max(support - r) <= rho + 1e-9

    def test_over_vertices_circumscribe(self):
        p = sphere_approx([1, 2, 3], 1.5, "over", 0.2)
        radii = np.linalg.norm(p.vertices - np.array([1, 2, 3]), axis=1)
        assert np.all(radii >= 1.5 - 1e-9)

    def test_under_vertices_on_sphere(self):
        p = sphere_approx([0, 0, 0], 3.0, "under", 0.5)
        radii = np.linalg.norm(p.vertices, axis=1)
        assert np.allclose(radii, 3.0, atol=1e-9)

    def test_refinement_monotone(self):
        r = 1.0
        assert sphere_vertex_count(r, r / 100) > sphere_vertex_count(r, r / 10)

    def test_bad_inputs(self):
        with pytest.raises(GeometryError):
            sphere_approx([0, 0, 0], -1.0, "under", 0.1)
        with pytest.raises(GeometryError):
            sphere_approx([0, 0, 0], 1.0, "under", 0.0)


class TestBloat:
    def test_zero_bloat_identity(self):
        cube = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [1, 1, 1])])
        for mode in ("under", "over"):
            out = bloat(cube, 0.0, mode, 0.1)
            assert out is cube

    def test_face_normal_point(self):
        cube = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [1, 1, 1])])
        out = bloat(cube, 1.0, "over", 0.1)
        assert out.contains([[2, 0.5, 0.5]])[0]

    def test_negative_rejected(self):
        cube = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [1, 1, 1])])
        with pytest.raises(GeometryError):
            bloat(cube, -0.5, "over", 0.1)

    @pytest.mark.parametrize("mode", ["under", "over"])
    def test_membership_vs_distance_oracle(self, mode):
        cube_poly = ConvexPolyhedron.box([0, 0, 0], [1, 1, 1])
        region = PolyUnion([cube_poly])
        beta, rho = 1.0, 0.1
        out = bloat(region, beta, mode, rho)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1.5, 2.5, size=(10000, 3))
        d = cube_poly.distance(pts)
        member = out.contains(pts)
        inside_exact = d <= beta
        away_from_boundary = np.abs(d - beta) > rho
        mism = member[away_from_boundary] != inside_exact[away_from_boundary]
        assert mism.sum() == 0
        if mode == "under":
            assert not np.any(member & (d > beta + 1e-9))
        else:
            assert not np.any(~member & (d <= beta))

    @pytest.mark.parametrize("rho_frac", [0.1, 0.01])
    def test_support_hausdorff(self, rho_frac):
        poly = ConvexPolyhedron.box([0, 0, 0], [2, 1, 0.5])
        beta = 1.0
        rho = rho_frac * beta
        dirs = fib_directions(1000)
        exact = poly.support(dirs) + beta
        under = bloat(PolyUnion([poly]), beta, "under", rho).polys[0].support(dirs)
        over = bloat(PolyUnion([poly]), beta, "over", rho).polys[0].support(dirs)
        assert np.all(under <= exact + 1e-9)
        assert np.max(exact - under) <= rho + 1e-9
        assert np.all(over >= exact - 1e-9)
        assert np.max(over - exact) <= rho + 1e-9


CLIP5 = PolyUnion([ConvexPolyhedron.box([-5, -5, -5], [5, 5, 5])])


class TestProject:
    def test_segment_crosses_cube(self):
        pr = project([0, 0, 0], PolyUnion([ConvexPolyhedron.box([1, 1, 1], [2, 2, 2])]), CLIP5)
        assert pr.contains([[4, 4, 4]])[0]

    def test_segment_points_away(self):
        pr = project([0, 0, 0], PolyUnion([ConvexPolyhedron.box([1, 1, 1], [2, 2, 2])]), CLIP5)
        assert not pr.contains([[-1, -1, -1]])[0]

    def test_endpoint_inside_region(self):
        pr = project([0, 0, 0], PolyUnion([ConvexPolyhedron.box([1, 1, 1], [2, 2, 2])]), CLIP5)
        assert pr.contains([[1.5, 1.5, 1.5]])[0]

    def test_viewpoint_inside_gives_whole_clip(self):
        pr = project([1.5, 1.5, 1.5], PolyUnion([ConvexPolyhedron.box([1, 1, 1], [2, 2, 2])]), CLIP5)
        rng = np.random.default_rng(1)
        pts = rng.uniform(-5, 5, size=(500, 3))
        assert pr.contains(pts).all()

    def test_membership_matches_segment_oracle(self):
        target = ConvexPolyhedron.box([1, -0.5, -0.5], [2, 0.5, 0.5])
        x = np.array([-1.0, 0.1, -0.2])
        pr = project(x, PolyUnion([target]), CLIP5)
        rng = np.random.default_rng(2)
        pts = rng.uniform(-5, 5, size=(4000, 3))
        from covertool.geom import segments_intersect_poly

        want = segments_intersect_poly(np.repeat(x[None, :], len(pts), 0), pts, target)
        got = pr.contains(pts)
        near = target.distance(pts) < 1e-4  # boundary band
        mask = ~near
        assert np.array_equal(got[mask], want[mask])

    def test_monotone_in_region(self):
        small = PolyUnion([ConvexPolyhedron.box([1, 1, 1], [2, 2, 2])])
        big = PolyUnion(
            [ConvexPolyhedron.box([1, 1, 1], [2, 2, 2]), ConvexPolyhedron.box([1, -2, 1], [2, -1, 2])]
        )
        x = [0, 0, 0]
        pr_small = project(x, small, CLIP5)
        pr_big = project(x, big, CLIP5)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-5, 5, size=(2000, 3))
        in_small = pr_small.contains(pts)
        in_big = pr_big.contains(pts)
        assert not np.any(in_small & ~in_big)


class TestAngleRegion:
    def test_right_angle_inside_range_is_covered(self):
        out = angle_region([-1, 0, 0], [1, 0, 0], math.radians(25), math.radians(155), CLIP5, "over", 0.1)
        assert not out.contains([[0, 1, 0]])[0]

    def test_collinear_between_sensors_uncovered(self):
        out = angle_region([-1, 0, 0], [1, 0, 0], math.radians(25), math.radians(155), CLIP5, "under", 0.1)
        assert out.contains([[0, 1e-7, 0]])[0]

    def test_far_point_small_angle_uncovered(self):
        clip = PolyUnion([ConvexPolyhedron.box([-120, -120, -120], [120, 120, 120])])
        out = angle_region([-1, 0, 0], [1, 0, 0], math.radians(25), math.radians(155), clip, "under", 0.5)
        assert out.contains([[0, 100, 0]])[0]

    def test_bad_inputs(self):
        with pytest.raises(GeometryError):
            angle_region([0, 0, 0], [0, 0, 0], 0.3, 2.0, CLIP5, "under", 0.1)
        with pytest.raises(GeometryError):
            angle_region([-1, 0, 0], [1, 0, 0], 2.0, 0.3, CLIP5, "under", 0.1)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_sandwich_and_tolerance(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-3, 3, 3)
        b = a + rng.uniform(1, 3, 3)
        tmin = math.radians(rng.uniform(15, 60))
        tmax = math.radians(rng.uniform(100, 165))
        clip = PolyUnion([ConvexPolyhedron.box(np.minimum(a, b) - 6, np.maximum(a, b) + 6)])
        rho = 0.3
        under = angle_region(a, b, tmin, tmax, clip, "under", rho)
        over = angle_region(a, b, tmin, tmax, clip, "over", rho)
        pts = rng.uniform(clip.bbox[0], clip.bbox[1], size=(10000, 3))
        ang = angles_at(pts, a, b)
        exact = (ang < tmin) | (ang > tmax)
        in_u = under.contains(pts)
        in_o = over.contains(pts)
        fr = RevolutionFrame(a, b)
        uw = fr.uw_of(pts)
        c1, r1 = _angle_disk(fr.half, tmin)
        c2, r2 = _angle_disk(fr.half, tmax)
        dsurf = np.minimum(
            np.abs(np.hypot(uw[:, 0], uw[:, 1] - c1) - r1),
            np.abs(np.hypot(uw[:, 0], uw[:, 1] - c2) - r2),
        )
        assert not np.any(in_u & ~in_o)  # sandwich
        assert not np.any(in_u & ~exact & (dsurf > 1e-9))  # under subset
        assert not np.any(exact & ~in_u & (dsurf > rho))  # under within rho
        assert not np.any(exact & ~in_o & (dsurf > 1e-9))  # over superset
        assert not np.any(~exact & in_o & (dsurf > rho))  # over within rho

    @pytest.mark.parametrize("rho", [0.5, 0.05])
    def test_hausdorff_scaling(self, rho):
        """Support-sampled one-sided error of the theta_max lens respects rho."""
        a = np.array([-1.0, 0, 0])
        b = np.array([1.0, 0, 0])
        tmax = math.radians(150)
        clip = PolyUnion([ConvexPolyhedron.box([-4, -4, -4], [4, 4, 4])])
        under = angle_region(a, b, math.radians(1e-3) + 1e-4, tmax, clip, "under", rho)
        over = angle_region(a, b, math.radians(1e-3) + 1e-4, tmax, clip, "over", rho)
        # dense exact surface cloud of the lens solid {angle >= tmax}
        fr = RevolutionFrame(a, b)
        c, r = _angle_disk(fr.half, tmax)
        ts = np.linspace(tmax - math.pi / 2, 1.5 * math.pi - tmax, 400)
        phis = np.linspace(0, 2 * math.pi, 361)[:-1]
        prof = np.column_stack([r * np.cos(ts), c + r * np.sin(ts)])
        surf = []
        for u, w in prof:
            if w < 0:
                continue
            surf.append(
                fr.mid
                + u * fr.axis
                + w * (np.cos(phis)[:, None] * fr.e1 + np.sin(phis)[:, None] * fr.e2)
            )
        surf = np.vstack(surf)
        in_u = under.contains(surf)
        in_o = over.contains(surf)
        assert in_o.all()  # surface of the exact lens inside the over approx
        # surface points pulled inward by rho must be inside under approx
        inward = surf + (fr.mid - surf) * 0.0
        # move toward the axis by rho (radially)
        uw = fr.uw_of(surf)
        keep = uw[:, 1] > rho * 1.5
        radial = (surf - (fr.mid + uw[:, 0][:, None] * fr.axis))
        radial /= np.linalg.norm(radial, axis=1)[:, None]
        pulled = surf[keep] - rho * 1.0001 * radial[keep]
        ang = angles_at(pulled, a, b)
        still_in = ang > tmax  # only check points still inside the exact lens
        assert under.contains(pulled[still_in]).all()
