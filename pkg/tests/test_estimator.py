"""Monte-Carlo estimator: sampling uniformity, loss samples, stopping guarantees."""
import math

import numpy as np
import pytest

from covertool.estimator import (
    EstimatorConfig,
    estimate_objective,
    sample_points,
    sample_Z,
    sample_Z_batch,
)
from covertool.fixtures import build_airport, build_campus, build_desk, build_slab
from covertool.geom import ConvexPolyhedron, PolyUnion
from covertool.index import iuop_create
from covertool.scenario import Deployment, QualityLevel, Scenario, SensorSpec


def slab_uncovered_cost(sc, d, r=80.0, nx=500, nz=10):
    """Fine-quadrature reference for the slab scene's uncovered cost."""
    p1 = d.positions["s0"]
    p2 = d.positions["s1"]
    tmin = sc.qualities[0].theta_min
    tmax = sc.qualities[0].theta_max
    xs = (np.arange(nx) + 0.5) * 200.0 / nx
    zs = (np.arange(nz) + 0.5) * 2.0 / nz
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    base = np.column_stack([X.ravel(), Y.ravel()])
    frac = 0.0
    for z in zs:
        pts = np.column_stack([base, np.full(len(base), z)])
        d1 = np.linalg.norm(pts - p1, axis=1)
        d2 = np.linalg.norm(pts - p2, axis=1)
        u = p1 - pts
        v = p2 - pts
        ang = np.arccos(np.clip((u * v).sum(1) / np.maximum(d1 * d2, 1e-30), -1, 1))
        cov = (d1 <= r) & (d2 <= r) & (ang >= tmin) & (ang <= tmax)
        frac += float((~cov).mean())
    frac /= nz
    return frac * sc.v_r * sc.weights[(0, "q0", "all")]


class TestSamplePoints:
    def test_box_roi_means(self):
        sc = build_desk()
        rng = np.random.default_rng(0)
        pts = sample_points(sc, rng, 100_000)
        center = np.array([50, 50, 10.0])
        half = np.array([100, 100, 20.0])
        sigma = half / math.sqrt(12) / math.sqrt(len(pts))
        assert np.all(np.abs(pts.mean(axis=0) - center) <= 3 * sigma)

    def test_l_shaped_occupancy(self):
        arm_a = ConvexPolyhedron.box([0, 0, 0], [10, 2, 2])  # volume 40
        arm_b = ConvexPolyhedron.box([0, 2, 0], [2, 10, 2])  # volume 32
        roi = PolyUnion([arm_a, arm_b])
        sc = Scenario(
            roi=iuop_create(roi),
            obstacles=iuop_create(PolyUnion([])),
            priorities={"all": roi},
            qualities=[QualityLevel("q0", 0.4, 2.7)],
            sensors=[],
            k=0,
            weights={(0, "q0", "all"): 1.0},
        )
        sc.v_r = 72.0
        rng = np.random.default_rng(1)
        pts = sample_points(sc, rng, 100_000)
        in_a = arm_a.contains(pts)
        p = 40.0 / 72.0
        sigma = math.sqrt(p * (1 - p) / len(pts))
        assert abs(in_a.mean() - p) <= 3 * sigma

    def test_all_samples_inside(self):
        sc = build_campus()
        rng = np.random.default_rng(2)
        pts = sample_points(sc, rng, 100_000)
        assert sc.roi.contains(pts).all()


class TestSampleZ:
    def test_fully_covered_point_zero(self):
        sc = build_desk()
        d = Deployment({"s0": [30, 30, 2], "s1": [70, 30, 2], "s2": [30, 70, 2], "s3": [70, 70, 2]})
        # south of the obstacle: clear sight to s0 and s1, angle ~96 degrees
        z = sample_Z([50.0, 15.0, 12.0], d, sc)
        assert z[(0, "q0")] == 0.0
        assert z[(0, "q1")] == 0.0

    def test_uncovered_high_priority_weight(self):
        """An uncovered high-priority point yields V_R * w for each (j, q)."""
        sc = build_airport(n_t1=2, n_t2=0)
        d = Deployment({s.id: [50 + 10 * i, 450.0, 7.0] for i, s in enumerate(sc.sensors)})
        x = [3900.0, 150.0, 90.0]  # far high-priority corner, out of range
        z = sample_Z(x, d, sc)
        assert z[(0, "q0")] == pytest.approx(sc.v_r * 15.0)
        assert z[(0, "q1")] == pytest.approx(sc.v_r * 20.0)
        assert z[(1, "q0")] == pytest.approx(sc.v_r * 1.0)

    def test_obstacle_point_zero(self):
        sc = build_desk()
        d = Deployment({"s0": [10, 10, 2]})
        z = sample_Z([50.0, 50.0, 5.0], d, sc)  # inside the central obstacle
        assert all(v == 0.0 for v in z.values())

    def test_unbiasedness_boxed_coverage(self):
        """Mean of sample_Z matches the exact weighted uncovered volume on a
        scene whose uncovered set is a box complement."""
        roi = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [10, 10, 10])])
        sc = build_desk()
        d = Deployment({"s0": [20, 20, 2], "s1": [80, 20, 2], "s2": [20, 80, 2], "s3": [80, 80, 2]})
        rng = np.random.default_rng(3)
        pts = sample_points(sc, rng, 200_000)
        zs = sample_Z_batch(pts, d, sc)
        from covertool.coverage import cover_jq_batch

        cov = cover_jq_batch(pts, d, sc, [0], ["q0"])[(0, "q0")]
        labels = sorted(sc.priorities)
        pr = sc.priorities_of(pts)
        want = np.zeros(len(pts))
        for i, h in enumerate(labels):
            want += np.where(pr == i, sc.weights[(0, "q0", h)], 0.0)
        want = want * sc.v_r * (1 - cov)
        got = zs[(0, "q0")]
        assert np.allclose(got, want)


class TestEstimateObjective:
    def test_zero_uncovered_fast_path(self):
        """Sensors saturating a tiny scene: the hypothesis-test branch exits early."""
        roi = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [10, 10, 4])])
        ground = roi
        sensors = [
            SensorSpec(
                id=f"s{i}",
                type="T",
                admissible=ground,
                cost_zones=((ground, 1.0),),
                capabilities={"q0": (200.0, 0.1)},
            )
            for i in range(3)
        ]
        sc = Scenario(
            roi=iuop_create(roi),
            obstacles=iuop_create(PolyUnion([])),
            priorities={"all": roi},
            qualities=[QualityLevel("q0", math.radians(10), math.radians(170))],
            sensors=sensors,
            k=0,
            weights={(0, "q0", "all"): 0.01},
        )
        sc.v_r = 400.0
        d = Deployment({"s0": [1, 1, 1], "s1": [9, 1, 1], "s2": [5, 9, 3]})
        est = estimate_objective(d, sc, EstimatorConfig(eps=0.05, delta=0.05, seed=7))
        assert est.uncov_estimate == 0.0
        assert est.terminated_by == "stopping-rule"
        assert est.total == est.placement
        assert est.samples_used < 100_000

    def test_slab_estimate_matches_quadrature(self):
        sc, d = build_slab()
        want = slab_uncovered_cost(sc, d)
        est = estimate_objective(d, sc, EstimatorConfig(eps=0.05, delta=0.05, seed=11))
        assert est.uncov_estimate == pytest.approx(want, rel=0.05)
        assert est.total == est.placement + est.uncov_estimate

    def test_seed_determinism(self):
        sc, d = build_slab()
        cfg = EstimatorConfig(eps=0.1, delta=0.1, seed=42)
        a = estimate_objective(d, sc, cfg)
        b = estimate_objective(d, sc, cfg)
        assert a.uncov_estimate == b.uncov_estimate
        assert a.samples_used == b.samples_used

    def test_default_config_is_one_percent(self):
        cfg = EstimatorConfig()
        assert cfg.eps == 0.01
        assert cfg.delta == 0.01

    def test_guarantee_audit_small(self):
        """48 seeded runs at eps=delta=0.1: failure fraction within budget."""
        sc, d = build_slab()
        want = slab_uncovered_cost(sc, d)
        ok = 0
        for seed in range(48):
            est = estimate_objective(d, sc, EstimatorConfig(eps=0.1, delta=0.1, seed=seed))
            if abs(est.uncov_estimate - want) <= 0.1 * want:
                ok += 1
        assert ok >= 41  # delta = 0.1 plus slack on 48 runs
