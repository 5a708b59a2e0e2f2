"""Shared machinery for the acceptance suite: scene generator and analytic
distance-to-curved-surface helpers."""
import math

import numpy as np

from covertool.coverage import DeploymentGeometry
from covertool.geom import ConvexPolyhedron, PolyUnion
from covertool.geom.curved import RevolutionFrame, _angle_disk
from covertool.index import iuop_create
from covertool.scenario import Deployment, QualityLevel, Scenario, SensorSpec


def random_scene(seed: int):
    """Small random scene: 2-4 sensors, 0-2 box obstacles, 2 quality levels."""
    rng = np.random.default_rng([20240101, seed])
    n_sensors = int(rng.integers(2, 5))
    n_obs = int(rng.integers(0, 3))
    box_hi = np.array([36.0, 36.0, 14.0])
    roi = PolyUnion([ConvexPolyhedron.box([0, 0, 0], box_hi)])
    ground = PolyUnion([ConvexPolyhedron.box([0, 0, 0.5], [36, 36, 4])])
    obstacles = []
    for _ in range(n_obs):
        lo = rng.uniform([4, 4, 0], [26, 26, 1])
        size = rng.uniform([3, 3, 3], [8, 8, 7])
        obstacles.append(ConvexPolyhedron.box(lo, np.minimum(lo + size, box_hi - 0.5)))
    obstacles = PolyUnion(obstacles)
    r0 = float(rng.uniform(18.0, 26.0))
    r1 = r0 * float(rng.uniform(0.8, 0.92))
    f = float(rng.uniform(0.8, 1.6))
    sensors = [
        SensorSpec(
            id=f"s{i}",
            type="T",
            admissible=ground,
            cost_zones=((ground, 1.0),),
            capabilities={"q0": (r0, f), "q1": (r1, f * 1.2)},
        )
        for i in range(n_sensors)
    ]
    sc = Scenario(
        roi=iuop_create(roi),
        obstacles=iuop_create(obstacles),
        priorities={"all": roi},
        qualities=[
            QualityLevel("q0", math.radians(25), math.radians(155)),
            QualityLevel("q1", math.radians(30), math.radians(150)),
        ],
        sensors=sensors,
        k=1,
        weights={(j, q, "all"): 1.0 for j in (0, 1) for q in ("q0", "q1")},
    )
    sc.v_r = float(np.prod(box_hi))
    # sensor positions clear of obstacles
    positions = {}
    for i in range(n_sensors):
        for _ in range(200):
            p = rng.uniform([2, 2, 1], [34, 34, 3.5])
            if not (len(obstacles) and obstacles.contains(p[None, :], 0.5)[0]):
                positions[f"s{i}"] = p
                break
    d = Deployment(positions)
    return sc, d


def probe_points(sc: Scenario, seed: int, n: int = 10_000) -> np.ndarray:
    rng = np.random.default_rng([77, seed])
    lo, hi = sc.bbox
    return rng.uniform(lo, hi, size=(n, 3))


def curved_surface_band(pts, d: Deployment, sc: Scenario, qs, rho: float) -> np.ndarray:
    """True where a point lies within rho of any curved region boundary:
    range spheres, Fresnel-clearance level sets, or angle revolution surfaces
    (all evaluated analytically)."""
    geom = DeploymentGeometry(d, sc)
    near = np.zeros(len(pts), dtype=bool)
    if not geom.ids:
        return near
    dists = geom.point_distances(pts)
    clear = geom.sight_clearances(pts)
    for q in qs:
        ql = sc.quality(q)
        for si in range(len(geom.ids)):
            near |= np.abs(dists[:, si] - geom.specs[si].range_for(q)) <= rho
            near |= np.abs(clear[:, si] - geom.specs[si].fresnel_for(q)) <= rho
        for (i, j) in geom.pairs:
            fr = RevolutionFrame(geom.pos[i], geom.pos[j])
            uw = fr.uw_of(pts)
            for th in (ql.theta_min, ql.theta_max):
                c, rr = _angle_disk(fr.half, th)
                near |= np.abs(np.hypot(uw[:, 0], uw[:, 1] - c) - rr) <= rho
    return near


def polyunion_from_payload(entries) -> PolyUnion:
    """Rebuild emitted polyhedra from their serialized halfspaces + vertices."""
    polys = []
    for e in entries:
        hs = np.asarray(e["halfspaces"], dtype=float)
        verts = np.asarray(e["vertices"], dtype=float)
        polys.append(ConvexPolyhedron(hs, verts))
    return PolyUnion(polys)
