"""Hand-built scenario models: a large airport-style site, a dense tower
campus, a desk-scale optimization scene, and a thin analytic slab.

All regions are axis-aligned boxes so priority partitions and volumes are
exact by construction.  Everything is deterministic.
"""
from __future__ import annotations

import numpy as np

from .geom.poly import ConvexPolyhedron, PolyUnion
from .index import iuop_create
from .scenario import Deployment, QualityLevel, Scenario, SensorSpec, validate_scenario

import math


def _boxes(specs) -> PolyUnion:
    return PolyUnion([ConvexPolyhedron.box(lo, hi) for lo, hi in specs])


def _weights(k, qualities, priorities, table) -> dict:
    out = {}
    for (j, q, h), w in table.items():
        out[(j, q, h)] = float(w)
    for j in range(k + 1):
        for q in qualities:
            for h in priorities:
                out.setdefault((j, q, h), 0.0)
    return out


def build_airport(n_t1: int = 13, n_t2: int = 3) -> Scenario:
    """Large open site: 16 km^2 footprint, 100 m ceiling, 1.6 km^3 monitored.

    Three 4 km strips carry high priority; 52 box obstacles dot the service
    area.  Sensor types T1/T2 follow the reference cost/range profile with
    roof (+20%) and wall (+10%) overhead zones.
    """
    h = 100.0
    strips = [((0.0, y0, 0.0), (4000.0, y0 + 300.0, h)) for y0 in (0.0, 600.0, 1200.0)]
    gaps = [((0.0, y0, 0.0), (4000.0, y0 + 300.0, h)) for y0 in (300.0, 900.0)]
    service = []
    for i in range(3):
        for j in range(2):
            x0 = i * 4000.0 / 3
            y0 = 1500.0 + j * 1250.0
            service.append(((x0, y0, 0.0), (x0 + 4000.0 / 3, y0 + 1250.0, h)))
    high = _boxes(strips)
    low = _boxes(gaps + service)
    roi = PolyUnion(list(high) + list(low))  # 3 + 2 + 6 = 11 polyhedra

    rng = np.random.default_rng(20230901)
    obstacles = []
    for i in range(52):
        cx = rng.uniform(150.0, 3850.0)
        cy = rng.uniform(1650.0, 3850.0)
        wx = rng.uniform(40.0, 180.0)
        wy = rng.uniform(40.0, 180.0)
        hz = rng.uniform(8.0, 40.0)
        obstacles.append(
            ConvexPolyhedron.box(
                [cx - wx / 2, cy - wy / 2, 0.0], [cx + wx / 2, cy + wy / 2, hz]
            )
        )
    obstacles = PolyUnion(obstacles)

    qualities = [
        QualityLevel("q0", math.radians(25.0), math.radians(155.0)),
        QualityLevel("q1", math.radians(30.0), math.radians(150.0)),
    ]

    # ground poles 5-10 m anywhere off the strips; roofs of the first ten
    # obstacles carry a 20% overhead, their walls 10%
    ground = _boxes(
        [((0.0, y0, 5.0), (4000.0, y0 + 300.0, 10.0)) for y0 in (300.0, 900.0)]
        + [((0.0, 1500.0, 5.0), (4000.0, 4000.0, 10.0))]
    )
    roofs, walls = [], []
    for p in list(obstacles)[:10]:
        lo, hi = p.bbox
        roofs.append(ConvexPolyhedron.box([lo[0], lo[1], hi[2]], [hi[0], hi[1], hi[2] + 3.0]))
        walls.append(
            ConvexPolyhedron.box([lo[0] - 2.0, lo[1] - 2.0, 2.0], [hi[0] + 2.0, lo[1], hi[2]])
        )
    roofs = PolyUnion(roofs)
    walls = PolyUnion(walls)
    admissible = PolyUnion(list(ground) + list(roofs) + list(walls))

    def mk_sensor(i, stype, base, r0, r1, f):
        zones = (
            (ground, base),
            (walls, round(base * 1.1, 6)),
            (roofs, round(base * 1.2, 6)),
        )
        return SensorSpec(
            id=f"{stype.lower()}-{i}",
            type=stype,
            admissible=admissible,
            cost_zones=zones,
            capabilities={"q0": (r0, f), "q1": (r1, f)},
        )

    sensors = [mk_sensor(i, "T1", 1.0, 1000.0, 900.0, 5.0) for i in range(n_t1)]
    sensors += [mk_sensor(i, "T2", 1.5, 1250.0, 1110.0, 5.0) for i in range(n_t2)]

    table = {
        (0, "q0", "low"): 10.0,
        (0, "q0", "high"): 15.0,
        (0, "q1", "low"): 15.0,
        (0, "q1", "high"): 20.0,
        (1, "q0", "low"): 0.0,
        (1, "q0", "high"): 1.0,
        (1, "q1", "low"): 0.0,
        (1, "q1", "high"): 1.0,
    }
    sc = Scenario(
        roi=iuop_create(roi),
        obstacles=iuop_create(obstacles),
        priorities={"high": high, "low": low},
        qualities=qualities,
        sensors=sensors,
        k=1,
        weights=_weights(1, ["q0", "q1"], ["high", "low"], table),
        name="airport",
    )
    sc.v_r = 1.6e9
    validate_scenario(sc)
    return sc


def build_campus(n_t1: int = 4, n_t2: int = 3) -> Scenario:
    """Dense 400 m cube with 51 tower obstacles; high priority covers a top
    dome slab and the ground-level walkway layer."""
    edge = 400.0
    high = _boxes(
        [((0.0, 0.0, 320.0), (edge, edge, edge)), ((0.0, 0.0, 0.0), (edge, edge, 30.0))]
    )
    low = _boxes([((0.0, 0.0, 30.0), (edge, edge, 320.0))])
    roi = PolyUnion(list(high) + list(low))

    rng = np.random.default_rng(20230902)
    obstacles = []
    for i in range(51):
        cx = rng.uniform(30.0, 370.0)
        cy = rng.uniform(30.0, 370.0)
        wx = rng.uniform(15.0, 45.0)
        wy = rng.uniform(15.0, 45.0)
        hz = rng.uniform(40.0, 150.0)
        obstacles.append(
            ConvexPolyhedron.box(
                [cx - wx / 2, cy - wy / 2, 0.0],
                [min(cx + wx / 2, edge), min(cy + wy / 2, edge), hz],
            )
        )
    obstacles = PolyUnion(obstacles)

    qualities = [
        QualityLevel("q0", math.radians(25.0), math.radians(155.0)),
        QualityLevel("q1", math.radians(30.0), math.radians(150.0)),
    ]

    ground = _boxes([((0.0, 0.0, 3.0), (edge, edge, 15.0))])
    roofs, walls = [], []
    for p in list(obstacles)[:12]:
        lo, hi = p.bbox
        roofs.append(
            ConvexPolyhedron.box([lo[0], lo[1], hi[2]], [hi[0], hi[1], min(hi[2] + 10.0, edge)])
        )
        walls.append(
            ConvexPolyhedron.box([lo[0] - 2.0, lo[1] - 2.0, 5.0], [hi[0] + 2.0, lo[1], hi[2]])
        )
    roofs = PolyUnion(roofs)
    walls = PolyUnion(walls)

    t1_adm = ground
    t2_adm = PolyUnion(list(ground) + list(roofs) + list(walls))

    sensors = [
        SensorSpec(
            id=f"t1-{i}",
            type="T1",
            admissible=t1_adm,
            cost_zones=((ground, 1.0),),
            capabilities={"q0": (500.0, 5.0), "q1": (400.0, 5.0)},
        )
        for i in range(n_t1)
    ]
    sensors += [
        SensorSpec(
            id=f"t2-{i}",
            type="T2",
            admissible=t2_adm,
            cost_zones=((ground, 1.17), (roofs, round(1.17 * 1.05, 6)), (walls, round(1.17 * 1.1, 6))),
            capabilities={"q0": (700.0, 5.0), "q1": (600.0, 5.0)},
        )
        for i in range(n_t2)
    ]

    table = {
        (0, "q0", "low"): 5.0,
        (0, "q0", "high"): 7.0,
        (1, "q0", "low"): 5.0,
        (1, "q0", "high"): 7.0,
        (0, "q1", "low"): 0.5,
        (0, "q1", "high"): 1.0,
        (1, "q1", "low"): 1.0,
        (1, "q1", "high"): 2.0,
    }
    sc = Scenario(
        roi=iuop_create(roi),
        obstacles=iuop_create(obstacles),
        priorities={"high": high, "low": low},
        qualities=qualities,
        sensors=sensors,
        k=1,
        weights=_weights(1, ["q0", "q1"], ["high", "low"], table),
        name="campus",
    )
    sc.v_r = edge ** 3
    validate_scenario(sc)
    return sc


def build_desk(n_sensors: int = 4) -> Scenario:
    """100 x 100 x 20 m box with one central 20 x 20 x 10 obstacle and
    identical ground-pole sensors; sized for minute-scale experiments."""
    high = _boxes([((0.0, 0.0, 10.0), (100.0, 100.0, 20.0))])
    low = _boxes([((0.0, 0.0, 0.0), (100.0, 100.0, 10.0))])
    roi = PolyUnion(list(high) + list(low))
    obstacles = _boxes([((40.0, 40.0, 0.0), (60.0, 60.0, 10.0))])
    ground = _boxes([((0.0, 0.0, 0.5), (100.0, 100.0, 5.0))])
    qualities = [
        QualityLevel("q0", math.radians(25.0), math.radians(155.0)),
        QualityLevel("q1", math.radians(30.0), math.radians(150.0)),
    ]
    sensors = [
        SensorSpec(
            id=f"s{i}",
            type="T1",
            admissible=ground,
            cost_zones=((ground, 1.0),),
            capabilities={"q0": (70.0, 2.0), "q1": (60.0, 2.0)},
        )
        for i in range(n_sensors)
    ]
    table = {
        (0, "q0", "low"): 10.0,
        (0, "q0", "high"): 15.0,
        (0, "q1", "low"): 15.0,
        (0, "q1", "high"): 20.0,
        (1, "q0", "low"): 1.0,
        (1, "q0", "high"): 2.0,
        (1, "q1", "low"): 1.0,
        (1, "q1", "high"): 2.0,
    }
    sc = Scenario(
        roi=iuop_create(roi),
        obstacles=iuop_create(obstacles),
        priorities={"high": high, "low": low},
        qualities=qualities,
        sensors=sensors,
        k=1,
        weights=_weights(1, ["q0", "q1"], ["high", "low"], table),
        name="desk",
    )
    sc.v_r = 100.0 * 100.0 * 20.0
    validate_scenario(sc)
    return sc


def build_slab(r: float = 80.0, sep: float = 90.0) -> tuple[Scenario, Deployment]:
    """Thin 200 x 200 x 2 slab with two sensors and no obstacles.

    The uncovered volume has an accurate independent value by fine 2D
    quadrature, making the scene the reference for estimator guarantees.
    """
    roi = _boxes([((0.0, 0.0, 0.0), (200.0, 200.0, 2.0))])
    ground = _boxes([((0.0, 0.0, 0.0), (200.0, 200.0, 2.0))])
    qualities = [QualityLevel("q0", math.radians(25.0), math.radians(155.0))]
    sensors = [
        SensorSpec(
            id=f"s{i}",
            type="T1",
            admissible=ground,
            cost_zones=((ground, 1.0),),
            capabilities={"q0": (r, 0.5)},
        )
        for i in range(2)
    ]
    sc = Scenario(
        roi=iuop_create(roi),
        obstacles=iuop_create(PolyUnion([])),
        priorities={"all": roi},
        qualities=qualities,
        sensors=sensors,
        k=0,
        weights={(0, "q0", "all"): 10.0},
        name="slab",
    )
    sc.v_r = 200.0 * 200.0 * 2.0
    validate_scenario(sc)
    d = Deployment(
        {
            "s0": [100.0 - sep / 2, 100.0, 1.0],
            "s1": [100.0 + sep / 2, 100.0, 1.0],
        }
    )
    return sc, d


BUILDERS = {
    "airport": build_airport,
    "campus": build_campus,
    "desk": build_desk,
}
