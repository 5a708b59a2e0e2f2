"""Problem data model: region of interest, obstacles, priorities, sensors, weights.

Scenario files are JSON (schema key ``covertool/1``): lengths in meters,
angles in degrees (converted to radians on load), costs unitless money.
Polyhedra serialize as ``{"halfspaces": [[nx, ny, nz, b], ...]}`` meaning
``n . x <= b``; regions are arrays of polyhedra.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geom.ops import bool_diff, bool_intersect, union_volume
from .geom.poly import TAU_GEOM, ConvexPolyhedron, GeometryError, PolyUnion
from .index import IndexedUnion, iuop_create

SCHEMA = "covertool/1"


class ScenarioError(ValueError):
    """Validation failure, naming the offending field and reason."""


@dataclass(frozen=True)
class QualityLevel:
    """Sensing quality level with its admissible triangulation angle range."""

    id: str
    theta_min: float  # radians
    theta_max: float

    def __post_init__(self):
        if not 0.0 < self.theta_min < self.theta_max < math.pi:
            raise ScenarioError(
                f"quality {self.id}: need 0 < theta_min < theta_max < pi, "
                f"got [{self.theta_min}, {self.theta_max}] rad"
            )


@dataclass(frozen=True)
class SensorSpec:
    """One deployable sensor: admissible region, zoned costs, per-quality reach."""

    id: str
    type: str
    admissible: PolyUnion
    cost_zones: tuple  # ((PolyUnion, cost), ...) in declared order
    capabilities: dict  # quality id -> (max range r, Fresnel radius f)

    def range_for(self, q: str) -> float:
        return self.capabilities[q][0]

    def fresnel_for(self, q: str) -> float:
        return self.capabilities[q][1]


@dataclass
class Deployment:
    """Assignment of a 3D position to each sensor id (the search variable)."""

    positions: dict

    def __post_init__(self):
        self.positions = {
            str(k): np.asarray(v, dtype=float) for k, v in self.positions.items()
        }
        for sid, p in self.positions.items():
            if p.shape != (3,) or not np.all(np.isfinite(p)):
                raise ScenarioError(f"deployment position for {sid!r} must be a finite 3-vector")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "positions": {k: [float(x) for x in v] for k, v in self.positions.items()},
        }

    @staticmethod
    def from_json(data: dict) -> "Deployment":
        if data.get("schema") != SCHEMA:
            raise ScenarioError(f"deployment schema mismatch: {data.get('schema')!r}")
        return Deployment(dict(data["positions"]))


@dataclass
class Scenario:
    """Validated problem instance; immutable after load, shared across workers."""

    roi: IndexedUnion
    obstacles: IndexedUnion
    priorities: dict  # h -> PolyUnion
    qualities: list  # ascending order, qualities[0] is the lowest level q0
    sensors: list
    k: int
    weights: dict  # (j, q_id, h) -> money per unit volume
    v_r: float = field(default=0.0)
    name: str = ""

    @property
    def quality_ids(self):
        return [q.id for q in self.qualities]

    def quality(self, q_id: str) -> QualityLevel:
        for q in self.qualities:
            if q.id == q_id:
                return q
        raise ScenarioError(f"unknown quality level {q_id!r}")

    def sensor(self, sid: str) -> SensorSpec:
        for s in self.sensors:
            if s.id == sid:
                return s
        raise ScenarioError(f"unknown sensor {sid!r}")

    @property
    def bbox(self) -> np.ndarray:
        return self.roi.bbox

    def priority_of(self, point: np.ndarray, tol: float = TAU_GEOM) -> str | None:
        """The unique priority label of a point, None if outside all regions."""
        p = np.atleast_2d(np.asarray(point, dtype=float))
        for scale in (1.0, 10.0, 1e3):
            for h, region in self.priorities.items():
                if region.contains(p, scale * tol)[0]:
                    return h
        return None

    def priorities_of(self, points: np.ndarray, tol: float = TAU_GEOM) -> np.ndarray:
        """Vectorized priority labels (index into sorted label list, -1 outside)."""
        labels = sorted(self.priorities)
        pts = np.atleast_2d(points)
        out = np.full(len(pts), -1, dtype=np.int64)
        for i, h in enumerate(labels):
            rest = out < 0
            if not rest.any():
                break
            hit = self.priorities[h].contains(pts[rest], tol)
            out[np.nonzero(rest)[0][hit]] = i
        return out


# -- JSON (de)serialization ----------------------------------------------------


def poly_to_json(p: ConvexPolyhedron) -> dict:
    return {"halfspaces": [[float(x) for x in row] for row in p.halfspaces]}


def union_to_json(u) -> list:
    return [poly_to_json(p) for p in u]


def union_from_json(data, where: str, tol: float = TAU_GEOM) -> PolyUnion:
    polys = []
    for i, entry in enumerate(data):
        hs = np.asarray(entry["halfspaces"], dtype=float)
        if hs.ndim != 2 or hs.shape[1] != 4:
            raise ScenarioError(f"{where}[{i}]: halfspaces must be an Nx4 array")
        try:
            poly = ConvexPolyhedron.from_halfspaces(hs, tol)
        except GeometryError as exc:
            raise ScenarioError(f"{where}[{i}]: {exc}")
        if poly is None:
            raise ScenarioError(f"{where}[{i}]: empty or degenerate polyhedron")
        polys.append(poly)
    return PolyUnion(polys)


def scenario_to_json(sc: Scenario) -> dict:
    return {
        "schema": SCHEMA,
        "name": sc.name,
        "roi": union_to_json(sc.roi),
        "obstacles": union_to_json(sc.obstacles),
        "priorities": {h: union_to_json(u) for h, u in sc.priorities.items()},
        "qualities": [
            {
                "id": q.id,
                "theta_min_deg": math.degrees(q.theta_min),
                "theta_max_deg": math.degrees(q.theta_max),
            }
            for q in sc.qualities
        ],
        "sensors": [
            {
                "id": s.id,
                "type": s.type,
                "admissible": union_to_json(s.admissible),
                "cost_zones": [
                    {"region": union_to_json(region), "cost": cost}
                    for region, cost in s.cost_zones
                ],
                "capabilities": {
                    q: {"r": rf[0], "f": rf[1]} for q, rf in s.capabilities.items()
                },
            }
            for s in sc.sensors
        ],
        "k": sc.k,
        "weights": [
            {"j": j, "q": q, "h": h, "w": w} for (j, q, h), w in sorted(sc.weights.items())
        ],
    }


def scenario_from_json(data: dict, validate: bool = True) -> Scenario:
    if data.get("schema") != SCHEMA:
        raise ScenarioError(f"scenario schema mismatch: {data.get('schema')!r}")
    for key in ("roi", "priorities", "qualities", "sensors", "k", "weights"):
        if key not in data:
            raise ScenarioError(f"{key}: missing required top-level key")
    try:
        roi_union = union_from_json(data["roi"], "roi")
    except GeometryError as exc:
        raise ScenarioError(f"roi: {exc}")
    if not roi_union:
        raise ScenarioError("roi: empty region of interest")
    obstacles = union_from_json(data.get("obstacles", []), "obstacles")
    priorities = {
        str(h): union_from_json(u, f"priorities[{h}]")
        for h, u in data["priorities"].items()
    }
    qualities = [
        QualityLevel(
            str(q["id"]),
            math.radians(float(q["theta_min_deg"])),
            math.radians(float(q["theta_max_deg"])),
        )
        for q in data["qualities"]
    ]
    sensors = []
    for s in data["sensors"]:
        caps = {
            str(q): (float(v["r"]), float(v["f"])) for q, v in s["capabilities"].items()
        }
        zones = tuple(
            (union_from_json(z["region"], f"sensors[{s['id']}].cost_zones"), float(z["cost"]))
            for z in s["cost_zones"]
        )
        sensors.append(
            SensorSpec(
                id=str(s["id"]),
                type=str(s.get("type", "T1")),
                admissible=union_from_json(s["admissible"], f"sensors[{s['id']}].admissible"),
                cost_zones=zones,
                capabilities=caps,
            )
        )
    weights = {
        (int(w["j"]), str(w["q"]), str(w["h"])): float(w["w"]) for w in data["weights"]
    }
    sc = Scenario(
        roi=iuop_create(roi_union),
        obstacles=iuop_create(obstacles),
        priorities=priorities,
        qualities=qualities,
        sensors=sensors,
        k=int(data["k"]),
        weights=weights,
        name=str(data.get("name", "")),
    )
    sc.v_r = union_volume(sc.roi.polys)
    if validate:
        validate_scenario(sc)
    return sc


def load_scenario(path, validate: bool = True) -> Scenario:
    """Load and validate a scenario file; raises ScenarioError naming the problem."""
    with open(path) as f:
        data = json.load(f)
    return scenario_from_json(data, validate=validate)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_json(sc)))


def load_deployment(path) -> Deployment:
    with open(path) as f:
        return Deployment.from_json(json.load(f))


def save_deployment(d: Deployment, path) -> None:
    Path(path).write_text(json.dumps(d.to_json(), indent=1))


# -- validation -----------------------------------------------------------------


def validate_scenario(sc: Scenario) -> None:
    if sc.k < 0:
        raise ScenarioError(f"k: fault budget must be >= 0, got {sc.k}")
    if sc.v_r <= 0:
        raise ScenarioError("roi: zero-volume region of interest")
    if not sc.qualities:
        raise ScenarioError("qualities: at least one level required")

    # quality nesting: higher levels have narrower angle ranges
    for lo, hi in zip(sc.qualities, sc.qualities[1:]):
        if hi.theta_min < lo.theta_min - 1e-12 or hi.theta_max > lo.theta_max + 1e-12:
            raise ScenarioError(
                f"qualities: range of {hi.id} must nest inside {lo.id}"
            )

    ids = [s.id for s in sc.sensors]
    if len(set(ids)) != len(ids):
        raise ScenarioError("sensors: duplicate sensor ids")

    q_order = sc.quality_ids
    for s in sc.sensors:
        missing = [q for q in q_order if q not in s.capabilities]
        if missing:
            raise ScenarioError(f"sensors[{s.id}].capabilities: missing levels {missing}")
        for lo, hi in zip(q_order, q_order[1:]):
            if s.range_for(hi) > s.range_for(lo) + 1e-12:
                raise ScenarioError(
                    f"sensors[{s.id}]: range must be non-increasing with quality "
                    f"({lo}: {s.range_for(lo)}, {hi}: {s.range_for(hi)})"
                )
            if s.fresnel_for(hi) < s.fresnel_for(lo) - 1e-12:
                raise ScenarioError(
                    f"sensors[{s.id}]: Fresnel radius must be non-decreasing with quality"
                )
        if not s.cost_zones:
            raise ScenarioError(f"sensors[{s.id}].cost_zones: empty")
        for region, cost in s.cost_zones:
            if cost <= 0:
                raise ScenarioError(f"sensors[{s.id}].cost_zones: cost must be positive")
        if not s.admissible:
            raise ScenarioError(f"sensors[{s.id}].admissible: empty region")
        zones_union = PolyUnion([p for region, _ in s.cost_zones for p in region])
        uncosted = bool_diff(s.admissible, zones_union, "under")
        v_adm = union_volume(s.admissible)
        if union_volume(uncosted) > 1e-6 * max(v_adm, 1.0):
            raise ScenarioError(
                f"sensors[{s.id}].cost_zones: admissible region not covered by cost zones"
            )

    # weights: present and non-negative for every (j, q, h)
    for j in range(sc.k + 1):
        for q in q_order:
            for h in sc.priorities:
                if (j, q, h) not in sc.weights:
                    raise ScenarioError(f"weights: missing entry (j={j}, q={q}, h={h})")
    for key, w in sc.weights.items():
        if w < 0:
            raise ScenarioError(f"weights: negative weight at {key}")

    # obstacles inside the roi (volumetric, tolerance tau)
    if sc.obstacles:
        v_out = union_volume(bool_diff(sc.obstacles.polys, sc.roi.polys, "under"))
        v_obs = union_volume(sc.obstacles.polys)
        if v_out > 1e-6 * max(v_obs, 1.0):
            raise ScenarioError("obstacles: not contained in the region of interest")

    # priorities partition the roi volumetrically
    labels = sorted(sc.priorities)
    if not labels:
        raise ScenarioError("priorities: at least one region required")
    for i, h1 in enumerate(labels):
        for h2 in labels[i + 1 :]:
            v = union_volume(bool_intersect(sc.priorities[h1], sc.priorities[h2]))
            if v >= 1e-6 * sc.v_r:
                raise ScenarioError(
                    f"priorities: not a partition ({h1} and {h2} overlap, volume {v:.3g})"
                )
    all_pr = PolyUnion([p for h in labels for p in sc.priorities[h]])
    v_all = union_volume(all_pr)
    if abs(v_all - sc.v_r) > 1e-6 * sc.v_r:
        raise ScenarioError(
            f"priorities: union volume {v_all:.6g} does not match roi volume {sc.v_r:.6g}"
        )


# -- placement cost --------------------------------------------------------------


def placement_cost(sc: Scenario, d: Deployment, tol: float = TAU_GEOM) -> float:
    """Sum of per-sensor zone costs; a position's cost comes from the first
    declared zone containing it."""
    total = 0.0
    for s in sc.sensors:
        if s.id not in d.positions:
            continue
        pos = d.positions[s.id][None, :]
        for region, cost in s.cost_zones:
            if region.contains(pos, tol)[0]:
                total += cost
                break
        else:
            raise ScenarioError(
                f"sensors[{s.id}]: position {d.positions[s.id].tolist()} is in no cost zone"
            )
    return total
