"""Scenario model: loading, validation, placement cost."""
import json
import math

import numpy as np
import pytest

from covertool.fixtures import build_airport, build_campus, build_desk
from covertool.geom import ConvexPolyhedron, PolyUnion
from covertool.scenario import (
    Deployment,
    ScenarioError,
    load_scenario,
    placement_cost,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
    validate_scenario,
)


@pytest.fixture(scope="module")
def airport():
    return build_airport()


@pytest.fixture(scope="module")
def campus():
    return build_campus()


class TestLoading:
    def test_airport_shape_and_volume(self, airport, tmp_path_factory):
        assert len(airport.roi) == 11
        assert len(airport.obstacles) == 52
        assert airport.v_r == pytest.approx(1.6e9, rel=0.01)
        path = tmp_path_factory.mktemp("sc") / "airport.json"
        save_scenario(airport, path)
        sc2 = load_scenario(path)
        assert sc2.v_r == pytest.approx(airport.v_r, rel=1e-9)
        assert len(sc2.sensors) == len(airport.sensors)
        assert sc2.weights == airport.weights

    def test_campus_shape(self, campus):
        assert len(campus.obstacles) == 51
        bb = campus.bbox
        assert np.allclose(bb[1] - bb[0], [400, 400, 400])

    def test_schema_mismatch(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"schema": "other/9"}))
        with pytest.raises(ScenarioError, match="schema"):
            load_scenario(p)

    def test_overlapping_priorities_rejected(self, tmp_path):
        sc = build_desk()
        data = scenario_to_json(sc)
        # make "high" overlap "low" by a full box
        data["priorities"]["high"] = data["priorities"]["low"]
        with pytest.raises(ScenarioError, match="partition|overlap"):
            scenario_from_json(data)

    def test_unbounded_roi_rejected(self, tmp_path):
        sc = build_desk()
        data = scenario_to_json(sc)
        data["roi"] = [{"halfspaces": [[1, 0, 0, 1.0], [0, 1, 0, 1.0], [0, 0, 1, 1.0], [0, 0, -1, 1.0]]}]
        with pytest.raises(ScenarioError):
            scenario_from_json(data)

    def test_capability_monotonicity_rejected(self):
        sc = build_desk()
        data = scenario_to_json(sc)
        data["sensors"][0]["capabilities"]["q1"]["r"] = 99999.0
        with pytest.raises(ScenarioError, match="non-increasing"):
            scenario_from_json(data)

    def test_fresnel_monotonicity_rejected(self):
        sc = build_desk()
        data = scenario_to_json(sc)
        data["sensors"][0]["capabilities"]["q1"]["f"] = 0.0001
        with pytest.raises(ScenarioError, match="Fresnel"):
            scenario_from_json(data)

    def test_missing_weight_rejected(self):
        sc = build_desk()
        data = scenario_to_json(sc)
        data["weights"] = data["weights"][1:]
        with pytest.raises(ScenarioError, match="weights"):
            scenario_from_json(data)

    def test_obstacle_outside_roi_rejected(self):
        sc = build_desk()
        data = scenario_to_json(sc)
        stray = ConvexPolyhedron.box([500, 500, 0], [520, 520, 10])
        data["obstacles"].append({"halfspaces": [[float(v) for v in row] for row in stray.halfspaces]})
        with pytest.raises(ScenarioError, match="obstacles"):
            scenario_from_json(data)

    def test_quality_nesting_rejected(self):
        sc = build_desk()
        data = scenario_to_json(sc)
        data["qualities"][1]["theta_min_deg"] = 10.0  # wider than q0: not nested
        with pytest.raises(ScenarioError, match="nest"):
            scenario_from_json(data)


class TestPlacementCost:
    def test_ground_mix(self, airport):
        pos = {s.id: [50.0 + 180 * i, 450.0, 7.0] for i, s in enumerate(airport.sensors)}
        assert placement_cost(airport, Deployment(pos)) == pytest.approx(17.5)

    def test_roof_overhead(self, airport):
        roof_region = airport.sensors[0].cost_zones[2][0]
        p = roof_region.polys[0].centroid
        d = Deployment({airport.sensors[0].id: p.tolist()})
        assert placement_cost(airport, d) == pytest.approx(1.2)

    def test_empty_deployment(self, airport):
        assert placement_cost(airport, Deployment({})) == 0.0

    def test_position_outside_zones(self, airport):
        d = Deployment({airport.sensors[0].id: [2000.0, 2000.0, 90.0]})
        with pytest.raises(ScenarioError, match="no cost zone"):
            placement_cost(airport, d)

    def test_first_zone_wins(self):
        ground = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [10, 10, 10])])
        inner = PolyUnion([ConvexPolyhedron.box([2, 2, 2], [8, 8, 8])])
        from covertool.scenario import SensorSpec, QualityLevel, Scenario
        from covertool.index import iuop_create

        sensor = SensorSpec(
            id="s",
            type="T",
            admissible=ground,
            cost_zones=((inner, 5.0), (ground, 1.0)),
            capabilities={"q0": (100.0, 1.0)},
        )
        sc = Scenario(
            roi=iuop_create(ground),
            obstacles=iuop_create(PolyUnion([])),
            priorities={"all": ground},
            qualities=[QualityLevel("q0", 0.4, 2.7)],
            sensors=[sensor],
            k=0,
            weights={(0, "q0", "all"): 1.0},
        )
        sc.v_r = 1000.0
        validate_scenario(sc)
        assert placement_cost(sc, Deployment({"s": [5, 5, 5]})) == 5.0
        assert placement_cost(sc, Deployment({"s": [1, 1, 1]})) == 1.0


class TestDeploymentIO:
    def test_roundtrip(self, tmp_path):
        from covertool.scenario import load_deployment, save_deployment

        d = Deployment({"a": [1.5, 2.5, 3.5], "b": [0, 0, 1]})
        p = tmp_path / "d.json"
        save_deployment(d, p)
        d2 = load_deployment(p)
        for k in d.positions:
            assert np.allclose(d.positions[k], d2.positions[k])

    def test_bad_position(self):
        with pytest.raises(ScenarioError):
            Deployment({"a": [1.0, float("nan"), 0.0]})
