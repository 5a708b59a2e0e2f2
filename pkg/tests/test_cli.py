"""End-to-end command-line behavior: exit codes, files, schemas, round trips."""
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from covertool.cli import main
from covertool.fixtures import build_slab
from covertool.geom import ConvexPolyhedron, PolyUnion
from covertool.index import iuop_create
from covertool.scenario import (
    Deployment,
    QualityLevel,
    Scenario,
    SensorSpec,
    load_scenario,
    save_deployment,
    save_scenario,
)


def small_scene(tmp, n_sensors=2, obstacle=True):
    roi = PolyUnion([ConvexPolyhedron.box([0, 0, 0], [40, 40, 12])])
    ground = PolyUnion([ConvexPolyhedron.box([0, 0, 0.5], [40, 40, 4])])
    obs = PolyUnion([ConvexPolyhedron.box([17, 17, 0], [23, 23, 6])]) if obstacle else PolyUnion([])
    sensors = [
        SensorSpec(
            id=f"s{i}",
            type="T",
            admissible=ground,
            cost_zones=((ground, 1.0),),
            capabilities={"q0": (30.0, 1.0)},
        )
        for i in range(n_sensors)
    ]
    sc = Scenario(
        roi=iuop_create(roi),
        obstacles=iuop_create(obs),
        priorities={"all": roi},
        qualities=[QualityLevel("q0", math.radians(25), math.radians(155))],
        sensors=sensors,
        k=1,
        weights={(0, "q0", "all"): 10.0, (1, "q0", "all"): 1.0},
    )
    sc.v_r = 40 * 40 * 12.0
    sc_path = tmp / "scene.json"
    save_scenario(sc, sc_path)
    return sc, sc_path


@pytest.fixture()
def scene(tmp_path):
    return small_scene(tmp_path)


class TestValidateEvaluate:
    def test_validate_ok(self, scene, tmp_path):
        _, sc_path = scene
        rc = main(["validate", "--scenario", str(sc_path), "--out", str(tmp_path / "v")])
        assert rc == 0
        manifest = json.loads((tmp_path / "v" / "manifest.json").read_text())
        assert manifest["command"] == "validate"
        for f in manifest["outputs"]:
            assert Path(f).exists()

    def test_validate_bad_file_exit_1(self, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{\"schema\": \"covertool/1\"}")
        rc = main(["validate", "--scenario", str(p), "--out", str(tmp_path / "v")])
        assert rc == 1

    def test_evaluate_feasible_exit_0(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [8, 8, 2], "s1": [30, 8, 2]}), dep)
        rc = main([
            "evaluate", "--scenario", str(sc_path), "--deployment", str(dep),
            "--eps", "0.1", "--delta", "0.1", "--out", str(tmp_path / "e"),
        ])
        assert rc == 0
        rep = json.loads((tmp_path / "e" / "evaluation.json").read_text())
        est = rep["estimate"]
        assert est["placement"] + est["uncov"] == pytest.approx(est["total"])
        assert rep["feasible"] is True

    def test_evaluate_sensor_in_obstacle_exit_2(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [20, 20, 3], "s1": [30, 8, 2]}), dep)
        rc = main([
            "evaluate", "--scenario", str(sc_path), "--deployment", str(dep),
            "--eps", "0.1", "--delta", "0.1", "--out", str(tmp_path / "e"),
        ])
        assert rc == 2
        rep = json.loads((tmp_path / "e" / "evaluation.json").read_text())
        assert rep["constraints"]["s0"]["obstacle"] > 0

    def test_evaluate_default_tolerances(self):
        import covertool.cli as cli

        parser = cli.build_parser()
        args = parser.parse_args(["evaluate", "--scenario", "x", "--deployment", "y"])
        assert args.eps == 0.01
        assert args.delta == 0.01


class TestUncoveredCommand:
    def test_empty_deployment_gives_roi_minus_obstacles(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({}), dep)
        out = tmp_path / "u"
        rc = main([
            "uncovered", "--scenario", str(sc_path), "--deployment", str(dep),
            "--j", "0", "--q", "q0", "--cells", "8", "--rho", "1.0", "--out", str(out),
        ])
        assert rc == 0
        data = json.loads((out / "uncovered.json").read_text())
        assert data["schema"] == "covertool/1"
        entry = data["regions"][0]
        vol = 0.0
        from covertool.geom import union_volume

        under = PolyUnion(
            [ConvexPolyhedron.from_halfspaces(np.array(p["halfspaces"])) for p in entry["under"]]
        )
        want = sc.v_r - 6 * 6 * 6
        assert union_volume(under) == pytest.approx(want, rel=1e-3)

    def test_j_and_q_files_present(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [8, 8, 2], "s1": [30, 8, 2]}), dep)
        out = tmp_path / "u"
        rc = main([
            "uncovered", "--scenario", str(sc_path), "--deployment", str(dep),
            "--cells", "8", "--rho", "1.0", "--out", str(out),
        ])
        assert rc == 0
        data = json.loads((out / "uncovered.json").read_text())
        keys = {(r["j"], r["q"]) for r in data["regions"]}
        assert keys == {(0, "q0"), (1, "q0")}
        pairs = json.loads((out / "pairs.json").read_text())
        assert {(p["s1"], p["s2"]) for p in pairs["pairs"]} == {("s0", "s1")}
        assert set(pairs["pairs"][0]["causes"]) == {"range", "obstacle", "angle"}

    def test_invalid_j_exit_1(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [8, 8, 2], "s1": [30, 8, 2]}), dep)
        rc = main([
            "uncovered", "--scenario", str(sc_path), "--deployment", str(dep),
            "--j", "7", "--out", str(tmp_path / "u"),
        ])
        assert rc == 1


class TestOptimizeCommand:
    def test_deterministic_best(self, tmp_path):
        sc, sc_path = small_scene(tmp_path, obstacle=False)
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            rc = main([
                "optimize", "--scenario", str(sc_path), "--restarts", "3",
                "--budget", "12", "--eps", "0.3", "--delta", "0.3",
                "--seed", "5", "--out", str(out),
            ])
            assert rc == 0
            outs.append(json.loads((out / "best_deployment.json").read_text()))
        assert outs[0] == outs[1]

    def test_budget_secs_emits_incumbent(self, tmp_path):
        sc, sc_path = small_scene(tmp_path, obstacle=False)
        out = tmp_path / "o"
        rc = main([
            "optimize", "--scenario", str(sc_path), "--restarts", "30",
            "--budget", "40", "--eps", "0.3", "--delta", "0.3",
            "--budget-secs", "2", "--seed", "1", "--out", str(out),
        ])
        assert rc == 0
        rep = json.loads((out / "optimization.json").read_text())
        assert rep["best_objective"] > 0
        assert (out / "best_deployment.json").exists()


class TestExportViewer:
    def test_full_bundle(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [8, 8, 2], "s1": [30, 8, 2]}), dep)
        ur = tmp_path / "u"
        assert main([
            "uncovered", "--scenario", str(sc_path), "--deployment", str(dep),
            "--j", "0", "--cells", "8", "--rho", "1.0", "--out", str(ur),
        ]) == 0
        out = tmp_path / "bundle"
        rc = main([
            "export-viewer", "--scenario", str(sc_path), "--deployment", str(dep),
            "--regions", str(ur / "uncovered.json"), "--worst-case",
            "--cells", "8", "--rho", "1.0", "--out", str(out),
        ])
        assert rc == 0
        names = {p.name for p in out.iterdir()}
        assert {"scenario.json", "deployment.json", "uncovered.json", "pairs.json",
                "worst_case.json", "bundle.json", "manifest.json"} <= names
        bundle = json.loads((out / "bundle.json").read_text())
        assert bundle["pair_toggle_enabled"] is True
        assert bundle["worst_case_available"] is True
        scn = json.loads((out / "scenario.json").read_text())
        poly = scn["roi"][0]
        assert {"halfspaces", "vertices", "faces"} <= set(poly)

    def test_pairs_omitted_flag(self, scene, tmp_path):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [8, 8, 2], "s1": [30, 8, 2]}), dep)
        out = tmp_path / "bundle"
        rc = main([
            "export-viewer", "--scenario", str(sc_path), "--deployment", str(dep),
            "--out", str(out),
        ])
        assert rc == 0
        bundle = json.loads((out / "bundle.json").read_text())
        assert bundle["pair_toggle_enabled"] is False

    def test_missing_regions_named(self, scene, tmp_path, capsys):
        sc, sc_path = scene
        dep = tmp_path / "d.json"
        save_deployment(Deployment({"s0": [8, 8, 2], "s1": [30, 8, 2]}), dep)
        rc = main([
            "export-viewer", "--scenario", str(sc_path), "--deployment", str(dep),
            "--regions", str(tmp_path / "nope.json"), "--out", str(tmp_path / "b"),
        ])
        assert rc == 1
        assert "nope.json" in capsys.readouterr().err


class TestBlackboxProtocol:
    def test_line_protocol(self, tmp_path):
        sc, sc_path = small_scene(tmp_path, obstacle=False)
        proc = subprocess.run(
            [sys.executable, "-m", "covertool.cli", "blackbox",
             "--scenario", str(sc_path), "--eps", "0.3", "--delta", "0.3"],
            input="8 8 2 30 8 2\n20 20 3 8 30 2\n",
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0
        lines = proc.stdout.strip().splitlines()
        assert len(lines) == 2
        for line in lines:
            vals = [float(v) for v in line.split()]
            assert len(vals) == 1 + 6  # objective + 3 constraints x 2 sensors


class TestScenarioRoundTrip:
    def test_save_load_identity(self, tmp_path):
        """Canonicalized output is a fixpoint of load/save, and geometry and
        metadata survive the round trip."""
        sc, sc_path = small_scene(tmp_path)
        p2 = tmp_path / "gen2.json"
        save_scenario(load_scenario(sc_path), p2)
        p3 = tmp_path / "gen3.json"
        save_scenario(load_scenario(p2), p3)
        assert json.loads(p2.read_text()) == json.loads(p3.read_text())
        sc2 = load_scenario(p2)
        assert sc2.v_r == pytest.approx(sc.v_r, rel=1e-9)
        assert sc2.weights == sc.weights
        assert sc2.k == sc.k
        assert [q.id for q in sc2.qualities] == [q.id for q in sc.qualities]
        rng = np.random.default_rng(0)
        pts = rng.uniform([-5, -5, -5], [45, 45, 17], size=(4000, 3))
        assert np.array_equal(sc2.roi.contains(pts), sc.roi.contains(pts))
        assert np.array_equal(sc2.obstacles.contains(pts), sc.obstacles.contains(pts))
