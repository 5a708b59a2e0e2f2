"""Command-line entry point: validate, evaluate, optimize, uncovered, export-viewer.

All file formats are JSON with a ``"schema": "covertool/1"`` key.  Every run
writes a manifest recording the command, inputs, configuration snapshot, seed,
and produced files.  Exit codes: 0 success (and feasible, for evaluate),
2 infeasible deployment (reports still written), 1 validation or I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coverage import eval_constraints, uncovered_full
from .estimator import EstimatorConfig, estimate_objective
from .fixtures import BUILDERS, build_slab
from .geom.poly import GeometryError
from .optimizer import OptimizerConfig, black_box, derive_seed, orchestrate
from .scenario import (
    SCHEMA,
    Deployment,
    ScenarioError,
    load_deployment,
    load_scenario,
    save_deployment,
    save_scenario,
    scenario_to_json,
)


def _manifest(out_dir: Path, command: str, args: dict, outputs: list, t0: float, seed) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    data = {
        "schema": SCHEMA,
        "command": command,
        "arguments": {k: str(v) for k, v in args.items()},
        "seed": seed,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_secs": round(time.monotonic() - t0, 3),
    }
    (out_dir / "manifest.json").write_text(json.dumps(data, indent=1))


def _poly_payload(p) -> dict:
    """Halfspaces plus vertices (and hull faces) so viewers need no geometry kernel."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(p.vertices)
    return {
        "halfspaces": [[float(x) for x in row] for row in p.halfspaces],
        "vertices": [[float(x) for x in v] for v in p.vertices],
        "faces": [[int(i) for i in tri] for tri in hull.simplices],
    }


def _union_payload(u) -> list:
    return [_poly_payload(p) for p in u]


def cmd_validate(args) -> int:
    t0 = time.monotonic()
    sc = load_scenario(args.scenario)
    out_dir = Path(args.out)
    report = {
        "schema": SCHEMA,
        "name": sc.name,
        "valid": True,
        "volume": sc.v_r,
        "sensors": len(sc.sensors),
        "obstacles": len(sc.obstacles),
        "qualities": sc.quality_ids,
        "k": sc.k,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "validate.json"
    path.write_text(json.dumps(report, indent=1))
    _manifest(out_dir, "validate", vars(args), [path], t0, args.seed)
    print(f"scenario ok: volume {sc.v_r:.6g}, {len(sc.sensors)} sensors")
    return 0


def cmd_evaluate(args) -> int:
    t0 = time.monotonic()
    sc = load_scenario(args.scenario)
    d = load_deployment(args.deployment)
    cfg = EstimatorConfig(eps=args.eps, delta=args.delta, seed=args.seed)
    est = estimate_objective(d, sc, cfg)
    rep = eval_constraints(d, sc)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": SCHEMA,
        "estimate": est.to_json(),
        "constraints": {
            sid: {
                "obstacle": c.obstacle,
                "admissible": c.admissible,
                "isolation": c.isolation,
            }
            for sid, c in rep.per_sensor.items()
        },
        "feasible": rep.feasible,
    }
    path = out_dir / "evaluation.json"
    path.write_text(json.dumps(payload, indent=1))
    _manifest(out_dir, "evaluate", vars(args), [path], t0, args.seed)
    print(
        f"total {est.total:.6g} = placement {est.placement:.6g} + uncovered {est.uncov_estimate:.6g} "
        f"({est.samples_used} samples, {est.terminated_by}); feasible: {rep.feasible}"
    )
    return 0 if rep.feasible else 2


def cmd_optimize(args) -> int:
    t0 = time.monotonic()
    sc = load_scenario(args.scenario)
    cfg = OptimizerConfig(
        n_restarts=args.restarts,
        n_solvers=args.solvers,
        budget=args.budget,
        seed=args.seed,
        eps=args.eps,
        delta=args.delta,
        solver=args.solver,
        budget_secs=args.budget_secs,
    )
    def progress(entry):
        t, obj, rank = entry
        print(f"incumbent {obj:.6g} (restart rank {rank}, {t:.1f}s)", file=sys.stderr)

    report = orchestrate(sc, cfg, progress=progress)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep_path = out_dir / "optimization.json"
    dep_path = out_dir / "best_deployment.json"
    rep_path.write_text(json.dumps(report.to_json(), indent=1))
    save_deployment(report.best, dep_path)
    _manifest(out_dir, "optimize", vars(args), [rep_path, dep_path], t0, args.seed)
    print(f"best objective {report.best_objective:.6g} after {report.evaluations} evaluations")
    return 0


def cmd_uncovered(args) -> int:
    t0 = time.monotonic()
    sc = load_scenario(args.scenario)
    d = load_deployment(args.deployment)
    js = [int(v) for v in args.j.split(",")] if args.j else list(range(sc.k + 1))
    qs = args.q.split(",") if args.q else sc.quality_ids
    for j in js:
        if j > sc.k:
            print(f"error: j={j} exceeds scenario fault budget k={sc.k}", file=sys.stderr)
            return 1
    for q in qs:
        sc.quality(q)
    result = uncovered_full(d, sc, js, qs, m=args.cells, rho=args.rho, workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    regions = []
    for (j, q), entry in sorted(result.entries.items()):
        regions.append(
            {
                "j": j,
                "q": q,
                "under": _union_payload(entry["under"]),
                "over": _union_payload(entry["over"]),
            }
        )
    unc_path = out_dir / "uncovered.json"
    unc_path.write_text(json.dumps({"schema": SCHEMA, "regions": regions}))
    pair_entries = []
    for (s1, s2, q, mode), pr in sorted(result.pairs.items()):
        if mode != "over":
            continue  # the viewer consumes one certified side per pair
        pair_entries.append(
            {
                "s1": s1,
                "s2": s2,
                "q": q,
                "u_pair": _union_payload(pr.u_pair),
                "causes": {cause: _union_payload(polys) for cause, polys in pr.components.items()},
            }
        )
    pairs_path = out_dir / "pairs.json"
    pairs_path.write_text(json.dumps({"schema": SCHEMA, "pairs": pair_entries}))
    _manifest(out_dir, "uncovered", vars(args), [unc_path, pairs_path], t0, args.seed)
    print(f"wrote {unc_path} and {pairs_path}")
    return 0


def cmd_export_viewer(args) -> int:
    t0 = time.monotonic()
    sc = load_scenario(args.scenario)
    d = load_deployment(args.deployment)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    regions_path = Path(args.regions) if args.regions else None
    if regions_path and not regions_path.exists():
        print(f"error: regions file {regions_path} does not exist", file=sys.stderr)
        return 1

    scenario_payload = {
        "schema": SCHEMA,
        "name": sc.name,
        "roi": _union_payload(sc.roi),
        "obstacles": _union_payload(sc.obstacles),
        "priorities": {h: _union_payload(u) for h, u in sc.priorities.items()},
        "admissible": {s.id: _union_payload(s.admissible) for s in sc.sensors},
        "qualities": scenario_to_json(sc)["qualities"],
        "k": sc.k,
    }
    (out_dir / "scenario.json").write_text(json.dumps(scenario_payload))
    (out_dir / "deployment.json").write_text(json.dumps(d.to_json()))

    outputs = [out_dir / "scenario.json", out_dir / "deployment.json"]
    pairs_available = False
    if regions_path:
        bundle = json.loads(regions_path.read_text())
        (out_dir / "uncovered.json").write_text(json.dumps(bundle))
        outputs.append(out_dir / "uncovered.json")
        pairs_src = regions_path.parent / "pairs.json"
        if pairs_src.exists():
            (out_dir / "pairs.json").write_text(pairs_src.read_text())
            outputs.append(out_dir / "pairs.json")
            pairs_available = True

    worst = None
    if args.worst_case and len(sc.sensors) > 1 and sc.k >= 1:
        worst = _worst_single_fault(sc, d, args)
        if worst is not None:
            (out_dir / "worst_case.json").write_text(json.dumps(worst))
            outputs.append(out_dir / "worst_case.json")

    index = {
        "schema": SCHEMA,
        "files": [p.name for p in outputs],
        "pair_toggle_enabled": pairs_available,
        "worst_case_available": worst is not None,
    }
    (out_dir / "bundle.json").write_text(json.dumps(index, indent=1))
    outputs.append(out_dir / "bundle.json")
    _manifest(out_dir, "export-viewer", vars(args), outputs, t0, args.seed)
    print(f"viewer bundle in {out_dir}")
    return 0


def _worst_single_fault(sc, d, args):
    """Enumerate single faults, weight each uncovered region, keep the argmax."""
    from .coverage import uncovered_region
    from .geom.ops import bool_intersect, union_volume
    from .geom.poly import PolyUnion
    from .scenario import Deployment

    q0 = sc.quality_ids[0]
    best = None
    for sid in d.positions:
        rest = Deployment({k: v for k, v in d.positions.items() if k != sid})
        region = uncovered_region(
            rest, 0, q0, sc, m=args.cells, mode="over", rho=args.rho, workers=args.workers
        )
        cost = 0.0
        for h, pr in sc.priorities.items():
            inter = bool_intersect(region.polys, pr)
            cost += sc.weights[(min(1, sc.k), q0, h)] * union_volume(inter)
        if best is None or cost > best[0]:
            best = (cost, sid, region)
    if best is None:
        return None
    cost, sid, region = best
    return {
        "schema": SCHEMA,
        "faulty_sensor": sid,
        "weighted_cost": cost,
        "q": q0,
        "region": _union_payload(region),
    }


def cmd_blackbox(args) -> int:
    """Line-oriented evaluator: read one deployment vector per line from
    stdin, write 'objective c1 c2 ...' per line to stdout."""
    sc = load_scenario(args.scenario)
    ids = [s.id for s in sc.sensors]
    cfg = OptimizerConfig(
        n_restarts=1, n_solvers=1, budget=1, seed=args.seed, eps=args.eps, delta=args.delta
    )
    index = 0
    for line in sys.stdin:
        parts = line.split()
        if not parts:
            continue
        x = np.array([float(v) for v in parts])
        if len(x) != 3 * len(ids):
            print(f"error: expected {3 * len(ids)} coordinates", file=sys.stderr)
            return 1
        d = Deployment({sid: x[3 * i : 3 * i + 3] for i, sid in enumerate(ids)})
        res = black_box(d, sc, cfg, derive_seed(args.seed, "blackbox", index))
        index += 1
        sys.stdout.write(
            " ".join([repr(res.objective)] + [repr(c) for c in res.constraints]) + "\n"
        )
        sys.stdout.flush()
    return 0


def cmd_make_scenario(args) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.name == "slab":
        sc, d = build_slab()
        sc_path = out_dir / "slab.scenario.json"
        dep_path = out_dir / "slab.deployment.json"
        save_scenario(sc, sc_path)
        save_deployment(d, dep_path)
        _manifest(out_dir, "make-scenario", vars(args), [sc_path, dep_path], t0, args.seed)
        print(f"wrote {sc_path} and {dep_path}")
        return 0
    builder = BUILDERS.get(args.name)
    if builder is None:
        print(f"error: unknown scenario {args.name!r}; choose from {sorted(BUILDERS)} or slab", file=sys.stderr)
        return 1
    sc = builder()
    path = out_dir / f"{args.name}.scenario.json"
    save_scenario(sc, path)
    _manifest(out_dir, "make-scenario", vars(args), [path], t0, args.seed)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covertool",
        description="Coverage analysis and placement optimization for triangulating-sensor deployments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, deployment=False):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        if deployment:
            p.add_argument("--deployment", required=True, help="deployment JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("validate", help="load and validate a scenario file")
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("evaluate", help="estimate the objective and check constraints")
    common(p, deployment=True)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.01)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("optimize", help="search for a low-cost deployment")
    common(p)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--solvers", type=int, default=1)
    p.add_argument("--budget", type=int, default=200, help="evaluations per solver run")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--solver", default="builtin", help="'builtin' or 'external:<command>'")
    p.add_argument("--budget-secs", type=float, default=None)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("uncovered", help="closed-form under/over uncovered regions")
    common(p, deployment=True)
    p.add_argument("--j", default=None, help="comma-separated fault counts (default 0..k)")
    p.add_argument("--q", default=None, help="comma-separated quality ids (default all)")
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--rho", type=float, default=10.0)
    p.set_defaults(fn=cmd_uncovered)

    p = sub.add_parser("export-viewer", help="bundle scenario/deployment/regions for the viewer")
    common(p, deployment=True)
    p.add_argument("--regions", default=None, help="uncovered.json from the uncovered command")
    p.add_argument("--worst-case", action="store_true", help="include the argmax single-fault layer")
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--rho", type=float, default=10.0)
    p.set_defaults(fn=cmd_export_viewer)

    p = sub.add_parser("blackbox", help="line-oriented stdin/stdout evaluator for external solvers")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.set_defaults(fn=cmd_blackbox)

    p = sub.add_parser("make-scenario", help="write a built-in scenario model to disk")
    p.add_argument("--name", required=True, help=f"one of {sorted(BUILDERS)} or slab")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_make_scenario)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, GeometryError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
