"""Restart-orchestrated black-box search for low-cost deployments.

The orchestrator samples N random admissible deployments, evaluates them all,
sorts best-first, and feeds them to n1 solver slots as they free up; each
solver runs a coordinate pattern search (mesh halving on failed polls,
progressive-barrier feasibility handling) against the shared black box, which
couples the Monte-Carlo objective estimate with the signed constraint report.
An external solver can replace the built-in search through a line-oriented
stdin/stdout protocol.
"""
from __future__ import annotations

import hashlib
import math
import shlex
import subprocess
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .coverage import ConstraintReport, eval_constraints
from .estimator import EstimatorConfig, ObjectiveEstimate, estimate_objective
from .scenario import Deployment, Scenario


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary components."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class OptimizerConfig:
    n_restarts: int = 100
    n_solvers: int = 1
    budget: int = 200  # black-box evaluations per solver run
    mesh_initial: float = 0.25  # fraction of the bound box diagonal
    mesh_min: float = 1e-3
    seed: int = 0
    eps: float = 0.05
    delta: float = 0.05
    batch: int = 2048
    max_samples: int = 10_000_000
    solver: str = "builtin"  # or "external:<command>"
    budget_secs: float | None = None

    def __post_init__(self):
        if not 1 <= self.n_solvers <= self.n_restarts:
            raise ValueError("need 1 <= n_solvers <= n_restarts")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    def estimator_config(self, seed: int) -> EstimatorConfig:
        return EstimatorConfig(
            eps=self.eps, delta=self.delta, seed=seed, batch=self.batch,
            max_samples=self.max_samples,
        )


class SearchVariableMap:
    """Flattens a deployment into a bounded real vector of length 3 |S|."""

    def __init__(self, sc: Scenario):
        self.ids = [s.id for s in sc.sensors]
        lows, highs = [], []
        for s in sc.sensors:
            bb = s.admissible.bbox
            lows.append(bb[0])
            highs.append(bb[1])
        self.lower = np.concatenate(lows)
        self.upper = np.concatenate(highs)

    @property
    def dim(self) -> int:
        return 3 * len(self.ids)

    def flatten(self, d: Deployment) -> np.ndarray:
        return np.concatenate([d.positions[sid] for sid in self.ids])

    def unflatten(self, x: np.ndarray) -> Deployment:
        return Deployment(
            {sid: x[3 * i : 3 * i + 3].copy() for i, sid in enumerate(self.ids)}
        )

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass
class BlackBoxResult:
    objective: float
    constraints: list
    feasible: bool
    estimate: ObjectiveEstimate
    report: ConstraintReport


def random_admissible(sc: Scenario, rng: np.random.Generator, max_tries: int = 100_000) -> Deployment:
    """One deployment with each sensor uniform over its admissible region."""
    positions = {}
    for s in sc.sensors:
        bb = s.admissible.bbox
        for attempt in range(max_tries):
            cand = rng.uniform(bb[0], bb[1])
            if s.admissible.contains(cand[None, :])[0]:
                positions[s.id] = cand
                break
        else:
            raise RuntimeError(
                f"could not sample admissible position for {s.id} in {max_tries} tries"
            )
    return Deployment(positions)


def black_box(
    d: Deployment, sc: Scenario, cfg: OptimizerConfig, eval_seed: int,
    eps: float | None = None,
) -> BlackBoxResult:
    """Objective estimate plus signed constraints for one candidate."""
    est_cfg = EstimatorConfig(
        eps=eps if eps is not None else cfg.eps,
        delta=cfg.delta,
        seed=eval_seed,
        batch=cfg.batch,
        max_samples=cfg.max_samples,
    )
    est = estimate_objective(d, sc, est_cfg)
    rep = eval_constraints(d, sc)
    flat = rep.flat()
    return BlackBoxResult(
        objective=est.total,
        constraints=flat,
        feasible=rep.feasible,
        estimate=est,
        report=rep,
    )


def _violation(res: BlackBoxResult) -> float:
    return sum(max(0.0, v) ** 2 for v in res.constraints if math.isfinite(v))


@dataclass
class SolverRun:
    best: Deployment
    best_result: BlackBoxResult
    evaluations: int
    found_feasible: bool
    trace: list = field(default_factory=list)  # (eval index, objective) at improvements


def local_search(
    start: Deployment, sc: Scenario, cfg: OptimizerConfig, run_seed: int = 0
) -> SolverRun:
    """Coordinate pattern search with progressive-barrier constraint handling.

    Polls +/- mesh along every coordinate of the flattened deployment; the
    mesh halves when a full poll fails and the search stops on budget or mesh
    collapse.  Infeasible incumbents are ranked by squared violation until a
    feasible point appears, after which only feasible improvements are taken.
    Candidate objectives reuse a per-candidate derived seed, and improvements
    within eps of the incumbent are confirmed at eps/2.
    """
    if cfg.solver.startswith("external:"):
        return _external_search(start, sc, cfg, run_seed)
    varmap = SearchVariableMap(sc)
    scale = float(np.linalg.norm(varmap.upper - varmap.lower))
    mesh = cfg.mesh_initial * scale
    evals = 0

    def evaluate(x: np.ndarray, eps: float | None = None) -> BlackBoxResult:
        nonlocal evals
        evals += 1
        seed = derive_seed(cfg.seed, run_seed, np.round(x, 9).tobytes().hex())
        return black_box(varmap.unflatten(x), sc, cfg, seed, eps=eps)

    x = varmap.clip(varmap.flatten(start))
    incumbent = evaluate(x)
    trace = [(evals, incumbent.objective)]
    best_x = x

    def better(cand: BlackBoxResult, inc: BlackBoxResult) -> bool:
        if cand.feasible and not inc.feasible:
            return True
        if not cand.feasible and inc.feasible:
            return False
        if not cand.feasible:
            vc, vi = _violation(cand), _violation(inc)
            if vc != vi:
                return vc < vi
            # equally violated (e.g. a structurally impossible constraint):
            # fall through to the objective
        return cand.objective < inc.objective

    while evals < cfg.budget and mesh > cfg.mesh_min * scale:
        improved = False
        for axis in range(varmap.dim):
            for sign in (1.0, -1.0):
                if evals >= cfg.budget:
                    break
                cand_x = best_x.copy()
                cand_x[axis] += sign * mesh
                cand_x = varmap.clip(cand_x)
                if np.array_equal(cand_x, best_x):
                    continue
                cand = evaluate(cand_x)
                if better(cand, incumbent):
                    # near-tie improvements get a tighter confirmation pass
                    if (
                        cand.feasible
                        and incumbent.feasible
                        and incumbent.objective - cand.objective
                        < cfg.eps * max(abs(incumbent.objective), 1.0)
                        and evals < cfg.budget
                    ):
                        cand = evaluate(cand_x, eps=cfg.eps / 2)
                        if not better(cand, incumbent):
                            continue
                    incumbent = cand
                    best_x = cand_x
                    trace.append((evals, incumbent.objective))
                    improved = True
            if evals >= cfg.budget:
                break
        if not improved:
            mesh /= 2.0
    return SolverRun(
        best=varmap.unflatten(best_x),
        best_result=incumbent,
        evaluations=evals,
        found_feasible=incumbent.feasible,
        trace=trace,
    )


def _external_search(
    start: Deployment, sc: Scenario, cfg: OptimizerConfig, run_seed: int
) -> SolverRun:
    """Drive an external solver over a line protocol.

    We send one header line ``dim lower... upper... budget start...``; the
    child then writes candidate points (whitespace-separated coordinates, one
    per line) and reads back ``objective c1 c2 ...`` lines; it finishes with
    ``BEST x1 x2 ...``.
    """
    varmap = SearchVariableMap(sc)
    cmd = shlex.split(cfg.solver[len("external:") :])
    x0 = varmap.clip(varmap.flatten(start))
    header = " ".join(
        ["%d" % varmap.dim]
        + [repr(v) for v in varmap.lower]
        + [repr(v) for v in varmap.upper]
        + ["%d" % cfg.budget]
        + [repr(v) for v in x0]
    )
    proc = subprocess.Popen(
        cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
    )
    evals = 0
    best = None
    best_x = x0
    trace = []
    try:
        proc.stdin.write(header + "\n")
        proc.stdin.flush()
        for line in proc.stdout:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "BEST":
                best_x = np.array([float(v) for v in parts[1:]])
                break
            x = varmap.clip(np.array([float(v) for v in parts]))
            evals += 1
            seed = derive_seed(cfg.seed, run_seed, np.round(x, 9).tobytes().hex())
            res = black_box(varmap.unflatten(x), sc, cfg, seed)
            if res.feasible and (best is None or res.objective < best.objective):
                best = res
                best_x = x
                trace.append((evals, res.objective))
            proc.stdin.write(
                " ".join([repr(res.objective)] + [repr(c) for c in res.constraints]) + "\n"
            )
            proc.stdin.flush()
            if evals >= cfg.budget:
                break
    finally:
        try:
            proc.stdin.close()
        except OSError:
            pass
        proc.wait(timeout=30)
    if best is None:
        seed = derive_seed(cfg.seed, run_seed, np.round(best_x, 9).tobytes().hex())
        best = black_box(varmap.unflatten(best_x), sc, cfg, seed)
        evals += 1
    return SolverRun(
        best=varmap.unflatten(best_x),
        best_result=best,
        evaluations=evals,
        found_feasible=best.feasible,
        trace=trace,
    )


@dataclass
class OptimizationReport:
    best: Deployment
    best_objective: float
    best_estimate: ObjectiveEstimate
    best_constraints: ConstraintReport
    incumbent_trace: list  # (wall seconds, objective, restart rank)
    initial_objectives: list  # sorted ascending
    restarts_run: int
    evaluations: int
    best_restart_rank: int

    def to_json(self) -> dict:
        return {
            "best_deployment": self.best.to_json(),
            "best_objective": self.best_objective,
            "estimate": self.best_estimate.to_json(),
            "trace": [
                {"wall_ms": int(1000 * t), "objective": obj, "restart_rank": rank}
                for t, obj, rank in self.incumbent_trace
            ],
            "initial_objectives": self.initial_objectives,
            "restarts_run": self.restarts_run,
            "evaluations": self.evaluations,
            "best_restart_rank": self.best_restart_rank,
        }


def _run_restart(args):
    sc, cfg, rank, start_positions = args
    start = Deployment(start_positions)
    run = local_search(start, sc, cfg, run_seed=rank)
    return rank, run


def orchestrate(
    sc: Scenario,
    cfg: OptimizerConfig,
    workers: int | None = None,
    evaluate_fn=None,
    progress=None,
) -> OptimizationReport:
    """Sorted-restart orchestration: evaluate N random deployments, then
    dispatch them best-first to n1 parallel solver slots.

    The incumbent (best feasible deployment so far) is tracked continuously
    and returned if the wall-clock budget runs out.  `evaluate_fn` may stub
    the black box in tests.
    """
    t0 = time.monotonic()
    starts = []
    for i in range(cfg.n_restarts):
        rng = np.random.default_rng(derive_seed(cfg.seed, "restart", i))
        starts.append(random_admissible(sc, rng))

    if evaluate_fn is None:
        def evaluate_fn(d, idx):
            return black_box(d, sc, cfg, derive_seed(cfg.seed, "initial", idx)).objective

    initial = [(evaluate_fn(d, i), i) for i, d in enumerate(starts)]
    order = sorted(range(len(initial)), key=lambda i: initial[i][0])
    initial_sorted = [initial[i][0] for i in order]

    trace = []
    best_run = None  # best feasible solver run
    fallback_run = None  # best run of any feasibility, used only if none feasible
    best_rank = -1
    evaluations = cfg.n_restarts
    restarts_run = 0

    def out_of_time() -> bool:
        return cfg.budget_secs is not None and time.monotonic() - t0 > cfg.budget_secs

    def consider(rank: int, run: SolverRun):
        nonlocal best_run, fallback_run, best_rank
        if fallback_run is None or run.best_result.objective < fallback_run.best_result.objective:
            fallback_run = run
        if not run.found_feasible:
            return
        if best_run is None or run.best_result.objective < best_run.best_result.objective:
            best_run = run
            best_rank = rank
            trace.append((time.monotonic() - t0, run.best_result.objective, rank))
            if progress:
                progress(trace[-1])

    queue = list(order)  # restart indices, best initial objective first
    if cfg.n_solvers == 1:
        for rank_pos, idx in enumerate(queue):
            if out_of_time():
                break
            run = local_search(starts[idx], sc, cfg, run_seed=rank_pos)
            evaluations += run.evaluations
            restarts_run += 1
            consider(rank_pos, run)
    else:
        with ProcessPoolExecutor(max_workers=cfg.n_solvers) as pool:
            pending = {}
            rank_pos = 0
            while (pending or rank_pos < len(queue)) and not out_of_time():
                while rank_pos < len(queue) and len(pending) < cfg.n_solvers:
                    idx = queue[rank_pos]
                    fut = pool.submit(
                        _run_restart, (sc, cfg, rank_pos, {
                            k: v.tolist() for k, v in starts[idx].positions.items()
                        })
                    )
                    pending[fut] = rank_pos
                    rank_pos += 1
                if not pending:
                    break
                done, _ = wait(list(pending), return_when=FIRST_COMPLETED)
                for fut in done:
                    pending.pop(fut)
                    rank, run = fut.result()
                    evaluations += run.evaluations
                    restarts_run += 1
                    consider(rank, run)

    if best_run is None and fallback_run is not None:
        best_run = fallback_run
        best_rank = -1
        trace.append((time.monotonic() - t0, best_run.best_result.objective, -1))
    if best_run is None:
        # nothing ran at all (zero-time budget): report the best initial point
        idx = order[0]
        seed = derive_seed(cfg.seed, "initial", idx)
        res = black_box(starts[idx], sc, cfg, seed)
        best_run = SolverRun(starts[idx], res, 1, res.feasible, [(1, res.objective)])
        best_rank = 0
        trace.append((time.monotonic() - t0, res.objective, 0))

    return OptimizationReport(
        best=best_run.best,
        best_objective=best_run.best_result.objective,
        best_estimate=best_run.best_result.estimate,
        best_constraints=best_run.best_result.report,
        incumbent_trace=trace,
        initial_objectives=initial_sorted,
        restarts_run=restarts_run,
        evaluations=evaluations,
        best_restart_rank=best_rank,
    )
