"""Monte-Carlo objective estimation with an (epsilon, delta) guarantee.

The uncovered-cost term is the expectation of a bounded variable: sample a
point uniformly in the region of interest; if it is (j, q)-uncovered in
priority region h it contributes V_R * w(j, q, h), summed over all (j, q).
A sequential empirical-Bernstein stopping rule (geometric checkpoint
schedule) terminates once the running estimate is within relative epsilon of
the mean with confidence 1 - delta; an all-zero stream switches to a
hypothesis-testing exit that certifies the mean below a small absolute
threshold instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coverage import DeploymentGeometry, cover_jq_batch
from .geom.poly import TAU_GEOM, GeometryError
from .scenario import Deployment, Scenario, placement_cost


@dataclass(frozen=True)
class EstimatorConfig:
    eps: float = 0.01
    delta: float = 0.01
    seed: int = 0
    batch: int = 2048
    max_samples: int = 10_000_000

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must be in (0,1), got {self.eps}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0,1), got {self.delta}")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


@dataclass
class ObjectiveEstimate:
    placement: float
    uncov_estimate: float
    total: float
    samples_used: int
    per_jq_mean: dict
    terminated_by: str  # "stopping-rule" | "cap"
    seed: int

    def to_json(self) -> dict:
        return {
            "placement": self.placement,
            "uncov": self.uncov_estimate,
            "total": self.total,
            "samples": self.samples_used,
            "per_jq": [
                {"j": j, "q": q, "mean": m} for (j, q), m in sorted(self.per_jq_mean.items())
            ],
            "terminated_by": self.terminated_by,
            "seed": self.seed,
        }


def sample_points(sc: Scenario, rng: np.random.Generator, n: int) -> np.ndarray:
    """n points uniform over the roi volume, by rejection from its bbox."""
    lo, hi = sc.bbox
    out = np.empty((n, 3))
    got = 0
    attempts = 0
    while got < n:
        want = max(n - got, 256)
        cand = rng.uniform(lo, hi, size=(want, 3))
        keep = sc.roi.contains(cand)
        kept = cand[keep]
        take = min(len(kept), n - got)
        out[got : got + take] = kept[:take]
        got += take
        attempts += want
        if attempts > 10_000 and got < attempts * 1e-4:
            raise GeometryError("roi acceptance rate below 1e-4; degenerate region")
    return out


def sample_point(sc: Scenario, rng: np.random.Generator) -> np.ndarray:
    return sample_points(sc, rng, 1)[0]


def sample_Z(
    x: np.ndarray, d: Deployment, sc: Scenario, tol: float = TAU_GEOM
) -> dict:
    """Per-(j, q) loss sample at one point: V_R * w(j, q, h) * (1 - cover)."""
    return {
        key: float(v[0]) for key, v in sample_Z_batch(np.asarray(x, float)[None, :], d, sc, tol).items()
    }


def sample_Z_batch(
    pts: np.ndarray, d: Deployment, sc: Scenario, tol: float = TAU_GEOM,
    geom: DeploymentGeometry | None = None,
) -> dict:
    """Vectorized per-(j, q) loss samples; obstacle points contribute zero."""
    pts = np.atleast_2d(pts)
    if not sc.roi.contains(pts, 100 * tol).all():
        raise GeometryError("sample point outside the region of interest")
    js = list(range(sc.k + 1))
    qs = sc.quality_ids
    cover = cover_jq_batch(pts, d, sc, js, qs, tol, geom=geom)
    labels = sorted(sc.priorities)
    pr_idx = sc.priorities_of(pts, tol)
    # points on internal partition faces can miss by tolerance: snap to nearest
    missing = pr_idx < 0
    if missing.any():
        sub = pts[missing]
        dist_to = np.full((len(sub), len(labels)), np.inf)
        for i, h in enumerate(labels):
            dist_to[:, i] = np.min(
                np.stack([p.distance(sub, tol) for p in sc.priorities[h]]), axis=0
            )
        pr_idx[missing] = np.argmin(dist_to, axis=1)
    w_lookup = {
        (j, q): np.array([sc.weights[(j, q, h)] for h in labels]) for j in js for q in qs
    }
    out = {}
    for j in js:
        for q in qs:
            w = w_lookup[(j, q)][pr_idx]
            out[(j, q)] = sc.v_r * w * (1 - cover[(j, q)])
    return out


def _eb_halfwidth(var: float, rng_width: float, n: int, delta_k: float) -> float:
    """Empirical-Bernstein confidence half-width for a [0, rng_width] variable."""
    if n < 2:
        return math.inf
    log_term = math.log(3.0 / delta_k)
    return math.sqrt(2.0 * var * log_term / n) + 3.0 * rng_width * log_term / n


@dataclass
class _Welford:
    """Streaming mean/variance, merged batch-wise (Chan's parallel update)."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push_many(self, xs: np.ndarray) -> None:
        nb = len(xs)
        if nb == 0:
            return
        mb = float(xs.mean())
        m2b = float(((xs - mb) ** 2).sum())
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        delta = mb - self.mean
        tot = self.n + nb
        self.m2 += m2b + delta * delta * self.n * nb / tot
        self.mean += delta * nb / tot
        self.n = tot

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0


def estimate_objective(
    d: Deployment, sc: Scenario, cfg: EstimatorConfig, tol: float = TAU_GEOM
) -> ObjectiveEstimate:
    """(eps, delta)-relative estimate of placement cost plus uncovered cost.

    The stopping rule targets the summed variable over all (j, q); per-(j, q)
    means are reported descriptively.  Samples are drawn in fixed batches
    seeded by (seed, batch index), so results are identical for any worker
    count.  The guarantee covers the uncovered term; the placement term is
    exact.
    """
    placement = placement_cost(sc, d, tol)
    js = list(range(sc.k + 1))
    qs = sc.quality_ids
    labels = sorted(sc.priorities)
    rng_width = sc.v_r * sum(
        max(sc.weights[(j, q, h)] for h in labels) for j in js for q in qs
    )
    geom = DeploymentGeometry(d, sc, tol)

    stats = _Welford()
    per_jq_sums = {(j, q): 0.0 for j in js for q in qs}
    lb = 0.0
    ub = math.inf
    checkpoint = 1
    next_check = 16.0
    theta_abs = max(1e-3 * placement, 1e-9 * max(rng_width, 1.0))
    all_zero = True
    terminated = "cap"
    batch_index = 0

    if rng_width == 0.0:
        return ObjectiveEstimate(
            placement, 0.0, placement, 0, {k: 0.0 for k in per_jq_sums}, "stopping-rule", cfg.seed
        )

    while stats.n < cfg.max_samples:
        rng = np.random.default_rng([cfg.seed, batch_index])
        batch_index += 1
        pts = sample_points(sc, rng, cfg.batch)
        zs = sample_Z_batch(pts, d, sc, tol, geom=geom)
        total = np.zeros(cfg.batch)
        for key, z in zs.items():
            per_jq_sums[key] += float(z.sum())
            total += z
        stats.push_many(total)
        if total.any():
            all_zero = False

        if stats.n >= next_check:
            checkpoint += 1
            next_check = math.ceil(next_check * 1.1)
            delta_k = cfg.delta / (checkpoint * (checkpoint + 1))
            if all_zero:
                # hypothesis-testing exit: if the mean exceeded theta_abs, an
                # all-zero stream of length n has probability < delta
                n_req = math.log(cfg.delta) / math.log(max(1.0 - theta_abs / rng_width, 1e-12))
                if stats.n >= n_req:
                    terminated = "stopping-rule"
                    break
                continue
            c = _eb_halfwidth(stats.var, rng_width, stats.n, delta_k)
            lb = max(lb, abs(stats.mean) - c)
            ub = min(ub, abs(stats.mean) + c)
            if (1 + cfg.eps) * lb >= (1 - cfg.eps) * ub:
                terminated = "stopping-rule"
                break

    if all_zero:
        uncov = 0.0
    elif terminated == "stopping-rule":
        uncov = 0.5 * ((1 + cfg.eps) * lb + (1 - cfg.eps) * ub)
    else:
        uncov = stats.mean
    per_jq_mean = {k: (v / stats.n if stats.n else 0.0) for k, v in per_jq_sums.items()}
    return ObjectiveEstimate(
        placement=placement,
        uncov_estimate=uncov,
        total=placement + uncov,
        samples_used=stats.n,
        per_jq_mean=per_jq_mean,
        terminated_by=terminated,
        seed=cfg.seed,
    )
