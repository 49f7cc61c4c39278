"""Continuous-time Monte Carlo for open ASEP and the height-function
convergence experiment.

The sampler uses uniformization: every clock tick picks one of the ``n+1``
bonds uniformly (bond 0 and bond ``n`` are the reservoirs) and performs the
move available on that bond with probability ``rate / lam_bond``.  The
resulting discrete chain has the same stationary law as the continuous-time
process, so configurations recorded every ``thin_events`` ticks are
stationary samples once the chain has mixed.  Each tick costs O(1).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .asep_exact import block_ends
from .errors import DomainError, InsufficientSamples
from .params import RateParams, ScalingLimitParams, boundary_to_rates, scaling_sequence

# event-type indices in the counters returned by the kernel
RIGHT_HOP, LEFT_HOP, ENTER_LEFT, EXIT_LEFT, ENTER_RIGHT, EXIT_RIGHT = range(6)
EVENT_NAMES = ("right_hop", "left_hop", "enter_left", "exit_left", "enter_right", "exit_right")


@njit(cache=True, nogil=True)
def _advance(tau, ticks, alpha, beta, gamma, delta, q, lam, counts):
    """Run ``ticks`` uniformized clock ticks in place."""
    n = tau.shape[0]
    for _ in range(ticks):
        b = np.random.randint(0, n + 1)
        u = np.random.random() * lam
        if b == 0:
            if tau[0] == 0:
                if u < alpha:
                    tau[0] = 1
                    counts[2] += 1
            elif u < gamma:
                tau[0] = 0
                counts[3] += 1
        elif b == n:
            if tau[n - 1] == 0:
                if u < delta:
                    tau[n - 1] = 1
                    counts[4] += 1
            elif u < beta:
                tau[n - 1] = 0
                counts[5] += 1
        else:
            left = tau[b - 1]
            right = tau[b]
            if left == 1 and right == 0:
                if u < 1.0:
                    tau[b - 1] = 0
                    tau[b] = 1
                    counts[0] += 1
            elif left == 0 and right == 1:
                if u < q:
                    tau[b - 1] = 1
                    tau[b] = 0
                    counts[1] += 1


@njit(cache=True, nogil=True)
def _run_replica(seed, tau, burn, samples, thin, alpha, beta, gamma, delta, q, lam, out, counts):
    # the compiled generator state is per thread, so seed and run in one call
    np.random.seed(seed)
    _advance(tau, burn, alpha, beta, gamma, delta, q, lam, counts)
    for k in range(samples):
        _advance(tau, thin, alpha, beta, gamma, delta, q, lam, counts)
        out[k, :] = tau


@dataclass(frozen=True)
class SimulationPlan:
    """Run layout.  ``samples`` are split evenly across independent
    ``replicas``; ``burn_in_events`` and ``thin_events`` count clock ticks."""

    params: RateParams
    n: int
    burn_in_events: int | None = None
    samples: int = 10_000
    thin_events: int | None = None
    seed: int = 0
    replicas: int = 16
    init_density: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.burn_in_events is None:
            object.__setattr__(self, "burn_in_events", 20 * self.n * self.n)
        if self.thin_events is None:
            object.__setattr__(self, "thin_events", 5 * self.n)
        if self.burn_in_events < 1:
            raise DomainError("burn_in_events must be >= 1")
        if self.thin_events < self.n:
            raise DomainError("thin_events must be >= n")
        if self.replicas < 1 or self.samples < self.replicas or self.samples % self.replicas:
            raise DomainError("samples must be a positive multiple of replicas")
        if not 0 <= self.init_density <= 1:
            raise DomainError("init_density must lie in [0, 1]")


@dataclass
class SampleSet:
    """Recorded configurations (rows, site 1 first) in replica order."""

    n: int
    configs: np.ndarray
    replica: np.ndarray
    event_counts: dict = field(default_factory=dict)

    def __len__(self):
        return self.configs.shape[0]

    def heights(self, x) -> np.ndarray:
        """``h_n(x_k) / sqrt n`` for every sample, shape ``(samples, d)``."""
        ends = block_ends(self.n, x)
        h = np.cumsum(2 * self.configs.astype(np.int32) - 1, axis=1)
        h = np.concatenate([np.zeros((h.shape[0], 1), dtype=h.dtype), h], axis=1)
        return h[:, ends] / math.sqrt(self.n)

    def density_profile(self) -> np.ndarray:
        return self.configs.mean(axis=0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["replica", "configuration"])
            for r, row in zip(self.replica, self.configs):
                wr.writerow([int(r), "".join(map(str, row.tolist()))])


def replica_seeds(seed: int, replicas: int) -> list[int]:
    """32-bit seeds for the compiled generator, one per replica."""
    ss = np.random.SeedSequence(seed).spawn(replicas)
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in ss]


def simulate(plan: SimulationPlan, workers: int = 1) -> SampleSet:
    """Run every replica; ``workers > 1`` runs replicas on a thread pool.

    Each replica owns its seed and output rows, so the result does not
    depend on ``workers``.
    """
    r = plan.params
    n = plan.n
    lam = max(1.0, r.q, r.alpha, r.beta, r.gamma, r.delta)
    per = plan.samples // plan.replicas
    out = np.empty((plan.samples, n), dtype=np.uint8)
    counts = np.zeros((plan.replicas, 6), dtype=np.int64)

    def run(i, s):
        tau = (np.random.default_rng(s).random(n) < plan.init_density).astype(np.uint8)
        _run_replica(s, tau, plan.burn_in_events, per, plan.thin_events,
                     r.alpha, r.beta, r.gamma, r.delta, r.q, lam, out[i * per:(i + 1) * per], counts[i])

    seeds = replica_seeds(plan.seed, plan.replicas)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(plan.replicas), seeds))
    else:
        for i, s in enumerate(seeds):
            run(i, s)
    rep = np.repeat(np.arange(plan.replicas), per)
    return SampleSet(n, out, rep, dict(zip(EVENT_NAMES, counts.sum(axis=0).tolist())))


def batch_means(values, batches: int = 16):
    """Mean and batch-means standard error over contiguous batches."""
    values = np.asarray(values, dtype=float)
    means = np.array([b.mean() for b in np.array_split(values, batches)])
    return float(values.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def empirical_height_laplace(samples: SampleSet, x, c, batches: int = 16):
    """Mean of ``exp(-sum_k c_k h_n(x_k)/sqrt n)`` with a batch-means SE."""
    if len(samples) < 1000:
        raise InsufficientSamples(f"need at least 1000 samples, got {len(samples)}")
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        return 1.0, 0.0
    vals = np.exp(-(samples.heights(x) @ c))
    return batch_means(vals, batches)


@dataclass
class ConvergenceRow:
    n: int
    empirical: float
    stderr: float
    prelimit: float
    limit: float

    @property
    def gap(self) -> float:
        return abs(self.empirical - self.limit)

    @property
    def prelimit_gap(self) -> float:
        return abs(self.prelimit - self.limit)


@dataclass
class ConvergenceTable:
    x: tuple
    c: tuple
    rows: list

    def prelimit_gaps_decreasing(self) -> bool:
        g = [r.prelimit_gap for r in self.rows]
        return all(math.isfinite(v) for v in g) and all(b < a for a, b in zip(g[:-1], g[1:]))

    def empirical_gaps_trend(self, k: float = 3.0) -> bool:
        """Empirical gaps non-increasing up to ``k`` combined standard errors."""
        r = self.rows
        return all(b.gap <= a.gap + k * math.hypot(a.stderr, b.stderr) for a, b in zip(r[:-1], r[1:]))

    def final_within(self, k: float = 3.0) -> bool:
        last = self.rows[-1]
        return last.gap < k * last.stderr

    def to_csv(self, path):
        d = len(self.x)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", *[f"x_{i + 1}" for i in range(d)], *[f"c_{i + 1}" for i in range(d)],
                         "empirical", "stderr", "prelimit", "limit"])
            for r in self.rows:
                wr.writerow([r.n, *[f"{v:.17e}" for v in self.x], *[f"{v:.17e}" for v in self.c],
                             f"{r.empirical:.17e}", f"{r.stderr:.17e}", f"{r.prelimit:.17e}", f"{r.limit:.17e}"])


def convergence_experiment(s: ScalingLimitParams, n_list, x, c, budget: int = 10_000, seed: int = 0,
                           replicas: int = 16, burn_in=None, thin=None, workers: int = 1) -> ConvergenceTable:
    """Empirical, finite-n quadrature and limit Laplace transforms along ``n_list``.

    ``budget`` is the number of stationary samples per ``n``.  The finite-n
    value is ``nan`` where the Askey-Wilson route is unavailable (for
    example when ``t = 1`` is not admissible).
    """
    from .limit_process import LimitLawParams, limit_height_laplace
    from .prelimit import LaplaceRequest, laplace_ratio

    limit = limit_height_laplace(LimitLawParams(s.a_lim, s.c_lim), x, c)
    rows = []
    for i, n in enumerate(n_list):
        bp = scaling_sequence(s, n).params
        plan = SimulationPlan(boundary_to_rates(bp), n, burn_in_events=burn_in(n) if burn_in else None,
                              samples=budget, thin_events=thin(n) if thin else None,
                              seed=seed + i, replicas=replicas)
        est, se = empirical_height_laplace(simulate(plan, workers), x, c)
        try:
            pre = laplace_ratio(LaplaceRequest(tuple(x), tuple(c)), bp, n)
        except (DomainError, ValueError):
            pre = float("nan")
        rows.append(ConvergenceRow(n, est, se, pre, limit))
    return ConvergenceTable(tuple(x), tuple(c), rows)
