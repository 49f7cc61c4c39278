"""The limit process eta^(a,c): Brownian kernels, joint densities, Laplace
transforms, and an importance sampler built from the exponential tilt of
Brownian motion by its running minimum and endpoint."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DegenerateESS, DomainError, QuadratureNotConverged
from .quadrature import composite_rule
from .specfun import calH

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LimitLawParams:
    a_lim: float
    c_lim: float


# ---------------------------------------------------------------------------
# kernels

def kernel_q(t, x, y):
    """Transition density of Brownian motion killed at 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    val = (np.exp(-((x - y) ** 2) / (2 * t)) - np.exp(-((x + y) ** 2) / (2 * t))) / np.sqrt(2 * np.pi * t)
    return np.where((x > 0) & (y > 0), val, 0.0)


def kernel_qb(t, b, x, y):
    """Killed kernel with the barrier moved to ``b``."""
    return kernel_q(t, np.asarray(x) - b, np.asarray(y) - b)


def kernel_qbstar(t, b, x, y):
    """``-d/db`` of :func:`kernel_qb`: joint density of minimum and endpoint."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x + y - 2 * b
    val = SQRT2 / np.sqrt(np.pi * t ** 3) * z * np.exp(-z * z / (2 * t))
    return np.where((x > b) & (y > b), val, 0.0)


def kernel_p(t, u, v):
    """``2 t sqrt(v) / (pi (t^4 + 2(u+v) t^2 + (u-v)^2))`` on ``u, v >= 0``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return 2 * t * np.sqrt(v) / (np.pi * (t ** 4 + 2 * (u + v) * t * t + (u - v) ** 2))


# ---------------------------------------------------------------------------
# joint density

def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a non-empty vector")
    if abs(times[-1] - 1.0) > 1e-14 or times[0] <= 0 or np.any(np.diff(times) <= 0):
        raise DomainError("times must satisfy 0 < t_1 < ... < t_d = 1")
    return times


def _b_integrand(b, lp, dts, z):
    zz = np.concatenate([[0.0], z])
    plain = [float(kernel_qb(dt, b, zz[k], zz[k + 1])) for k, dt in enumerate(dts)]
    star = [float(kernel_qbstar(dt, b, zz[k], zz[k + 1])) for k, dt in enumerate(dts)]
    total = 0.0
    for l in range(len(dts)):
        prod = star[l]
        for k in range(len(dts)):
            if k != l:
                prod *= plain[k]
        total += prod
    if total == 0.0:
        return 0.0
    return math.exp((lp.a_lim + lp.c_lim) * b - lp.a_lim * z[-1] + math.log(total))


def eta_joint_density(lp: LimitLawParams, times, z, epsabs=1e-14, epsrel=1e-11) -> float:
    """Joint density of ``(eta_{t_1}, ..., eta_{t_d})`` at ``z``."""
    times = _check_times(times)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dts = np.diff(np.concatenate([[0.0], times]))
    top = min(0.0, float(z.min()))
    # the Gaussian factors confine the integrand to within a few sqrt(dt) of top
    width = 12.0 * math.sqrt(dts.max()) + 2.0 * abs(lp.a_lim + lp.c_lim) * dts.max()
    val, err = integrate.quad(_b_integrand, top - width, top, args=(lp, dts, z),
                              epsabs=epsabs, epsrel=epsrel, limit=200)
    if not math.isfinite(val):
        raise QuadratureNotConverged("joint density integral diverged", estimate=val, error=err)
    return val / calH(lp.a_lim, lp.c_lim)


def eta_joint_density_bww(lp: LimitLawParams, times, z) -> float:
    """Integration-by-parts form of the joint density, valid for ``a + c > 0``."""
    if lp.a_lim + lp.c_lim <= 0:
        raise DomainError("this form requires a + c > 0")
    times = _check_times(times)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dts = np.diff(np.concatenate([[0.0], times]))
    zz = np.concatenate([[0.0], z])
    top = min(0.0, float(z.min()))

    def f(b):
        prod = 1.0
        for k, dt in enumerate(dts):
            prod *= float(kernel_qb(dt, b, zz[k], zz[k + 1]))
        if prod <= 0.0:
            return 0.0
        return math.exp((lp.a_lim + lp.c_lim) * b - lp.a_lim * z[-1] + math.log(prod))

    val, _ = integrate.quad(f, -np.inf, top, epsabs=1e-14, epsrel=1e-11, limit=200)
    return (lp.a_lim + lp.c_lim) * val / calH(lp.a_lim, lp.c_lim)


# ---------------------------------------------------------------------------
# Laplace transform

def _y_grid(dts, upsilon, panel=None, order=12):
    """Gauss-Legendre grid on ``[0, L]`` for the shifted chain variables."""
    dt_max = float(np.max(dts))
    G = float(np.sum(np.abs(upsilon)))
    # beyond L the slowest Gaussian decay exp(-y^2/(2 dt)) beats exp(G y) by e^-40
    L = dt_max * (G + math.sqrt(G * G + 80.0 / dt_max)) + 1.0
    total = float(np.sum(upsilon))
    if total > 0:
        # all-positive chains decay along the diagonal only like exp(-total y)
        L = max(L, 40.0 / total)
    h = panel or min(0.25, 0.3 * math.sqrt(float(np.min(dts))))
    edges = np.linspace(0.0, L, max(2, int(math.ceil(L / h))) + 1)
    return composite_rule(edges, order)


def chain_sum(dts, upsilon, panel=None, order=12):
    """``sum_k int exp(-sum_r upsilon_r y_r) q ... q* (slot k) ... q dy_0..dy_d``.

    Returns the vector of the ``d`` individual terms; the integral over
    ``R_+^{d+1}`` is discretized on one grid reused for every coordinate.
    """
    y, w = _y_grid(dts, upsilon, panel, order)
    X, Y = np.meshgrid(y, y, indexing="ij")
    d = len(dts)
    plain = [kernel_q(dt, X, Y) for dt in dts]
    star = [kernel_qbstar(dt, 0.0, X, Y) for dt in dts]
    ew = [w * np.exp(-u * y) for u in upsilon]
    terms = np.zeros(d)
    for k in range(d):
        v = ew[d].copy()
        for j in range(d - 1, -1, -1):
            K = star[j] if j == k else plain[j]
            v = ew[j] * (K @ v)
        terms[k] = v.sum()
    return terms


def eta_laplace_terms(lp: LimitLawParams, times, c, **kw) -> np.ndarray:
    """Unnormalized contributions to ``psi`` split by the interval holding the argmin."""
    times = _check_times(times)
    c = np.asarray(c, dtype=float)
    if c.shape != times.shape:
        raise DomainError("c and times must have equal length")
    dts = np.diff(np.concatenate([[0.0], times]))
    ups = np.concatenate([[lp.c_lim - c.sum()], c[:-1], [c[-1] + lp.a_lim]])
    return chain_sum(dts, ups, **kw)


def eta_laplace(lp: LimitLawParams, times, c, **kw) -> float:
    """``E[exp(-sum_k c_k eta_{t_k})]``."""
    return float(eta_laplace_terms(lp, times, c, **kw).sum() / calH(lp.a_lim, lp.c_lim))


def brownian_laplace_factor(x, c) -> float:
    """``E[exp(-sum_k c_k B_{x_k} / sqrt 2)] = exp(sum_k s_k^2 dx_k / 4)``."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    s = np.cumsum(c[::-1])[::-1]
    dx = np.diff(np.concatenate([[0.0], x]))
    return math.exp(0.25 * float(np.sum(s * s * dx)))


def limit_height_laplace(lp: LimitLawParams, x, c, **kw) -> float:
    """Laplace transform of ``(B + eta^(a/sqrt2, c/sqrt2)) / sqrt2`` at ``x``.

    ``lp`` holds the scaling limits ``(a, c)`` of the boundary parameters.
    """
    inner = LimitLawParams(lp.a_lim / SQRT2, lp.c_lim / SQRT2)
    return brownian_laplace_factor(x, c) * eta_laplace(inner, x, np.asarray(c, dtype=float) / SQRT2, **kw)


# ---------------------------------------------------------------------------
# importance sampling

@dataclass
class WeightedPathEnsemble:
    grid: np.ndarray
    paths: np.ndarray          # (N, len(grid)) values at the grid (or recorded) times
    minima: np.ndarray         # global path minima
    weights: np.ndarray        # raw tilt weights exp((a+c) min - a w_1)
    ess: float

    @property
    def normalized_weights(self):
        return self.weights / self.weights.sum()

    def value_at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[idx] - t) > 1e-12:
            raise DomainError(f"time {t} is not on the ensemble grid")
        return self.paths[:, idx]

    def weighted_mean(self, values, batches: int = 16):
        """Self-normalized estimate and batch-means standard error."""
        return weighted_batch_mean(values, self.weights, batches)

    def normalizer_estimate(self):
        w = self.weights
        return float(w.mean()), float(w.std(ddof=1) / math.sqrt(w.size))

    def to_csv(self, path, max_paths: int | None = None):
        import csv

        k = self.paths.shape[0] if max_paths is None else min(max_paths, self.paths.shape[0])
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path", "time", "value", "weight"])
            for i in range(k):
                for t, v in zip(self.grid, self.paths[i]):
                    wr.writerow([i, f"{t:.17e}", f"{v:.17e}", f"{self.weights[i]:.17e}"])


def weighted_batch_mean(values, weights, batches: int = 16):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    est = float(np.sum(weights * values) / np.sum(weights))
    vb = np.array_split(values, batches)
    wb = np.array_split(weights, batches)
    ratios = np.array([np.sum(w * v) / np.sum(w) for v, w in zip(vb, wb)])
    se = float(ratios.std(ddof=1) / math.sqrt(batches))
    return est, se


def bridge_minimum(x0, x1, var, u):
    """Exact minimum of a Brownian bridge from ``x0`` to ``x1`` with variance ``var``."""
    return 0.5 * (x0 + x1 - np.sqrt((x1 - x0) ** 2 - 2 * var * np.log(u)))


def _sample_block(rng, nb, m, h, drift=0.0, var_scale=1.0):
    """Paths of ``sqrt(var_scale) B_t + drift t`` on ``m`` steps of size ``h`` plus exact minima."""
    steps = rng.standard_normal((nb, m)) * math.sqrt(var_scale * h) + drift * h
    paths = np.concatenate([np.zeros((nb, 1)), np.cumsum(steps, axis=1)], axis=1)
    u = rng.random((nb, m))
    seg_min = bridge_minimum(paths[:, :-1], paths[:, 1:], var_scale * h, u)
    return paths, seg_min.min(axis=1)


def _block_rngs(seed, N, block=4096):
    sizes = [block] * (N // block) + ([N % block] if N % block else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(np.random.default_rng(s), nb) for s, nb in zip(seqs, sizes)]


def eta_sample(lp: LimitLawParams, m: int = 256, N: int = 10_000, seed: int = 0,
               record_times=None) -> WeightedPathEnsemble:
    """Brownian paths weighted by ``exp((a+c) min - a w_1)``.

    Minima are sampled exactly per grid segment from the bridge-minimum law.
    With ``record_times`` only those columns are kept, which bounds memory
    for large ``N``; otherwise the full grid is stored.
    """
    if m < 256 or m & (m - 1):
        raise DomainError("grid size m must be a power of two >= 256")
    if N < 1000:
        raise DomainError("N must be at least 1000")
    h = 1.0 / m
    grid = np.linspace(0.0, 1.0, m + 1)
    cols = None
    if record_times is not None:
        cols = [int(round(t * m)) for t in record_times]
        if any(abs(c / m - t) > 1e-12 for c, t in zip(cols, record_times)):
            raise DomainError("record_times must lie on the grid")
        grid = grid[cols]
    out_paths, out_min = [], []
    for rng, nb in _block_rngs(seed, N):
        paths, mins = _sample_block(rng, nb, m, h)
        out_paths.append(paths if cols is None else paths[:, cols])
        out_min.append(mins)
    paths = np.concatenate(out_paths)
    mins = np.concatenate(out_min)
    end = paths[:, -1] if (cols is None or cols[-1] == m) else None
    if end is None:
        raise DomainError("record_times must include t=1")
    logw = (lp.a_lim + lp.c_lim) * mins - lp.a_lim * end
    w = np.exp(logw)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if ess < 0.01 * N:
        warnings.warn(f"effective sample size {ess:.1f} below 1% of N={N}", DegenerateESS)
    return WeightedPathEnsemble(grid, paths, mins, w, ess)


@dataclass
class TwoLineReport:
    rows: list  # (statistic, time, two_line, two_line_se, reference, reference_se, z)
    ess: float

    @property
    def max_z(self) -> float:
        return max(abs(r[-1]) for r in self.rows)

    def ok(self, k: float = 3.0) -> bool:
        return self.max_z <= k


def two_line_check(lp: LimitLawParams, m: int = 256, N: int = 20_000, seed: int = 0,
                   times=(0.25, 0.5, 1.0)) -> TwoLineReport:
    """Compare the tilted two-line ensemble against ``((eta + B)/sqrt2, (B - eta)/sqrt2)``
    with ``eta = eta^(sqrt2 a, sqrt2 c)``.

    The difference of the lines is Brownian with variance ``2t`` and drift
    ``-2a``; their sum is an independent driftless Brownian motion with
    variance ``2t``.  Moments of line 1, line 2 and the sum at ``times`` are
    matched against the eta sampler combined with an independent Brownian
    motion.
    """
    a, c = lp.a_lim, lp.c_lim
    h = 1.0 / m
    cols = [int(round(t * m)) for t in times]
    D, S, mins = [], [], []
    for rng, nb in _block_rngs(seed, N):
        pd, md = _sample_block(rng, nb, m, h, drift=-2 * a, var_scale=2.0)
        ps = np.cumsum(rng.standard_normal((nb, m)) * math.sqrt(2 * h), axis=1)
        ps = np.concatenate([np.zeros((nb, 1)), ps], axis=1)
        D.append(pd[:, cols])
        S.append(ps[:, cols])
        mins.append(md)
    D, S, mins = np.concatenate(D), np.concatenate(S), np.concatenate(mins)
    w = np.exp((a + c) * mins)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    line1, line2 = 0.5 * (S + D), 0.5 * (S - D)

    ref = eta_sample(LimitLawParams(SQRT2 * a, SQRT2 * c), m=m, N=N, seed=seed + 1_000_003,
                     record_times=sorted(set(times) | {1.0}))
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0].entropy + 7)
    incr = rng.standard_normal((N, len(times))) * np.sqrt(np.diff(np.concatenate([[0.0], times])))
    B = np.cumsum(incr, axis=1)
    rows = []
    for j, t in enumerate(times):
        eta = ref.value_at(t)
        r1 = (eta + B[:, j]) / SQRT2
        r2 = (B[:, j] - eta) / SQRT2
        for name, sample, refv, wref in (
            ("line1_mean", line1[:, j], r1, ref.weights),
            ("line1_second", line1[:, j] ** 2, r1 ** 2, ref.weights),
            ("line2_mean", line2[:, j], r2, ref.weights),
            ("sum_var", (line1[:, j] + line2[:, j]) ** 2, 2 * t * np.ones(N), np.ones(N)),
        ):
            e1, s1 = weighted_batch_mean(sample, w)
            e2, s2 = weighted_batch_mean(refv, wref)
            z = (e1 - e2) / math.sqrt(s1 * s1 + s2 * s2) if s1 + s2 > 0 else 0.0
            rows.append((name, t, e1, s1, e2, s2, z))
    return TwoLineReport(rows, ess)
