"""Exact stationary law of open ASEP on ``{0,1}^n`` for small ``n``.

Configurations are integers whose bit ``i-1`` is the occupation of site
``i``.  Bitstrings are written site 1 first, e.g. ``"10"`` is a particle at
site 1 and a hole at site 2.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import PreconditionViolation, SizeLimit, SolveFailure
from .params import BoundaryParams, RateParams, boundary_to_rates

MAX_SITES = 14
RESIDUAL_TOL = 1e-11


def occupation_bits(n: int) -> np.ndarray:
    """Boolean matrix of shape ``(2**n, n)``; column ``i`` is site ``i+1``."""
    states = np.arange(1 << n, dtype=np.int64)
    return ((states[:, None] >> np.arange(n)) & 1).astype(bool)


def bitstring(state: int, n: int) -> str:
    return "".join("1" if (state >> i) & 1 else "0" for i in range(n))


def build_generator(r: RateParams, n: int) -> sp.csr_matrix:
    """Sparse rate matrix ``Q`` with ``Q[x, y]`` the jump rate from x to y."""
    if n > MAX_SITES:
        raise SizeLimit(f"n={n} exceeds the exact-solver limit {MAX_SITES}")
    if n < 1:
        raise ValueError("n must be >= 1")
    N = 1 << n
    states = np.arange(N, dtype=np.int64)
    src, dst, rate = [], [], []

    def add(mask, targets, value):
        if value == 0:
            return
        idx = states[mask]
        src.append(idx)
        dst.append(targets[mask])
        rate.append(np.full(idx.size, float(value)))

    first = states & 1
    last = (states >> (n - 1)) & 1
    # site 1: entry alpha, exit gamma
    add(first == 0, states | 1, r.alpha)
    add(first == 1, states & ~1, r.gamma)
    # site n: entry delta, exit beta
    top = 1 << (n - 1)
    add(last == 0, states | top, r.delta)
    add(last == 1, states & ~top, r.beta)
    for i in range(n - 1):
        bi = (states >> i) & 1
        bj = (states >> (i + 1)) & 1
        swap = states ^ ((1 << i) | (1 << (i + 1)))
        add((bi == 1) & (bj == 0), swap, 1.0)
        add((bi == 0) & (bj == 1), swap, r.q)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    rate = np.concatenate(rate)
    Q = sp.coo_matrix((rate, (src, dst)), shape=(N, N)).tocsr()
    out = np.asarray(Q.sum(axis=1)).ravel()
    return (Q - sp.diags(out)).tocsr()


@dataclass(frozen=True)
class StationaryTable:
    n: int
    probs: np.ndarray
    residual: float = 0.0

    def bitstrings(self):
        return [bitstring(s, self.n) for s in range(1 << self.n)]

    def as_dict(self):
        return dict(zip(self.bitstrings(), self.probs.tolist()))

    def density_profile(self) -> np.ndarray:
        return self.probs @ occupation_bits(self.n)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bitstring", "probability"])
            for b, p in zip(self.bitstrings(), self.probs):
                w.writerow([b, f"{p:.17e}"])


def stationary(gen: sp.spmatrix) -> StationaryTable:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` by sparse LU.

    The transposed system has its first equation replaced by the
    normalization, which removes the rank deficiency of one.
    """
    N = gen.shape[0]
    n = int(round(math.log2(N)))
    M = gen.T.tocoo()
    keep = M.row != 0
    rows = np.concatenate([M.row[keep], np.zeros(N, dtype=M.row.dtype)])
    cols = np.concatenate([M.col[keep], np.arange(N, dtype=M.col.dtype)])
    vals = np.concatenate([M.data[keep], np.ones(N)])
    S = sp.csc_matrix((vals, (rows, cols)), shape=(N, N))
    rhs = np.zeros(N)
    rhs[0] = 1.0
    try:
        pi = spla.splu(S, permc_spec="MMD_AT_PLUS_A").solve(rhs)
    except RuntimeError as exc:  # singular factor
        raise SolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(pi)):
        raise SolveFailure("non-finite stationary vector")
    pi = pi / pi.sum()
    res = float(np.max(np.abs(gen.T @ pi)))
    if res > RESIDUAL_TOL:
        raise SolveFailure(f"stationary residual {res:.3e} exceeds {RESIDUAL_TOL}")
    return StationaryTable(n, pi, res)


def solve(params, n: int) -> StationaryTable:
    """Convenience wrapper accepting either parameterization."""
    r = boundary_to_rates(params) if isinstance(params, BoundaryParams) else params
    return stationary(build_generator(r, n))


def joint_moment(st: StationaryTable, t) -> float:
    """``E[prod_i t_i ** tau_i]``."""
    t = np.asarray(t, dtype=float)
    if t.shape != (st.n,) or np.any(t <= 0):
        raise ValueError("t must be a vector of n positive reals")
    w = np.exp(occupation_bits(st.n) @ np.log(t))
    return float(st.probs @ w)


def block_ends(n: int, x) -> list[int]:
    """``n_k = floor(n x_k)``, guarded against round-off just below integers."""
    return [int(math.floor(n * xk + 1e-9)) for xk in x]


def height_laplace(st: StationaryTable, x, c) -> float:
    """``E[exp(-sum_k c_k h_n(x_k) / sqrt n)]`` through a product moment.

    Sites in block ``(n_{k-1}, n_k]`` carry weight ``exp(-2 s_k / sqrt n)``
    with ``s_k = c_k + ... + c_d``; the deterministic prefactor is
    ``exp(sum_k s_k (n_k - n_{k-1}) / sqrt n)``.
    """
    n = st.n
    c = np.asarray(c, dtype=float)
    s = np.cumsum(c[::-1])[::-1]
    ends = block_ends(n, x)
    rn = math.sqrt(n)
    t = np.ones(n)
    log_pref = 0.0
    prev = 0
    for sk, nk in zip(s, ends):
        t[prev:nk] = math.exp(-2 * sk / rn)
        log_pref += sk * (nk - prev) / rn
        prev = nk
    return math.exp(log_pref) * joint_moment(st, t)


def height_laplace_direct(st: StationaryTable, x, c) -> float:
    """Same quantity by direct enumeration of height functions."""
    n = st.n
    h = np.cumsum(2 * occupation_bits(n).astype(float) - 1, axis=1)
    h = np.concatenate([np.zeros((h.shape[0], 1)), h], axis=1)
    ends = block_ends(n, x)
    expo = -sum(ck * h[:, nk] for ck, nk in zip(c, ends)) / math.sqrt(n)
    return float(st.probs @ np.exp(expo))


def sandwich_check(bp1: BoundaryParams, bp2: BoundaryParams, f, tol: float = 1e-12):
    """Moments ``E[prod f_i ** tau_i]`` under two ordered parameter sets.

    Requires ``A' <= A''``, ``C' >= C''`` with equal ``B, D, q``; the first
    moment must dominate the second.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    if n > 10:
        raise PreconditionViolation("sandwich check is limited to n <= 10")
    if not (bp1.A <= bp2.A and bp1.C >= bp2.C and bp1.B == bp2.B and bp1.D == bp2.D and bp1.q == bp2.q):
        raise PreconditionViolation("parameters are not ordered as A'<=A'', C'>=C'', B'=B'', D'=D''")
    if np.any(f <= 0) or np.any(f > 1):
        raise PreconditionViolation("f must lie in (0, 1]")
    m1 = joint_moment(solve(bp1, n), f)
    m2 = joint_moment(solve(bp2, n), f)
    return m1, m2, m1 >= m2 - tol
