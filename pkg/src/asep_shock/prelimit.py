"""Finite-n Laplace transforms of the height function as Askey-Wilson
integrals, the denominator Z_n, and the tangent-scale views of pi_t and
P_{s,t} near the spectral edge y = 1."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import aw_measure as aw
from .errors import DomainError, TimeNotAdmissible
from .params import BoundaryParams
from .asep_exact import block_ends

# e^{-U/4} < 1e-16 beyond the tangent window
U_MAX = 4 * 16 * math.log(10)


@dataclass(frozen=True)
class LaplaceRequest:
    """Observation points ``0 < x_1 < ... < x_d = 1`` and coefficients ``c``."""

    x: tuple
    c: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        c = tuple(float(v) for v in self.c)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "c", c)
        if len(x) != len(c) or not x:
            raise DomainError("x and c must be non-empty and of equal length")
        if abs(x[-1] - 1.0) > 1e-14:
            raise DomainError("the last observation point must be 1")
        if x[0] <= 0 or any(b <= a for a, b in zip(x[:-1], x[1:])):
            raise DomainError("observation points must be strictly increasing in (0, 1]")

    @property
    def d(self) -> int:
        return len(self.x)

    @property
    def s(self) -> np.ndarray:
        """Partial sums ``s_k = c_k + ... + c_d``."""
        return np.cumsum(np.asarray(self.c)[::-1])[::-1]

    @property
    def dx(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.x]))

    def block_sizes(self, n: int) -> np.ndarray:
        return np.diff(np.concatenate([[0], block_ends(n, self.x)]))


def request_from_times(times, x, n: int) -> LaplaceRequest:
    """Coefficients whose integration times ``exp(-2 s_k / sqrt n)`` equal ``times``."""
    s = -0.5 * math.sqrt(n) * np.log(np.asarray(times, dtype=float))
    c = s - np.concatenate([s[1:], [0.0]])
    return LaplaceRequest(tuple(x), tuple(c))


def _log_half_power(m: int, shift: float):
    """``y -> ((shift + y)/2)^m`` evaluated in log space."""

    def g(y):
        base = np.maximum((shift + np.asarray(y)) * 0.5, 1e-300)
        return np.exp(m * np.log(base))

    return g


def _edge_breakpoints(m: int):
    """Angle split isolating the tangent window for large exponents."""
    if m < 50:
        return ()
    r = U_MAX / (4.0 * m)
    return (2 * math.asin(math.sqrt(r)),) if r < 1 else ()


def phi_d_n(req: LaplaceRequest, bp_n: BoundaryParams, n: int, tol: float = aw.DEFAULT_TOL) -> float:
    """``2^{-n} int prod_k (cosh(s_k/sqrt n) + y_k)^{n_k - n_{k-1}}`` over the
    joint measure at times ``exp(-2 s_k / sqrt n)``."""
    rn = math.sqrt(n)
    sizes = req.block_sizes(n)
    times, factors, bps = [], [], []
    dom = aw.admissible_times(bp_n)
    for k, (sk, m) in enumerate(zip(req.s, sizes)):
        if m == 0:
            continue  # empty block integrates out
        t = math.exp(-2 * sk / rn)
        if not dom.contains(t):
            raise TimeNotAdmissible(
                f"time exp(-2 s_{k + 1}/sqrt n)={t!r} (s_{k + 1}={sk!r}) is not admissible",
                t=t, nearest=dom.nearest(t))
        times.append(t)
        factors.append(_log_half_power(int(m), math.cosh(sk / rn)))
        bps.append(_edge_breakpoints(int(m)))
    if not times:
        return 1.0
    return aw.integrate_joint(bp_n, times, factors, tol=tol, breakpoints=bps)


def z_n(bp_n: BoundaryParams, n: int, tol: float = aw.DEFAULT_TOL) -> float:
    """``Z_n = 2^{-n} int (1 + y)^n pi_1(dy)``."""
    dom = aw.admissible_times(bp_n)
    if not dom.contains(1.0):
        if abs(bp_n.A - bp_n.C) <= 1e-12 and bp_n.A > 1:
            raise TimeNotAdmissible(
                "t=1 is not admissible on the coexistence line A=C>1; Z_n has no "
                "integral representation there (approach it by continuity in A, C)",
                t=1.0, nearest=dom.nearest(1.0))
        dom.require(1.0)
    return aw.integrate_joint(bp_n, [1.0], [_log_half_power(n, 1.0)], tol=tol,
                              breakpoints=[_edge_breakpoints(n)])


def z_n_parts(bp_n: BoundaryParams, n: int, tol: float = aw.DEFAULT_TOL):
    """``(continuous, atomic)`` contributions to ``Z_n``."""
    m = aw.marginal_pi(bp_n, 1.0)
    g = _log_half_power(n, 1.0)
    total = z_n(bp_n, n, tol)
    atomic = float(np.sum(m.atom_masses * g(m.atom_locs))) if m.atom_locs.size else 0.0
    return total - atomic, atomic


def laplace_ratio(req: LaplaceRequest, bp_n: BoundaryParams, n: int, tol: float = aw.DEFAULT_TOL) -> float:
    """``Phi_d^(n) / Z_n``, the finite-n height-function Laplace transform."""
    return phi_d_n(req, bp_n, n, tol) / z_n(bp_n, n, tol)


def mpa_moment_ratio(bp: BoundaryParams, t, tol: float = aw.DEFAULT_TOL) -> float:
    """``Pi_n(t) / Pi_n(1)`` with ``Pi_n(t) = int prod_j (1 + t_j + 2 sqrt(t_j) y_j) dpi``.

    ``t`` lists one time per site (non-decreasing); equal consecutive times
    are grouped into a single power.
    """
    t = np.asarray(t, dtype=float)
    n = t.size
    times, factors = [], []
    j = 0
    while j < n:
        k = j
        while k < n and t[k] == t[j]:
            k += 1
        tj, m = float(t[j]), k - j
        rt = math.sqrt(tj)
        # (1 + t + 2 sqrt t y) = 4 sqrt t * ((cosh + y)/2)
        shift = (1 + tj) / (2 * rt)
        times.append(tj)
        factors.append((lambda g, c: (lambda y: c * g(y)))(_log_half_power(m, shift), (4 * rt) ** m))
        j = k
    num = aw.integrate_joint(bp, times, factors, tol=tol)
    den = 4.0 ** n * z_n(bp, n, tol)
    return num / den


# ---------------------------------------------------------------------------
# tangent scale

def limit_atom_location(t: float, c_lim: float) -> float:
    return -(t + c_lim) ** 2


def limit_atom_mass(t: float, a_lim: float, c_lim: float) -> float:
    return 2 * (c_lim + t) / (2 * t + c_lim - a_lim)


def limit_marginal_density(u, t: float, a_lim: float, c_lim: float):
    u = np.asarray(u, dtype=float)
    return (a_lim + c_lim) / math.pi * np.sqrt(u) / (((a_lim - t) ** 2 + u) * ((c_lim + t) ** 2 + u))


def limit_transition_cc(s: float, t: float, u, v, a_lim: float):
    from .limit_process import kernel_p

    return kernel_p(t - s, u, v) * ((a_lim - s) ** 2 + np.asarray(u)) / ((a_lim - t) ** 2 + np.asarray(v))


def limit_transition_dd(s: float, t: float, a_lim: float, c_lim: float) -> float:
    return (c_lim + t) * (2 * s + c_lim - a_lim) / ((c_lim + s) * (2 * t + c_lim - a_lim))


def limit_transition_dc(s: float, t: float, v, a_lim: float, c_lim: float):
    v = np.asarray(v, dtype=float)
    return (limit_marginal_density(v, t, a_lim, c_lim)
            * (a_lim - c_lim - 2 * s) * (2 * t - 2 * s) / ((2 * s - t + c_lim) ** 2 + v))


@dataclass
class TangentMeasureView:
    """Rescaled ``pi_{t_n}`` and ``P_{s_n,t_n}`` in ``u = 2n(1 - y)``, ``t_n = exp(2t/sqrt n)``."""

    bp_n: BoundaryParams
    n: int
    t: float

    def __post_init__(self):
        self.t_n = math.exp(2 * self.t / math.sqrt(self.n))
        self.measure = aw.marginal_pi(self.bp_n, self.t_n)

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return self.measure.density(1 - u / (2 * self.n)) / (2 * self.n)

    @property
    def atoms(self):
        """Scaled atoms ``(2n(1 - y), mass)``."""
        return [(2 * self.n * (1 - y), m) for y, m in self.measure.atoms]

    def atom_from_c(self):
        """The atom generated by ``C_n / sqrt(t_n)`` if present."""
        gen = self.bp_n.C / math.sqrt(self.t_n)
        if gen < 1:
            return None
        loc = -self.n * (gen + 1 / gen - 2)
        for u, m in self.atoms:
            if abs(u - loc) <= 1e-8 * max(1.0, abs(loc)):
                return u, m
        return None

    def transition(self, s: float, u: float) -> aw.SignedMeasure:
        s_n = math.exp(2 * s / math.sqrt(self.n))
        return aw.transition_P(self.bp_n, s_n, self.t_n, 1 - u / (2 * self.n))

    def transition_density(self, s: float, u: float, v):
        v = np.asarray(v, dtype=float)
        return self.transition(s, u).density(1 - v / (2 * self.n)) / (2 * self.n)

    def dct_constant(self, u_grid) -> float:
        """Empirical ``max |density(u)| / sqrt(u)`` on the given grid."""
        u = np.asarray(u_grid, dtype=float)
        u = u[(u > 0) & (u < 4 * self.n)]
        return float(np.max(np.abs(self.density(u)) / np.sqrt(u)))


def tangent_views(bp_n: BoundaryParams, n: int, t: float) -> TangentMeasureView:
    return TangentMeasureView(bp_n, n, t)
