"""Both sides of the Laplace-transform duality for eta.

The left side is a sum of terms ``Phi_{d,l}`` coming from the tangent-scale
limit of the Askey-Wilson integrals.  They are evaluated either with the
kernel ``p`` (variables ``u >= 0``) or, for ``l < d``, with the killed
Brownian kernel ``q``.  The right side is a sum of terms ``Psi_{d,l}``, the
eta Laplace transform split by the interval that holds the argmin.

Throughout, ``a`` and ``c`` are the scaling limits of the boundary
parameters and the eta process on the right is ``eta^(a/sqrt2, c/sqrt2)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConstraintViolation, QuadratureNotConverged
from .limit_process import (LimitLawParams, _y_grid, brownian_laplace_factor, eta_laplace_terms,
                            eta_sample, kernel_p, kernel_q, kernel_qbstar)
from .quadrature import composite_rule
from .specfun import calH, scaled_erfc_H

SQRT2 = math.sqrt(2.0)
# dense p-kernel matrices beyond this size would not fit comfortably in memory
MAX_P_GRID = 6000


@dataclass(frozen=True)
class DualityInstance:
    """``(a, c, x, c_vec)`` with ``c_k > 0`` and ``-c_d < a < -c``."""

    a_lim: float
    c_lim: float
    x: tuple
    c: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        c = tuple(float(v) for v in self.c)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "c", c)
        if not x or len(x) != len(c):
            raise ConstraintViolation("x and c must be non-empty and of equal length")
        if abs(x[-1] - 1.0) > 1e-14 or x[0] <= 0 or any(b <= a for a, b in zip(x[:-1], x[1:])):
            raise ConstraintViolation("need 0 < x_1 < ... < x_d = 1")
        if min(c) <= 0:
            raise ConstraintViolation("all coefficients c_k must be positive")
        if not (-c[-1] < self.a_lim < -self.c_lim):
            raise ConstraintViolation(
                f"need -c_d < a < -c, got c_d={c[-1]!r}, a={self.a_lim!r}, c={self.c_lim!r}")

    @property
    def d(self) -> int:
        return len(self.x)

    @property
    def s(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.c)[::-1])[::-1]

    @property
    def dx(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.x]))

    @property
    def eta_params(self) -> LimitLawParams:
        return LimitLawParams(self.a_lim / SQRT2, self.c_lim / SQRT2)

    def phi_B(self) -> float:
        """Brownian factor ``exp(sum_k s_k^2 dx_k / 4)``."""
        return brownian_laplace_factor(self.x, self.c)

    def y_star(self, t: float) -> float:
        """Tangent-scale atom location ``-(t + c)^2``."""
        return -(t + self.c_lim) ** 2

    def margin(self) -> float:
        """Distance to the nearest constraint boundary."""
        return min(min(self.c), self.a_lim + self.c[-1], -self.c_lim - self.a_lim)


# ---------------------------------------------------------------------------
# left side, kernel p

def _w_grid(inst: DualityInstance, ell: int, poles, order: int = 12, refine: int = 1):
    """Composite rule in ``w = sqrt(u)`` for the variables ``u_{ell+1..d}``.

    In ``w`` the kernel ``p_t`` is a Lorentzian of width about ``t`` around
    the diagonal, so a uniform panel width tied to the smallest ``c_k`` in
    use resolves it.  Factors ``1/(r^2 + u)`` have poles at ``w = +-i r``
    and only need geometric grading near ``w = 0``.
    """
    dx = inst.dx[ell:]
    c_used = np.asarray(inst.c[ell:-1])
    h = min(0.5, 0.75 * float(c_used.min())) if c_used.size else 0.5
    h /= refine
    # exp(-W^2 dx / 4) < 1e-17
    W = math.sqrt(4 * 17 * math.log(10) / float(dx.min()))
    r = min([abs(p) for p in poles] + [h]) / 2
    edges = [0.0]
    e = r / refine
    while e < h:
        edges.append(e)
        e *= 2
    edges.extend(np.arange(edges[-1] + h, W + h, h).tolist())
    w, om = composite_rule(np.asarray(edges), order)
    return w, om * 2 * w  # du = 2 w dw


def _p_chain(inst: DualityInstance, ell: int, start, poles, refine: int = 1) -> float:
    """``int start(u_{l+1}) prod p_{c_{k-1}}(u_{k-1}, u_k) e^{-sum dx_k u_k/4} / ((a+s_d)^2+u_d)``."""
    d = inst.d
    s = inst.s
    dx = inst.dx
    w, mu = _w_grid(inst, ell, poles, refine=refine)
    if d - 1 > ell and w.size > MAX_P_GRID:
        raise QuadratureNotConverged(
            f"p-kernel grid of {w.size} nodes exceeds {MAX_P_GRID}; a coefficient c_k is too small "
            "for the p-form, use phi_dl_qform")
    u = w * w
    v = np.exp(-0.25 * dx[d - 1] * u) / ((inst.a_lim + s[d - 1]) ** 2 + u)
    for k in range(d - 1, ell, -1):
        # variable index k (1-based) feeds k+1 through p_{c_k}
        P = kernel_p(inst.c[k - 1], u[:, None], u[None, :])
        v = np.exp(-0.25 * dx[k - 1] * u) * (P @ (mu * v))
    return float(np.sum(mu * start(u) * v))


def phi_dl(inst: DualityInstance, ell: int, refine: int = 1) -> float:
    """``Phi_{d,l}`` through the kernel ``p``; ``l = d`` is closed form."""
    d = inst.d
    if not 0 <= ell <= d:
        raise ValueError(f"ell must lie in 0..{d}")
    a, c = inst.a_lim, inst.c_lim
    s, dx = inst.s, inst.dx
    if ell == d:
        return math.exp(0.25 * float(np.sum(dx * (s - c) ** 2))) * (2 * c - 2 * s[-1]) / (c - 2 * s[-1] - a)
    pref = (a + c) / math.pi
    if ell == 0:
        r1 = c - s[0]
        start = lambda u: np.sqrt(u) / (r1 * r1 + u)
        poles = (r1, a + s[-1])
    else:
        pref *= math.exp(0.25 * float(np.sum(dx[:ell] * (s[:ell] - c) ** 2)))
        rp = c - s[ell]
        rm = c - 2 * s[ell - 1] + s[ell]
        k4 = 4 * (c - s[ell - 1]) * (s[ell] - s[ell - 1])
        start = lambda u: k4 * np.sqrt(u) / ((rp * rp + u) * (rm * rm + u))
        poles = (rp, rm, a + s[-1])
    val = pref * _p_chain(inst, ell, start, poles, refine)
    if not math.isfinite(val):
        raise QuadratureNotConverged(f"Phi_(d,{ell}) is not finite", estimate=val)
    return val


def phi_10_closed(a_lim: float, c_lim: float, s: float) -> float:
    """Closed form of ``Phi_{1,0}`` through ``H(x) = exp(x^2) erfc(x)``."""
    H = scaled_erfc_H
    return float(((s - c_lim) * H((s - c_lim) / 2) - (a_lim + s) * H((a_lim + s) / 2)) / (c_lim - a_lim - 2 * s))


# ---------------------------------------------------------------------------
# left side, kernel q

def _q_chain(dts, upsilon) -> float:
    """``int_{R_+^{m+1}} exp(-sum_r upsilon_r z_r) prod q_{dt_k}(z_{k-1}, z_k) dz``."""
    z, w = _y_grid(dts, upsilon)
    v = w * np.exp(-upsilon[-1] * z)
    for j in range(len(dts) - 1, -1, -1):
        v = w * np.exp(-upsilon[j] * z) * (kernel_q(dts[j], z[:, None], z[None, :]) @ v)
    return float(v.sum())


def phi_dl_qform(inst: DualityInstance, ell: int, split: bool = False):
    """``Phi_{d,l}`` for ``l < d`` through the killed kernel ``q``.

    With ``split=True`` and ``l >= 1`` returns ``(Phi_+, Phi_-)`` whose
    difference is ``Phi_{d,l}``.
    """
    d = inst.d
    if not 0 <= ell <= d - 1:
        raise ValueError(f"ell must lie in 0..{d - 1}")
    a, c = inst.a_lim, inst.c_lim
    s, dx = inst.s, inst.dx
    cv = np.asarray(inst.c)
    dts = dx[ell:]
    tail = np.concatenate([cv[ell:-1], [cv[-1] + a]]) / SQRT2
    if ell == 0:
        ups = np.concatenate([[(s[0] - c) / SQRT2], tail])
        return (a + c) / SQRT2 * _q_chain(dts, ups)
    pref = (a + c) / SQRT2 * math.exp(0.25 * float(np.sum(dx[:ell] * (s[:ell] - c) ** 2)))
    plus = pref * _q_chain(dts, np.concatenate([[-(c - s[ell]) / SQRT2], tail]))
    minus = pref * _q_chain(dts, np.concatenate([[-(c + s[ell] - 2 * s[ell - 1]) / SQRT2], tail]))
    if not (math.isfinite(plus) and math.isfinite(minus)):
        raise QuadratureNotConverged(f"Phi_(d,{ell},+-) is not finite", estimate=(plus, minus))
    return (plus, minus) if split else plus - minus


# ---------------------------------------------------------------------------
# right side

def _psi_upsilon(inst: DualityInstance) -> np.ndarray:
    lp = inst.eta_params
    cs = np.asarray(inst.c) / SQRT2
    return np.concatenate([[lp.c_lim - cs.sum()], cs[:-1], [cs[-1] + lp.a_lim]])


def psi_dl(inst: DualityInstance, ell: int, epsrel: float = 1e-10) -> float:
    """``Psi_{d,l}`` by adaptive quadrature over the barrier level ``b``.

    For each ``b`` the coordinates are shifted to ``y = z - b``; the chain
    then starts from the fixed point ``y_0 = -b`` and runs over a
    Gauss-Legendre grid on ``[0, L]``.
    """
    d = inst.d
    if not 1 <= ell <= d:
        raise ValueError(f"ell must lie in 1..{d}")
    dts = inst.dx
    ups = _psi_upsilon(inst)
    y, w = _y_grid(dts, ups)
    L = float(y[-1])
    v = w * np.exp(-ups[d] * y)
    for j in range(d - 1, 0, -1):
        K = kernel_qbstar(dts[j], 0.0, y[:, None], y[None, :]) if j + 1 == ell else \
            kernel_q(dts[j], y[:, None], y[None, :])
        v = w * np.exp(-ups[j] * y) * (K @ v)
    def f(b):
        row = kernel_qbstar(dts[0], 0.0, -b, y) if ell == 1 else kernel_q(dts[0], -b, y)
        return math.exp(ups[0] * b) * float(row @ v)

    val, err = integrate.quad(f, -L, 0.0, epsabs=0.0, epsrel=epsrel, limit=400)
    if not math.isfinite(val) or err > 1e3 * epsrel * abs(val) + 1e-300:
        raise QuadratureNotConverged(f"Psi_(d,{ell}) b-integral", estimate=val, error=err)
    return val


def psi_terms_chain(inst: DualityInstance) -> np.ndarray:
    """All ``Psi_{d,l}`` at once from the eta Laplace chain (``y_0`` on the grid)."""
    return eta_laplace_terms(inst.eta_params, inst.x, np.asarray(inst.c) / SQRT2)


def duality_lhs(inst: DualityInstance, form: str = "p") -> float:
    if form == "p":
        return sum(phi_dl(inst, l) for l in range(inst.d + 1))
    if form == "q":
        return sum(phi_dl_qform(inst, l) for l in range(inst.d)) + phi_dl(inst, inst.d)
    raise ValueError("form must be 'p' or 'q'")


@dataclass(frozen=True)
class DualityResidual:
    lhs: float
    rhs: float
    abs_gap: float
    rel_gap: float
    method: str
    rhs_se: float = 0.0

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.abs_gap, self.rel_gap))


def duality_residual(inst: DualityInstance, method: str = "quadrature", N: int = 200_000,
                     m: int = 256, seed: int = 0) -> DualityResidual:
    """Gap between ``sum_l Phi_{d,l}`` and ``sum_l Psi_{d,l}``.

    ``method="quadrature"`` evaluates the right side by the ``b`` route of
    :func:`psi_dl`; ``method="mc"`` estimates it with the eta sampler, which
    requires every ``x_k`` to lie on the sampler grid.
    """
    lhs = duality_lhs(inst, "p")
    se = 0.0
    if method == "quadrature":
        rhs = sum(psi_dl(inst, l) for l in range(1, inst.d + 1))
    elif method == "mc":
        lp = inst.eta_params
        ens = eta_sample(lp, m=m, N=N, seed=seed, record_times=inst.x)
        vals = np.exp(-(ens.paths @ np.asarray(inst.c)) / SQRT2)
        est, se0 = ens.weighted_mean(vals)
        H = calH(lp.a_lim, lp.c_lim)
        rhs, se = H * est, H * se0
    else:
        raise ValueError("method must be 'quadrature' or 'mc'")
    gap = abs(lhs - rhs)
    return DualityResidual(lhs, rhs, gap, gap / abs(rhs), method, se)


# ---------------------------------------------------------------------------
# instance generation and reporting

def random_instance(rng: np.random.Generator, d: int, margin: float = 0.05) -> DualityInstance:
    """Admissible instance with every strict inequality held by ``margin``."""
    while True:
        c_lim = rng.uniform(-1.5, -0.1)
        c = rng.uniform(0.2, 1.5, size=d)
        lo, hi = -c[-1] + margin, -c_lim - margin
        if hi - lo < margin:
            continue
        a_lim = rng.uniform(lo, hi)
        if d == 1:
            x = (1.0,)
        else:
            x = tuple(np.sort(rng.uniform(0.15, 0.85, size=d - 1)).tolist()) + (1.0,)
            if np.min(np.diff(np.concatenate([[0.0], x]))) < 0.1:
                continue
        return DualityInstance(float(a_lim), float(c_lim), x, tuple(c.tolist()))


def d1_grid(size: int = 5):
    """``size^3`` admissible ``(a, c, s)`` for ``d = 1`` on a product grid."""
    out = []
    for s in np.linspace(0.3, 2.0, size):
        for c_lim in np.linspace(-2.0, -0.2, size):
            for frac in np.linspace(0.1, 0.9, size):
                a_lim = -s + frac * (s - c_lim)
                out.append(DualityInstance(float(a_lim), float(c_lim), (1.0,), (float(s),)))
    return out


REPORT_COLUMNS = ("d", "a", "c", "x", "coeffs", "lhs", "rhs", "abs_gap", "rel_gap", "method")


def write_report(path, rows):
    """``rows`` are ``(instance, DualityResidual)`` pairs."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(REPORT_COLUMNS)
        for inst, r in rows:
            wr.writerow([inst.d, f"{inst.a_lim:.17e}", f"{inst.c_lim:.17e}",
                         " ".join(f"{v:.17e}" for v in inst.x),
                         " ".join(f"{v:.17e}" for v in inst.c),
                         f"{r.lhs:.17e}", f"{r.rhs:.17e}", f"{r.abs_gap:.17e}", f"{r.rel_gap:.17e}",
                         r.method])
