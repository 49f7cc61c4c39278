"""Special functions: q-Pochhammer symbols, H(x) = exp(x^2) erfc(x), and the
normalization calH together with the integral identity it comes from."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_PI = 1.0 / math.sqrt(math.pi)

QPOCH_CUTOFF = 1e-17
CALH_SERIES_GAP = 1e-6


def qpoch(a, q: float, n=math.inf):
    """``(a; q)_n = prod_{j<n} (1 - a q^j)``; ``a`` may be complex or an array.

    For ``n = inf`` the product stops once ``|a| q^j < 1e-17`` and the
    remaining tail is folded in as ``1 - a q^J / (1 - q)``, which is exact to
    double precision because the omitted terms are geometric.
    """
    a_arr = np.asarray(a)
    scalar = a_arr.ndim == 0
    out = np.ones_like(a_arr, dtype=np.result_type(a_arr.dtype, np.float64))
    if n == 0:
        return out[()] if scalar else out
    if q == 0.0:
        out = out * (1.0 - a_arr)
        return out[()] if scalar else out
    amax = float(np.max(np.abs(a_arr))) if a_arr.size else 0.0
    if math.isinf(n):
        if amax == 0.0:
            return out[()] if scalar else out
        # smallest J with amax q^J < cutoff
        J = max(0, math.ceil(math.log(QPOCH_CUTOFF / amax) / math.log(q)))
        qj = 1.0
        for _ in range(J):
            out = out * (1.0 - a_arr * qj)
            qj *= q
        out = out * (1.0 - a_arr * qj / (1.0 - q))
    else:
        qj = 1.0
        for _ in range(int(n)):
            out = out * (1.0 - a_arr * qj)
            qj *= q
    return out[()] if scalar else out


def qpoch_multi(args, q: float, n=math.inf):
    """``(a_1, ..., a_k; q)_n`` as the product of the single symbols."""
    out = 1.0
    for a in args:
        out = out * qpoch(a, q, n)
    return out


def scaled_erfc_H(x):
    """``H(x) = exp(x^2) erfc(x)``, overflow-free for large positive ``x``."""
    return special.erfcx(x)


def _calH_equal(a: float) -> float:
    return (1.0 + a * a) * scaled_erfc_H(a / SQRT2) - SQRT_2_OVER_PI * a


def _g_derivs(x: float):
    """First and third derivatives of ``g(x) = x H(x/sqrt2)``."""
    y = x / SQRT2
    H = scaled_erfc_H(y)
    H1 = 2 * y * H - 2 * INV_SQRT_PI
    H2 = 2 * H + 2 * y * H1
    H3 = 4 * H1 + 2 * y * H2
    g1 = H + x * H1 / SQRT2
    g3 = 1.5 * H2 + x * H3 / (2 * SQRT2)
    return g1, g3


def calH(a_lim: float, c_lim: float) -> float:
    """Normalizing constant ``E[exp((a+c) min B - a B_1)]`` in closed form.

    Near the diagonal the difference quotient is replaced by its Taylor
    expansion around the midpoint to avoid cancellation.
    """
    a, c = float(a_lim), float(c_lim)
    if a == c:
        return float(_calH_equal(a))
    h = a - c
    if abs(h) < CALH_SERIES_GAP:
        g1, g3 = _g_derivs(0.5 * (a + c))
        return float(g1 + g3 * h * h / 24.0)
    return float((a * scaled_erfc_H(a / SQRT2) - c * scaled_erfc_H(c / SQRT2)) / h)


def berar_integral(alpha: float, beta: float) -> float:
    """Closed form of the double integral checked by :func:`berar_integral_quad`."""
    return calH(alpha, beta)


def berar_integral_quad(alpha: float, beta: float, epsabs: float = 1e-12, epsrel: float = 1e-11):
    """Brute-force evaluation of
    ``sqrt(2/pi) int_{b<0} int_{x>b} exp((alpha+beta) b - beta x) (x-2b) exp(-(x-2b)^2/2) dx db``.

    The inner variable is shifted to ``u = x - 2b >= -b`` so the Gaussian
    factor is centred; returns ``(value, abserr)``.
    """

    def inner(u, b):
        # exponent combined to avoid overflow of separate factors
        return u * math.exp((alpha + beta) * b - beta * (u + 2 * b) - 0.5 * u * u)

    val, err = integrate.dblquad(
        inner, -np.inf, 0.0, lambda b: -b, lambda b: np.inf, epsabs=epsabs, epsrel=epsrel
    )
    return SQRT_2_OVER_PI * val, SQRT_2_OVER_PI * err
