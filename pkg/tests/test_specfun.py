import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from asep_shock.specfun import berar_integral, berar_integral_quad, calH, qpoch, scaled_erfc_H


def test_qpoch_finite_examples():
    assert qpoch(0.7, 0.3, 0) == 1.0
    assert qpoch(0.5, 0.1, 2) == pytest.approx(0.475, rel=1e-15)
    assert qpoch(0.0, 0.6) == 1.0


@given(st.floats(-3, 3), st.floats(0.0, 0.95))
def test_qpoch_infinite_matches_mpmath(a, q):
    ref = float(mpmath.qp(a, q)) if q > 0 else 1 - a
    assert qpoch(a, q) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_qpoch_complex_and_array():
    z = 0.4 + 0.3j
    assert qpoch(z, 0.5) == pytest.approx(complex(mpmath.qp(z, 0.5)), rel=1e-13)
    arr = qpoch(np.array([0.1, 0.2]), 0.5)
    assert arr.shape == (2,)


def test_H_values():
    assert scaled_erfc_H(0.0) == 1.0
    assert scaled_erfc_H(1.0) + scaled_erfc_H(-1.0) == pytest.approx(2 * math.e, rel=1e-14)
    assert 0.99 <= 100 * math.sqrt(math.pi) * scaled_erfc_H(100.0) <= 1.0


@given(st.floats(-4, 4))
def test_H_reflection(x):
    assert scaled_erfc_H(x) + scaled_erfc_H(-x) == pytest.approx(2 * math.exp(x * x), rel=1e-13)


def test_calH_basic():
    assert calH(0.0, 0.0) == pytest.approx(1.0, rel=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_calH_symmetric(a, c):
    assert calH(a, c) == pytest.approx(calH(c, a), rel=1e-13)


@pytest.mark.parametrize("a", [-1.0, -0.3, 0.0, 0.7])
def test_calH_continuous_on_diagonal(a):
    base = calH(a, a)
    for eps in (1e-7, 1e-5, 1e-3):
        assert calH(a + eps, a - eps) == pytest.approx(base, abs=5 * eps)


def test_calH_monte_carlo():
    # E[exp((a+c) min B - a B_1)] over discretized Brownian paths with exact bridge minima
    rng = np.random.default_rng(3)
    a, c, N, m = 1.0, -2.0, 40_000, 128
    steps = rng.standard_normal((N, m)) / math.sqrt(m)
    w = np.concatenate([np.zeros((N, 1)), np.cumsum(steps, axis=1)], axis=1)
    x0, x1 = w[:, :-1], w[:, 1:]
    seg = 0.5 * (x0 + x1 - np.sqrt((x1 - x0) ** 2 - 2 / m * np.log(rng.random((N, m)))))
    vals = np.exp((a + c) * seg.min(axis=1) - a * w[:, -1])
    est, se = vals.mean(), vals.std(ddof=1) / math.sqrt(N)
    assert abs(est - calH(a, c)) < 3 * se


def test_berar_closed_form():
    assert berar_integral(0.0, 0.0) == pytest.approx(1.0)
    val, err = berar_integral_quad(1.3, -0.4)
    assert abs(berar_integral(1.3, -0.4) - val) < 1e-8
    assert berar_integral(0.4, -1.1) == pytest.approx(berar_integral(-1.1, 0.4), rel=1e-14)
