import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asep_shock.errors import DomainError
from asep_shock.params import (BoundaryParams, Phase, RateParams, Region, ScalingLimitParams,
                               boundary_to_rates, classify, kappa, rates_to_boundary, scaling_sequence)


def test_kappa_tasep_values():
    assert kappa(0.5, 0.0, 0.0, +1) == 1.0
    assert kappa(0.5, 0.0, 0.0, -1) == 0.0
    assert kappa(1.0, 1.0, 0.0, +1) * kappa(1.0, 1.0, 0.0, -1) == pytest.approx(-1.0, abs=1e-15)


@given(st.floats(0.01, 5), st.floats(0, 5), st.floats(0, 0.95))
def test_kappa_root_product(x, y, q):
    assert kappa(x, y, q, +1) * kappa(x, y, q, -1) == pytest.approx(-y / x, rel=1e-12, abs=1e-15)


def test_kappa_rejects_bad_input():
    with pytest.raises(DomainError):
        kappa(0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        kappa(1.0, -1.0, 0.0)


@pytest.mark.parametrize("rates, expected", [
    (RateParams(0.5, 0.5), (1.0, 0.0, 1.0, 0.0)),
    (RateParams(1.0, 1.0), (0.0, 0.0, 0.0, 0.0)),
])
def test_rates_to_boundary_examples(rates, expected):
    b = rates_to_boundary(rates)
    assert (b.A, b.B, b.C, b.D) == pytest.approx(expected, abs=1e-15)


def test_boundary_to_rates_examples():
    r = boundary_to_rates(BoundaryParams(1, 0, 1, 0, 0))
    assert (r.alpha, r.beta, r.gamma, r.delta) == pytest.approx((0.5, 0.5, 0, 0))
    r = boundary_to_rates(BoundaryParams(0, 0, 0, 0, 0))
    assert (r.alpha, r.beta, r.gamma, r.delta) == pytest.approx((1, 1, 0, 0))


@given(st.floats(0.05, 3), st.floats(0.05, 3), st.floats(0, 3), st.floats(0, 3), st.floats(0, 0.9))
def test_rates_round_trip(a, b, g, d, q):
    r = RateParams(a, b, g, d, q)
    back = boundary_to_rates(rates_to_boundary(r))
    assert np.allclose([back.alpha, back.beta, back.gamma, back.delta],
                       [a, b, g, d], rtol=0, atol=1e-12 * max(1, a, b, g, d))


@given(st.floats(0, 4), st.floats(-0.95, 0), st.floats(0, 4), st.floats(-0.95, 0), st.floats(0, 0.9))
def test_boundary_round_trip(A, B, C, D, q):
    bp = BoundaryParams(A, B, C, D, q)
    back = rates_to_boundary(boundary_to_rates(bp))
    assert np.allclose([back.A, back.B, back.C, back.D], [A, B, C, D], rtol=0, atol=1e-11)


@pytest.mark.parametrize("A, C, phase, region", [
    (2.0, 0.3, Phase.HIGH_DENSITY, Region.FAN),
    (2.0, 1.5, Phase.HIGH_DENSITY, Region.SHOCK),
    (1.2, 1.2, Phase.COEXISTENCE, Region.SHOCK),
    (0.3, 2.0, Phase.LOW_DENSITY, Region.FAN),
    (0.5, 0.5, Phase.MAX_CURRENT, Region.FAN),
])
def test_classify(A, C, phase, region):
    lab = classify(BoundaryParams(A, -0.1, C, -0.1, 0.2))
    assert (lab.phase, lab.region) == (phase, region)


def test_scaling_sequence_examples():
    assert scaling_sequence(ScalingLimitParams(0, 0), 50).params.A == 1.0
    sb = scaling_sequence(ScalingLimitParams(0.5, -1.0), 100)
    assert sb.params.A == pytest.approx(math.exp(-0.05), rel=1e-15)
    assert sb.params.C == pytest.approx(math.exp(0.1), rel=1e-15)
    assert classify(sb.params).region is Region.SHOCK
    n = 10**6
    A = scaling_sequence(ScalingLimitParams(0.5, -1.0), n).params.A
    assert abs(math.sqrt(n) * (1 - A) - 0.5) < 1e-3


def test_parameter_validation():
    with pytest.raises(DomainError):
        RateParams(0.0, 1.0)
    with pytest.raises(DomainError):
        BoundaryParams(1.0, 0.5, 1.0, 0.0)
    with pytest.raises(DomainError):
        ScalingLimitParams(0.5, -1, q=1.0)
