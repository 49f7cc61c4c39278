import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asep_shock import aw_measure as aw
from asep_shock.errors import TimeNotAdmissible
from asep_shock.params import BoundaryParams, ScalingLimitParams, scaling_sequence

FAN = BoundaryParams(0.5, -0.2, 0.5, -0.2, 0.3)
SHOCK = BoundaryParams(1.3, -0.2, 1.1, -0.2, 0.25)


def test_omega_examples():
    assert aw.validate_omega_q(aw.AwParams(0.5, -0.3, 0.2, -0.1, 0.4)).ok
    # a/c = 2 = q^-1 with both outside the unit disc
    rep = aw.validate_omega_q(aw.AwParams(4.0, 0.1, 2.0, 0.0, 0.5))
    assert not rep.ok and [code for code, _ in rep.failures] == ["ii"]
    # abcd = q^-1
    rep = aw.validate_omega_q(aw.AwParams(2.0, 0.5, 0.5, 4.0, 0.5))
    assert "i" in [code for code, _ in rep.failures]
    rep = aw.validate_omega_q(aw.AwParams(0.5, 2.1, 0.2, 0.1, 0.3))
    assert "iii" in [code for code, _ in rep.failures]


def test_density_q0_reduction():
    a, b, c, d = 0.4, -0.3, 0.6, -0.5
    p = aw.AwParams(a, b, c, d, 0.0)
    K = (1 - a * b) * (1 - a * c) * (1 - a * d) * (1 - b * c) * (1 - b * d) * (1 - c * d) / (1 - a * b * c * d)
    y = np.linspace(-0.95, 0.95, 20)
    ref = 2 * K / math.pi * np.sqrt(1 - y * y) / np.prod([1 + e * e - 2 * e * y for e in (a, b, c, d)], axis=0)
    assert np.max(np.abs(aw.aw_density(y, p) - ref)) < 1e-12


def test_fan_density_nonnegative_and_mass_one():
    m = aw.marginal_pi(FAN, 0.8)
    assert not m.atoms
    y = np.cos(np.linspace(0, math.pi, 202)[1:-1])
    assert np.all(m.density(y) >= 0)
    assert m.total_mass() == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("t", [0.66, 0.8, 0.95])
def test_shock_mass_one(t):
    assert aw.marginal_pi(SHOCK, t).total_mass() == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.05, 0.95), st.floats(-0.9, 0.0), st.floats(0.05, 0.95), st.floats(-0.9, 0.0), st.floats(0, 0.8))
def test_probability_measures_in_fan(A, B, C, D, q):
    m = aw.marginal_pi(BoundaryParams(A, B, C, D, q), 1.0)
    assert m.total_mass() == pytest.approx(1.0, abs=1e-8)


def test_atom_generated_by_C():
    n = 400
    a_lim, c_lim = 0.5, -1.0
    bp = scaling_sequence(ScalingLimitParams(a_lim, c_lim, -0.2, -0.1, 0.3), n).params
    m = aw.marginal_pi(bp, 1.0)
    assert len(m.atoms) == 1
    loc, mass = m.atoms[0]
    assert loc == pytest.approx((bp.C + 1 / bp.C) / 2, rel=1e-14)
    assert mass == pytest.approx(2 * c_lim / (c_lim - a_lim), abs=5 / math.sqrt(n))


def test_time_domain():
    dom = aw.admissible_times(FAN)
    assert (dom.lo, dom.hi, dom.ratio) == (0.0, math.inf, None)
    dom = aw.admissible_times(BoundaryParams(1.2, -0.2, 1.2, -0.2, 0.3))
    assert not dom.contains(1.0)
    with pytest.raises(TimeNotAdmissible):
        dom.require(1.0)
    dom = aw.admissible_times(BoundaryParams(1.1, -0.5, 1.05, -0.5, 0.25))
    assert (dom.lo, dom.hi) == pytest.approx((0.5, 2.0))
    assert not dom.contains(1.05 / 1.1 * 0.25)
    assert dom.contains(0.9)


def test_transition_point_mass_and_no_atoms():
    m = aw.transition_P(SHOCK, 0.8, 0.8, 0.3)
    assert m.point_mass and m.atoms == [(0.3, 1.0)]
    # a transition can still carry an atom generated by its own first parameter
    m = aw.transition_P(SHOCK, 0.7, 0.9, 0.3)
    assert m.total_mass() == pytest.approx(1.0, abs=1e-8)


def test_chapman_kolmogorov():
    bp, x, r, s, t = FAN, 0.3, 0.5, 0.8, 1.2
    for g in (lambda z: z, lambda z: z * z):
        inner = lambda ys: np.array([aw.transition_P(bp, s, t, y).integrate(g) for y in np.atleast_1d(ys)])
        lhs = aw.transition_P(bp, r, s, x).integrate(inner)
        rhs = aw.transition_P(bp, r, t, x).integrate(g)
        assert lhs == pytest.approx(rhs, abs=1e-6)


@pytest.mark.parametrize("bp, times", [(FAN, (0.6, 1.0)), (SHOCK, (0.66, 0.76, 0.95))])
def test_joint_marginal_consistency(bp, times):
    ones = [lambda y: np.ones_like(y)] * len(times)
    assert aw.integrate_joint(bp, list(times), ones) == pytest.approx(1.0, abs=1e-7)
    g = lambda y: (1 + y) ** 2
    direct = aw.marginal_pi(bp, times[-1]).integrate(g)
    joint = aw.integrate_joint(bp, list(times), ones[:-1] + [g])
    assert joint == pytest.approx(direct, rel=1e-10)
