import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from asep_shock import limit_process as lp
from asep_shock.errors import DomainError
from asep_shock.specfun import calH

LP = lp.LimitLawParams(1.0, 0.5)


def test_kernel_values():
    assert float(lp.kernel_q(1.0, 1.0, 1.0)) == pytest.approx((1 - math.exp(-2)) / math.sqrt(2 * math.pi), rel=1e-15)
    assert float(lp.kernel_p(1.0, 0.0, 1.0)) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert float(lp.kernel_q(1.0, -0.1, 1.0)) == 0.0


@settings(max_examples=20)
@given(st.floats(0.1, 3), st.floats(0.01, 3), st.floats(0.01, 3))
def test_killed_kernel_symmetric(t, x, y):
    assert float(lp.kernel_q(t, x, y)) == pytest.approx(float(lp.kernel_q(t, y, x)), rel=1e-12, abs=1e-300)


def test_starred_kernel_is_barrier_derivative():
    t, b, x, y, h = 0.7, -0.3, 0.4, 0.9, 1e-5
    fd = -(lp.kernel_qb(t, b + h, x, y) - lp.kernel_qb(t, b - h, x, y)) / (2 * h)
    assert float(lp.kernel_qbstar(t, b, x, y)) == pytest.approx(float(fd), rel=1e-8)


@pytest.mark.parametrize("t, u", [(0.5, 0.0), (1.0, 2.0)])
def test_p_kernel_mass_and_semigroup(t, u):
    mass = integrate.quad(lambda v: float(lp.kernel_p(t, u, v)), 0, math.inf, limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    v = 0.8
    comp = integrate.quad(lambda w: float(lp.kernel_p(t, u, w) * lp.kernel_p(0.3, w, v)), 0, math.inf, limit=200)[0]
    assert comp == pytest.approx(float(lp.kernel_p(t + 0.3, u, v)), rel=1e-7)


@pytest.mark.parametrize("times, z", [((1.0,), (0.7,)), ((0.5, 1.0), (0.3, 0.7)), ((0.5, 1.0), (-0.2, 0.4))])
def test_density_forms_agree(times, z):
    assert lp.eta_joint_density(LP, times, z) == pytest.approx(lp.eta_joint_density_bww(LP, times, z), abs=1e-8)


def test_bww_domain():
    with pytest.raises(DomainError):
        lp.eta_joint_density_bww(lp.LimitLawParams(0.5, -1.0), (1.0,), (0.1,))


def test_one_time_laplace_matches_density():
    c = 0.8
    f = lambda z: math.exp(-c * z) * lp.eta_joint_density(LP, (1.0,), (z,))
    direct = integrate.quad(f, -12, 12, points=[0.0], limit=200)[0]
    assert lp.eta_laplace(LP, (1.0,), (c,)) == pytest.approx(direct, rel=1e-7)


def test_two_time_marginal_consistency():
    c = 0.6
    one = lp.eta_laplace(LP, (1.0,), (c,))
    two = lp.eta_laplace(LP, (0.5, 1.0), (0.0, c))
    assert two == pytest.approx(one, rel=1e-9)


def test_zero_coefficients():
    assert lp.eta_laplace(LP, (0.5, 1.0), (0.0, 0.0)) == pytest.approx(1.0, rel=1e-10)
    assert lp.limit_height_laplace(LP, (1.0,), (0.0,)) == pytest.approx(1.0, rel=1e-10)


def test_brownian_factor():
    assert lp.brownian_laplace_factor((1.0,), (2.0,)) == pytest.approx(math.e)
    assert lp.brownian_laplace_factor((0.5, 1.0), (1.0, 1.0)) == pytest.approx(math.exp(0.25 * (4 * 0.5 + 0.5)))


def test_sampler_matches_quadrature():
    ens = lp.eta_sample(LP, m=256, N=20_000, seed=3, record_times=(0.5, 1.0))
    est, se = ens.weighted_mean(np.exp(-0.5 * ens.value_at(0.5) - 0.5 * ens.value_at(1.0)))
    ref = lp.eta_laplace(LP, (0.5, 1.0), (0.5, 0.5))
    assert abs(est - ref) < 4 * se + 2e-3
    z, zse = ens.normalizer_estimate()
    assert abs(z - calH(LP.a_lim, LP.c_lim)) < 4 * zse + 2e-3


def test_sampler_flat_weights_and_validation():
    ens = lp.eta_sample(lp.LimitLawParams(0.0, 0.0), N=1000, seed=1)
    assert np.all(ens.weights == 1.0)
    assert ens.ess == pytest.approx(1000)
    with pytest.raises(DomainError):
        lp.eta_sample(LP, m=100)
    with pytest.raises(DomainError):
        lp.eta_sample(LP, N=10)


def test_sampler_seeded():
    a = lp.eta_sample(LP, N=1000, seed=5, record_times=(1.0,))
    b = lp.eta_sample(LP, N=1000, seed=5, record_times=(1.0,))
    assert np.array_equal(a.paths, b.paths) and np.array_equal(a.weights, b.weights)


def test_bridge_minimum_below_endpoints():
    u = np.random.default_rng(0).random(1000)
    m = lp.bridge_minimum(0.2, -0.1, 0.01, u)
    assert np.all(m <= -0.1)


def test_two_line_ensemble():
    rep = lp.two_line_check(lp.LimitLawParams(0.5, 0.3), N=20_000, seed=2)
    assert rep.ok(4.0)


def test_two_line_driftless_variance():
    rep = lp.two_line_check(lp.LimitLawParams(0.0, 0.0), N=20_000, seed=4)
    (_, _, e1, s1, *_), = [r for r in rep.rows if r[0] == "line1_second" and r[1] == 1.0]
    assert abs(e1 - 1.0) < 3 * s1
