import math

import numpy as np
import pytest
from scipy import integrate

from asep_shock import asep_exact as ex
from asep_shock import prelimit as pl
from asep_shock.errors import DomainError, TimeNotAdmissible
from asep_shock.params import BoundaryParams, ScalingLimitParams, scaling_sequence

FAN = BoundaryParams(0.5, -0.2, 0.5, -0.2, 0.3)
SHOCK = BoundaryParams(1.3, -0.2, 1.1, -0.2, 0.25)


@pytest.mark.parametrize("bp, n, times, x", [
    (FAN, 3, (0.6,), (1.0,)),
    (FAN, 6, (0.6, 1.0), (0.5, 1.0)),
    (SHOCK, 6, (0.66, 0.95), (0.5, 1.0)),
])
def test_quadrature_matches_exact(bp, n, times, x):
    req = pl.request_from_times(times, x, n)
    exact = ex.height_laplace(ex.solve(bp, n), req.x, req.c)
    assert pl.laplace_ratio(req, bp, n) == pytest.approx(exact, rel=1e-8)


def test_mpa_ratio_is_product_moment():
    st = ex.solve(FAN, 4)
    t = [0.5, 0.5, 0.8, 1.3]
    assert pl.mpa_moment_ratio(FAN, t) == pytest.approx(ex.joint_moment(st, t), rel=1e-9)


def test_request_validation():
    with pytest.raises(DomainError):
        pl.LaplaceRequest((0.5,), (1.0,))
    with pytest.raises(DomainError):
        pl.LaplaceRequest((0.6, 0.5, 1.0), (1, 1, 1))
    with pytest.raises(DomainError):
        pl.LaplaceRequest((0.5, 1.0), (1.0,))


def test_inadmissible_time_reports_nearest():
    bp = BoundaryParams(1.2, -0.2, 1.2, -0.2, 0.3)
    with pytest.raises(TimeNotAdmissible) as info:
        pl.z_n(bp, 10)
    assert "coexistence" in str(info.value)
    assert info.value.nearest is not None


def test_mpa_ratio_at_unit_times():
    assert pl.mpa_moment_ratio(FAN, [1.0] * 5) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("a, c, t", [(0.5, -1.0, 0.2), (0.5, -1.0, 0.4), (1.5, -1.0, 1.2)])
def test_limit_marginal_is_probability(a, c, t):
    cont = integrate.quad(lambda u: pl.limit_marginal_density(u, t, a, c), 0, math.inf, epsabs=1e-12)[0]
    atom = pl.limit_atom_mass(t, a, c) if c + t < 0 else 0.0
    assert cont + atom == pytest.approx(1.0, abs=1e-9)


def test_limit_dd_transition_composes():
    a, c = 0.5, -1.0
    r, s, t = 0.1, 0.3, 0.6
    assert pl.limit_transition_dd(r, s, a, c) * pl.limit_transition_dd(s, t, a, c) == pytest.approx(
        pl.limit_transition_dd(r, t, a, c), rel=1e-14)


def test_tangent_atom_converges():
    a, c, t = 0.5, -1.0, 0.3
    n = 10_000
    bp = scaling_sequence(ScalingLimitParams(a, c, -0.2, -0.1, 0.3), n).params
    u, m = pl.tangent_views(bp, n, t).atom_from_c()
    assert u == pytest.approx(pl.limit_atom_location(t, c), rel=5e-2)
    assert m == pytest.approx(pl.limit_atom_mass(t, a, c), rel=5e-2)


def test_tangent_density_converges():
    a, c, t = 0.5, -1.0, 0.3
    n = 10_000
    bp = scaling_sequence(ScalingLimitParams(a, c, -0.2, -0.1, 0.3), n).params
    v = pl.tangent_views(bp, n, t)
    u = np.array([0.1, 0.5, 2.0, 5.0])
    assert np.allclose(v.density(u), pl.limit_marginal_density(u, t, a, c), rtol=2e-2)
