import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from asep_shock import asep_exact as ex
from asep_shock.errors import PreconditionViolation, SizeLimit
from asep_shock.params import BoundaryParams, RateParams, rates_to_boundary

rates = st.builds(RateParams, st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.9))


def dense_oracle(r, n):
    Q = ex.build_generator(r, n).toarray()
    v = sla.null_space(Q.T)[:, 0]
    return v / v.sum()


def test_single_site():
    r = RateParams(0.7, 0.4, 0.2, 0.1, 0.5)
    st_ = ex.solve(r, 1)
    assert st_.as_dict()["1"] == pytest.approx((0.7 + 0.1) / (0.7 + 0.4 + 0.2 + 0.1), rel=1e-14)


def test_tasep_two_sites_balance():
    # balance equations with alpha=beta=1 solve to (1, 2, 1, 1)/5 over 00, 10, 01, 11
    d = ex.solve(RateParams(1.0, 1.0, 0.0, 0.0, 0.0), 2).as_dict()
    for key, w in {"00": 1, "10": 2, "01": 1, "11": 1}.items():
        assert d[key] == pytest.approx(w / 5, abs=1e-15)


@settings(max_examples=25)
@given(rates, st.integers(1, 6))
def test_generator_rows_and_stationarity(r, n):
    Q = ex.build_generator(r, n)
    assert np.max(np.abs(np.asarray(Q.sum(axis=1)).ravel())) < 1e-12
    st_ = ex.solve(r, n)
    assert np.all(st_.probs > -1e-15)
    assert np.allclose(st_.probs, dense_oracle(r, n), atol=1e-11)


@settings(max_examples=25)
@given(rates, st.integers(2, 6))
def test_moment_identities(r, n):
    st_ = ex.solve(r, n)
    assert ex.joint_moment(st_, np.ones(n)) == pytest.approx(1.0, abs=1e-12)
    t = np.ones(n)
    t[0] = 2.0
    assert ex.joint_moment(st_, t) == pytest.approx(1 + st_.density_profile()[0], abs=1e-12)


@settings(max_examples=25)
@given(rates, st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_height_laplace_routes_agree(r, c):
    st_ = ex.solve(r, 6)
    for x in [(1.0,), (0.5, 1.0)]:
        cc = c[: len(x)]
        assert ex.height_laplace(st_, x, cc) == pytest.approx(ex.height_laplace_direct(st_, x, cc), rel=1e-12)


def test_sandwich_example_and_preconditions():
    lo = BoundaryParams(0.3, -0.2, 0.9, -0.1, 0.3)
    hi = BoundaryParams(0.8, -0.2, 0.4, -0.1, 0.3)
    m1, m2, ok = ex.sandwich_check(lo, hi, np.full(5, 0.5))
    assert ok and m1 >= m2
    with pytest.raises(PreconditionViolation):
        ex.sandwich_check(hi, lo, np.full(5, 0.5))
    with pytest.raises(PreconditionViolation):
        ex.sandwich_check(lo, hi, np.full(5, 1.5))
    with pytest.raises(PreconditionViolation):
        ex.sandwich_check(lo, hi, np.full(11, 0.5))


def test_size_limit():
    with pytest.raises(SizeLimit):
        ex.build_generator(RateParams(1, 1, 0, 0, 0), ex.MAX_SITES + 1)


def test_csv(tmp_path):
    st_ = ex.solve(RateParams(1, 1, 0, 0, 0), 2)
    p = tmp_path / "t.csv"
    st_.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "bitstring,probability" and len(lines) == 5
