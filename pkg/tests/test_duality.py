import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asep_shock import duality as du
from asep_shock.errors import ConstraintViolation, QuadratureNotConverged
from asep_shock.limit_process import eta_laplace
from asep_shock.specfun import calH

SQRT2 = math.sqrt(2.0)
D1 = du.DualityInstance(0.5, -1.0, (1.0,), (1.0,))
D2 = du.DualityInstance(0.5, -1.0, (0.5, 1.0), (0.7, 0.9))


def test_top_term_example():
    assert du.phi_dl(D1, 1) == pytest.approx(8 / 7 * math.e, rel=1e-14)


def test_bottom_term_forms():
    closed = du.phi_10_closed(0.5, -1.0, 1.0)
    assert du.phi_dl(D1, 0) == pytest.approx(closed, rel=1e-8)
    assert du.phi_dl_qform(D1, 0) == pytest.approx(du.phi_dl(D1, 0), rel=1e-7)


def test_middle_term_forms_and_split():
    plus, minus = du.phi_dl_qform(D2, 1, split=True)
    assert math.isfinite(plus) and math.isfinite(minus)
    assert plus - minus == pytest.approx(du.phi_dl(D2, 1), abs=1e-5)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_signs_and_psi_chain(seed):
    inst = du.random_instance(np.random.default_rng(seed), 2)
    assert du.phi_dl(inst, 0) < 0
    psi = [du.psi_dl(inst, l) for l in (1, 2)]
    assert min(psi) >= 0
    assert np.allclose(psi, du.psi_terms_chain(inst), rtol=1e-8)
    H = calH(inst.eta_params.a_lim, inst.eta_params.c_lim)
    assert sum(psi) / H == pytest.approx(eta_laplace(inst.eta_params, inst.x, np.asarray(inst.c) / SQRT2), rel=1e-4)


def test_single_time_psi_closed_form():
    s = D1.c[0]
    assert du.psi_dl(D1, 1) == pytest.approx(calH((0.5 + s) / SQRT2, (-1.0 - s) / SQRT2), rel=1e-8)


def test_d1_residual_and_qform_lhs():
    r = du.duality_residual(D1)
    assert r.rel_gap < 1e-6
    assert du.duality_lhs(D1, "q") == pytest.approx(du.duality_lhs(D1, "p"), rel=1e-7)


def test_d2_example():
    lhs, rhs, gap, rel = du.duality_residual(D2)
    assert rel < 1e-3 and rhs > 0


def test_vanishing_first_coefficient():
    # the p-form grid scales like 1/c_1, so the collapse is followed on the q-form
    target = du.duality_lhs(D1)
    gaps = [abs(du.duality_lhs(du.DualityInstance(0.5, -1.0, (0.5, 1.0), (eps, 1.0)), "q") - target)
            for eps in (1e-1, 1e-2, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2 * abs(target)


def test_p_form_refuses_oversized_grid():
    with pytest.raises(QuadratureNotConverged):
        du.phi_dl(du.DualityInstance(0.5, -1.0, (0.5, 1.0), (1e-4, 1.0)), 0)


def test_monte_carlo_residual():
    r = du.duality_residual(D2, method="mc", N=20_000, seed=1)
    assert r.method == "mc" and r.rhs_se > 0
    assert r.abs_gap < 4 * r.rhs_se


@pytest.mark.parametrize("args", [
    (0.5, -1.0, (1.0,), (0.0,)),
    (1.5, -1.0, (1.0,), (1.0,)),
    (-1.5, -1.0, (1.0,), (1.0,)),
    (0.5, -1.0, (0.5,), (1.0,)),
    (0.5, -1.0, (0.6, 0.5, 1.0), (1.0, 1.0, 1.0)),
])
def test_constraints(args):
    with pytest.raises(ConstraintViolation):
        du.DualityInstance(*args)


def test_generator_margin():
    rng = np.random.default_rng(0)
    assert all(du.random_instance(rng, d).margin() >= 0.05 for d in (1, 2, 3) for _ in range(20))
    assert len(du.d1_grid()) == 125


def test_report(tmp_path):
    p = tmp_path / "r.csv"
    du.write_report(p, [(D1, du.duality_residual(D1))])
    rows = list(csv.DictReader(open(p)))
    assert tuple(rows[0]) == du.REPORT_COLUMNS
    assert float(rows[0]["rel_gap"]) < 1e-6
