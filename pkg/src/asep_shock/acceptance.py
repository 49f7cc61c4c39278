"""End-to-end acceptance checks shared by the test suite and ``selftest``.

Each ``check_*`` function returns a :class:`CheckResult`; ``run_all`` runs
them in order and prints one pass/fail line per criterion.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import asep_exact as ex
from . import duality as du
from . import limit_process as lp_mod
from . import prelimit as pl
from .errors import TimeNotAdmissible
from .params import BoundaryParams, ScalingLimitParams, boundary_to_rates, scaling_sequence
from .specfun import berar_integral, berar_integral_quad, calH, scaled_erfc_H

SQRT2 = math.sqrt(2.0)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.name} ({self.detail}; {self.seconds:.1f}s)"


def _timed(number, name, fn):
    t0 = time.time()
    passed, detail = fn()
    return CheckResult(number, name, bool(passed), detail, time.time() - t0)


# ---------------------------------------------------------------------------
# 1. Askey-Wilson integrals vs the exact stationary law

ORACLE_CASES = (
    (BoundaryParams(0.5, -0.2, 0.5, -0.2, 0.3), ((0.6,), (0.6, 1.0), (0.5, 0.8, 1.0))),
    (BoundaryParams(1.3, -0.2, 1.1, -0.2, 0.25), ((0.66,), (0.66, 0.95), (0.66, 0.76, 0.95))),
)


def oracle_rows(n_values=range(2, 9), cases=ORACLE_CASES):
    """``(label, n, times, quadrature, exact, abs_err)`` for every case.

    Observation points are ``x_k = k/d`` and the coefficients are chosen so
    that the integration times equal ``times``.
    """
    rows = []
    for bp, time_sets in cases:
        dom = pl.aw.admissible_times(bp)
        for times in time_sets:
            for t in times:
                dom.require(t)
        for n in n_values:
            st = ex.solve(bp, n)
            for times in time_sets:
                d = len(times)
                x = [(k + 1) / d for k in range(d)]
                req = pl.request_from_times(times, x, n)
                quad = pl.laplace_ratio(req, bp, n)
                exact = ex.height_laplace(st, x, req.c)
                rows.append((bp, n, times, quad, exact, abs(quad - exact)))
    return rows


def check_oracle(tol=1e-7):
    def run():
        rows = oracle_rows()
        worst = max(r[-1] for r in rows)
        return worst < tol, f"{len(rows)} cases, max |quadrature - exact| = {worst:.2e} (tol {tol:g})"
    return _timed(1, "Askey-Wilson integral equals exact height Laplace transform", run)


# ---------------------------------------------------------------------------
# 2. Z_n limit

ZN_CASES = ((0.5, -1.0), (-1.0, 0.25))
ZN_N = (100, 1000, 10000)
ZN_BD_Q = (-0.2, -0.1, 0.3)


def zn_table(a_lim, c_lim, n_values=ZN_N, B=ZN_BD_Q[0], D=ZN_BD_Q[1], q=ZN_BD_Q[2]):
    s = ScalingLimitParams(a_lim, c_lim, B, D, q)
    lim = calH(a_lim / SQRT2, c_lim / SQRT2)
    return [(n, pl.z_n(scaling_sequence(s, n).params, n), lim) for n in n_values]


def check_zn(final_tol=1e-2):
    def run():
        ok, parts = True, []
        for a, c in ZN_CASES:
            errs = [abs(z - lim) for _, z, lim in zn_table(a, c)]
            dec = all(e2 < e1 for e1, e2 in zip(errs[:-1], errs[1:]))
            ok &= dec and errs[-1] < final_tol
            parts.append(f"({a:g},{c:g}) errors " + ", ".join(f"{e:.2e}" for e in errs))
        return ok, "; ".join(parts)
    return _timed(2, "Z_n converges to calH(a/sqrt2, c/sqrt2)", run)


# ---------------------------------------------------------------------------
# 3, 4. duality

def check_duality_d1(tol=1e-6):
    def run():
        worst = 0.0
        grid = du.d1_grid(5)
        for inst in grid:
            s = inst.c[0]
            lhs = du.phi_dl(inst, 0) + du.phi_dl(inst, 1)
            ref = calH((inst.a_lim + s) / SQRT2, (inst.c_lim - s) / SQRT2)
            worst = max(worst, abs(lhs - ref) / abs(ref))
        return worst < tol, f"{len(grid)} grid points, max relative gap {worst:.2e} (tol {tol:g})"
    return _timed(3, "d=1 duality closed form", run)


def d2_instances(count=12, seed=2024):
    rng = np.random.default_rng(seed)
    fixed = du.DualityInstance(0.5, -1.0, (0.5, 1.0), (0.7, 0.9))
    return [fixed] + [du.random_instance(rng, 2) for _ in range(count - 1)]


def check_duality_d2(tol=1e-3, count=12):
    def run():
        res = [du.duality_residual(inst) for inst in d2_instances(count)]
        worst = max(r.rel_gap for r in res)
        return worst < tol, f"{len(res)} instances, max relative gap {worst:.2e} (tol {tol:g})"
    return _timed(4, "d=2 duality identity", run)


# ---------------------------------------------------------------------------
# 5. tangent scale

TANGENT_LIMITS = (0.5, -1.0)
TANGENT_BDQ = (-0.2, -0.1, 0.3)
TANGENT_T = (-0.5, 0.0, 0.25)
TANGENT_U = (0.5, 1.0, 5.0, 20.0)


def tangent_errors(n=10_000):
    """Relative errors of the tangent-scale quantities against their limits."""
    a, c = TANGENT_LIMITS
    bp = scaling_sequence(ScalingLimitParams(a, c, *TANGENT_BDQ), n).params
    us = np.asarray(TANGENT_U)
    errs = {}

    def rel(x, y):
        return float(np.max(np.abs(np.asarray(x) - y) / np.abs(y)))

    for t in TANGENT_T:
        v = pl.tangent_views(bp, n, t)
        atom = v.atom_from_c()
        errs[f"atom location t={t}"] = rel(atom[0], pl.limit_atom_location(t, c))
        errs[f"atom mass t={t}"] = rel(atom[1], pl.limit_atom_mass(t, a, c))
        errs[f"density t={t}"] = rel(v.density(us), pl.limit_marginal_density(us, t, a, c))
    s, t = TANGENT_T[0], TANGENT_T[1]
    v = pl.tangent_views(bp, n, t)
    for u in (0.5, 2.0):
        errs[f"transition c->c u={u}"] = rel(v.transition_density(s, u, us), pl.limit_transition_cc(s, t, u, us, a))
    ua, _ = pl.tangent_views(bp, n, s).atom_from_c()
    m = v.transition(s, ua)
    (y_atom, mass), = m.atoms
    errs["transition d->d mass"] = rel(mass, pl.limit_transition_dd(s, t, a, c))
    errs["transition d->c density"] = rel(m.density(1 - us / (2 * n)) / (2 * n), pl.limit_transition_dc(s, t, us, a, c))
    return errs


def check_tangent(tol=5e-2):
    def run():
        errs = tangent_errors()
        name, worst = max(errs.items(), key=lambda kv: kv[1])
        return worst < tol, f"{len(errs)} quantities, worst relative error {worst:.2e} ({name}; tol {tol:g})"
    return _timed(5, "tangent-scale limits at n=1e4", run)


# ---------------------------------------------------------------------------
# 6. limit-process integrity

def density_normalization(a, c):
    lp = lp_mod.LimitLawParams(a, c)
    f = lambda z: lp_mod.eta_joint_density(lp, (1.0,), [z])
    left, _ = integrate.quad(f, -np.inf, 0.0, epsabs=1e-12, epsrel=1e-10, limit=200)
    right, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    return left + right


def kernel_p_checks():
    """Normalization and semigroup defects of ``kernel_p``."""
    norm_err = 0.0
    for t in (0.3, 1.0, 2.0):
        for u in (0.0, 0.5, 3.0):
            # v = w^2 removes the square-root endpoint behaviour
            val, _ = integrate.quad(lambda w: 2 * w * lp_mod.kernel_p(t, u, w * w), 0, np.inf,
                                    epsabs=1e-13, epsrel=1e-12, limit=400)
            norm_err = max(norm_err, abs(val - 1))
    semi_err = 0.0
    for s, t in ((0.4, 0.7), (1.0, 0.5)):
        for u, v in ((0.5, 1.0), (2.0, 0.3)):
            val, _ = integrate.quad(lambda w: 2 * w * lp_mod.kernel_p(s, u, w * w) * lp_mod.kernel_p(t, w * w, v),
                                    0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
            ref = float(lp_mod.kernel_p(s + t, u, v))
            semi_err = max(semi_err, abs(val - ref) / ref)
    return norm_err, semi_err


def starred_fd_error(h=1e-4):
    err = 0.0
    for t in (0.3, 1.0):
        for b in (-0.5, -1.2):
            for x, y in ((0.2, 0.4), (1.0, -0.3), (0.0, 0.7)):
                fd = -(lp_mod.kernel_qb(t, b + h, x, y) - lp_mod.kernel_qb(t, b - h, x, y)) / (2 * h)
                err = max(err, abs(float(fd) - float(lp_mod.kernel_qbstar(t, b, x, y))))
    return err


def check_integrity():
    def run():
        dens = max(abs(density_normalization(a, c) - 1) for a, c in ((0.5, -1), (-1, -1), (0, -0.5)))
        norm_err, semi_err = kernel_p_checks()
        xs = np.linspace(-4, 4, 81)
        h_err = float(np.max(np.abs(scaled_erfc_H(xs) + scaled_erfc_H(-xs) - 2 * np.exp(xs * xs)) / (2 * np.exp(xs * xs))))
        fd = starred_fd_error()
        berar = max(abs(berar_integral(al, be) - berar_integral_quad(al, be)[0]) / abs(berar_integral(al, be))
                    for al, be in ((0.5, -1.0), (-0.3, 0.2), (1.0, 0.5), (-0.7, -0.7)))
        ok = dens < 1e-6 and norm_err < 1e-6 and semi_err < 1e-6 and h_err < 1e-12 and fd < 1e-6 and berar < 1e-8
        detail = (f"density mass {dens:.1e}, p norm {norm_err:.1e}, p semigroup {semi_err:.1e}, "
                  f"H identity {h_err:.1e}, starred FD {fd:.1e}, closed form vs quadrature {berar:.1e}")
        return ok, detail
    return _timed(6, "limit-process integrity", run)


# ---------------------------------------------------------------------------
# 7. Monte Carlo at desk scale

MC_LIMITS = ScalingLimitParams(0.5, -1.0)  # q = 0, B = D = 0: TASEP
MC_OBSERVABLES = (((1.0,), (1.0,)), ((0.5, 1.0), (0.5, 0.5)))
MC_REPLICAS = 64
MC_SAMPLES = 10_240


def mc_plan(n, seed, samples=MC_SAMPLES, replicas=MC_REPLICAS):
    from .asep_mc import SimulationPlan

    bp = scaling_sequence(MC_LIMITS, n).params
    return SimulationPlan(boundary_to_rates(bp), n, burn_in_events=40 * n * n, samples=samples,
                          thin_events=50 * n, seed=seed, replicas=replicas)


def mc_tables(n_values=(50, 200, 500, 800), seed=7, samples=MC_SAMPLES, replicas=MC_REPLICAS, workers=None):
    """One simulation per ``n`` shared by every observable.

    Replicas run on ``workers`` threads (default from the environment, else
    the CPU count); the samples do not depend on the worker count.
    """
    from .asep_mc import ConvergenceRow, ConvergenceTable, empirical_height_laplace, simulate

    if workers is None:
        workers = int(os.environ.get("ASEP_SHOCK_WORKERS", os.cpu_count() or 1))
    tables = {}
    sims = {n: simulate(mc_plan(n, seed + i, samples, replicas), workers) for i, n in enumerate(n_values)}
    for x, c in MC_OBSERVABLES:
        lim = lp_mod.limit_height_laplace(lp_mod.LimitLawParams(MC_LIMITS.a_lim, MC_LIMITS.c_lim), x, c)
        rows = []
        for n in n_values:
            est, se = empirical_height_laplace(sims[n], x, c)
            pre = pl.laplace_ratio(pl.LaplaceRequest(x, c), scaling_sequence(MC_LIMITS, n).params, n)
            rows.append(ConvergenceRow(n, est, se, pre, lim))
        tables[(x, c)] = ConvergenceTable(x, c, rows)
    return tables


def check_mc(tables=None):
    def run():
        tabs = tables or mc_tables()
        ok, parts = True, []
        for (x, c), tab in tabs.items():
            at500 = next(r for r in tab.rows if r.n == 500)
            trend = [r for r in tab.rows if r.n != 500]
            sub = type(tab)(tab.x, tab.c, trend)
            z = at500.gap / at500.stderr
            good = z < 3 and sub.prelimit_gaps_decreasing() and sub.empirical_gaps_trend() and sub.final_within()
            ok &= good
            parts.append(f"d={len(x)}: n=500 |emp-lim|={at500.gap:.3g} = {z:.2f} SE; finite-n gaps "
                         + ",".join(f"{r.prelimit_gap:.1e}" for r in trend)
                         + "; empirical gaps " + ",".join(f"{r.gap:.3g}+-{r.stderr:.2g}" for r in trend))
        return ok, "; ".join(parts)
    return _timed(7, "Monte Carlo height Laplace vs limit", run)


# ---------------------------------------------------------------------------
# 8. sandwiching

def sandwich_pairs(count=200, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(3, 9))
        B, D = rng.uniform(-0.9, 0.0, size=2)
        q = rng.uniform(0.0, 0.9)
        A1, A2 = np.sort(rng.uniform(0.0, 3.0, size=2))
        C2, C1 = np.sort(rng.uniform(0.0, 3.0, size=2))
        f = rng.uniform(0.05, 1.0, size=n)
        out.append((BoundaryParams(A1, B, C1, D, q), BoundaryParams(A2, B, C2, D, q), f))
    return out


def check_sandwich(count=200):
    def run():
        viol, margin = 0, math.inf
        for bp1, bp2, f in sandwich_pairs(count):
            m1, m2, ok = ex.sandwich_check(bp1, bp2, f)
            viol += not ok
            margin = min(margin, m1 - m2)
        return viol == 0, f"{count} ordered pairs, {viol} violations, min(m' - m'') = {margin:.2e}"
    return _timed(8, "sandwiching of moments", run)


# ---------------------------------------------------------------------------
# 9. continuity and the coexistence line

def continuity_sweep(x=(0.5, 1.0), c=(0.3, 0.4), center=-0.5, eps=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5)):
    """psi on the diagonal and along ``(center + e, center - e)`` for ``e`` in ``+-eps``.

    Returns ``(diagonal value, rows, one-sided limits)``; each one-sided limit
    is the linear extrapolation to ``e = 0`` from the two smallest ``|e|``.
    """
    base = lp_mod.eta_laplace(lp_mod.LimitLawParams(center, center), x, c)
    rows, limits = [], {}
    for sgn in (1, -1):
        vals = []
        for e in eps:
            v = lp_mod.eta_laplace(lp_mod.LimitLawParams(center + sgn * e, center - sgn * e), x, c)
            rows.append((sgn * e, v, abs(v - base)))
            vals.append(v)
        e1, e2 = eps[-2], eps[-1]
        limits[sgn] = vals[-1] - e2 * (vals[-2] - vals[-1]) / (e1 - e2)
    return base, rows, limits


def zn_refusal():
    """``(refused, message)`` for ``Z_n`` on the coexistence line ``A = C = 1.5``."""
    try:
        pl.z_n(BoundaryParams(1.5, -0.2, 1.5, -0.1, 0.3), 20)
    except TimeNotAdmissible as exc:
        return "coexistence" in str(exc), str(exc)
    return False, "no error raised"


def check_continuity(tol=1e-4):
    def run():
        base, rows, limits = continuity_sweep()
        smallest = min(abs(e) for e, _, _ in rows)
        raw = max(g for e, _, g in rows if abs(e) == smallest)
        gap = max(abs(v - base) for v in limits.values())
        refused, msg = zn_refusal()
        return raw < tol and gap < tol and refused, (
            f"|psi(eps) - psi(0)| = {raw:.1e} at eps = {smallest:g}, "
            f"|one-sided limit - psi(0)| = {gap:.1e} (tol {tol:g}); zn refusal: {refused}")
    return _timed(9, "continuity across a=c and coexistence refusal", run)


CHECKS = {1: check_oracle, 2: check_zn, 3: check_duality_d1, 4: check_duality_d2, 5: check_tangent,
          6: check_integrity, 7: check_mc, 8: check_sandwich, 9: check_continuity}


def run_all(skip=(), echo=print):
    results = []
    for k, fn in CHECKS.items():
        if k in skip:
            continue
        r = fn()
        echo(r.line())
        results.append(r)
    return results
