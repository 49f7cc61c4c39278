"""Composite Gauss-Legendre rules with adaptive bisection shared across rows.

A single node set is refined until every row of a vector-valued integrand
is resolved; the accepted nodes can then be reused as a discretization of
a kernel (see :func:`asep_shock.aw_measure.integrate_joint`).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel_rule(a, b, order):
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_rule(edges, order: int = 16):
    """Fixed composite Gauss-Legendre rule on consecutive ``edges``."""
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = _panel_rule(a, b, order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def adaptive_grid(f, a: float, b: float, tol: float = 1e-12, breakpoints=(), order: int = 16,
                  initial_panels: int = 8, max_panels: int = 4000):
    """Refine a composite rule on ``[a, b]`` until ``f`` is integrated to ``tol``.

    ``f`` maps a 1-D node array to an array of shape ``(rows, nodes)`` (a
    1-D result is treated as one row).  A panel is accepted when the
    difference between its one-panel and two-half-panel estimates is at
    most ``tol`` times the row scale for every row; the row scale is the
    integral of ``|f|`` from the first pass, floored at ``1e-300``.

    Returns ``(nodes, weights, error_estimate)`` where nodes/weights are the
    accepted half-panel rules.
    """
    pts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    edges = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        edges.extend(np.linspace(lo, hi, initial_panels + 1)[:-1].tolist())
    edges.append(b)

    def rows(x):
        v = np.asarray(f(x))
        return v[None, :] if v.ndim == 1 else v

    x0, w0 = composite_rule(np.asarray(edges), order)
    scale = np.maximum(np.abs(rows(x0)) @ w0, 1e-300)

    pending = list(zip(edges[:-1], edges[1:]))
    acc_x, acc_w = [], []
    err_total = 0.0
    n_panels = 0
    while pending:
        if n_panels + len(pending) > max_panels:
            raise QuadratureNotConverged(
                f"adaptive grid exceeded {max_panels} panels", estimate=None, error=err_total
            )
        los = np.array([p[0] for p in pending])
        his = np.array([p[1] for p in pending])
        mids = 0.5 * (los + his)
        xg, wg = gauss_legendre(order)
        # coarse and two-half rules for all pending panels at once
        hw = 0.5 * (his - los)
        xc = (los[:, None] + hw[:, None] * (xg[None, :] + 1.0))
        wc = hw[:, None] * wg[None, :]
        qw = 0.5 * hw
        xl = los[:, None] + qw[:, None] * (xg[None, :] + 1.0)
        xr = mids[:, None] + qw[:, None] * (xg[None, :] + 1.0)
        wf = qw[:, None] * wg[None, :]
        P = len(pending)
        allx = np.concatenate([xc.ravel(), xl.ravel(), xr.ravel()])
        vals = rows(allx)
        R = vals.shape[0]
        vc = vals[:, : P * order].reshape(R, P, order)
        vl = vals[:, P * order: 2 * P * order].reshape(R, P, order)
        vr = vals[:, 2 * P * order:].reshape(R, P, order)
        coarse = np.einsum("rpk,pk->rp", vc, wc)
        fine = np.einsum("rpk,pk->rp", vl, wf) + np.einsum("rpk,pk->rp", vr, wf)
        err = np.max(np.abs(coarse - fine) / scale[:, None], axis=0)
        new_pending = []
        for i in range(P):
            if err[i] <= tol or his[i] - los[i] < 1e-14 * max(1.0, abs(b - a)):
                acc_x.append(xl[i])
                acc_x.append(xr[i])
                acc_w.append(wf[i])
                acc_w.append(wf[i])
                err_total += err[i]
                n_panels += 1
            else:
                new_pending.append((los[i], mids[i]))
                new_pending.append((mids[i], his[i]))
        pending = new_pending
    x = np.concatenate(acc_x)
    w = np.concatenate(acc_w)
    order_idx = np.argsort(x)
    return x[order_idx], w[order_idx], err_total
