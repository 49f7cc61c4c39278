"""Parameterizations of open ASEP and the phase diagram.

Two equivalent descriptions are used throughout: jump rates
``(alpha, beta, gamma, delta, q)`` and boundary parameters ``(A, B, C, D, q)``
related by the kappa map.  The triple-point scaling sequences used by the
limit theorems live here as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError

PHASE_TOL = 1e-12
LATTICE_TOL = 1e-9


def _check_q(q: float) -> None:
    if not (0.0 <= q < 1.0):
        raise DomainError(f"q must lie in [0, 1), got {q!r}")


@dataclass(frozen=True)
class RateParams:
    alpha: float
    beta: float
    gamma: float = 0.0
    delta: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("alpha and beta must be positive")
        if not (self.gamma >= 0 and self.delta >= 0):
            raise DomainError("gamma and delta must be nonnegative")
        _check_q(self.q)


@dataclass(frozen=True)
class BoundaryParams:
    A: float
    B: float
    C: float
    D: float
    q: float = 0.0

    def __post_init__(self):
        if not (self.A >= 0 and self.C >= 0):
            raise DomainError("A and C must be nonnegative")
        if not (-1 < self.B <= 0 and -1 < self.D <= 0):
            raise DomainError("B and D must lie in (-1, 0]")
        _check_q(self.q)

    @property
    def abcd(self) -> float:
        return self.A * self.B * self.C * self.D


@dataclass(frozen=True)
class ScalingLimitParams:
    """Limits ``a_lim = lim sqrt(n)(1-A_n)`` and ``c_lim = lim sqrt(n)(1-C_n)``."""

    a_lim: float
    c_lim: float
    B: float = 0.0
    D: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (-1 < self.B <= 0 and -1 < self.D <= 0):
            raise DomainError("B and D must lie in (-1, 0]")
        _check_q(self.q)


class Phase(str, Enum):
    MAX_CURRENT = "MaxCurrent"
    LOW_DENSITY = "LowDensity"
    HIGH_DENSITY = "HighDensity"
    COEXISTENCE = "CoexistenceLine"
    BOUNDARY = "PhaseBoundary"


class Region(str, Enum):
    FAN = "Fan"
    SHOCK = "Shock"
    BOUNDARY_AC1 = "BoundaryAC1"


@dataclass(frozen=True)
class PhaseLabel:
    phase: Phase
    region: Region


def kappa(x: float, y: float, q: float, sign: int = +1) -> float:
    """Roots of ``x z^2 - (1-q-x+y) z - y = 0``; ``sign=+1`` gives kappa_+.

    The larger-magnitude root is taken from the quadratic formula and the
    other from the root product ``-y/x``, which avoids cancellation.
    """
    if not x > 0:
        raise DomainError(f"kappa requires x > 0, got {x!r}")
    if not y >= 0:
        raise DomainError(f"kappa requires y >= 0, got {y!r}")
    _check_q(q)
    b = 1.0 - q - x + y
    disc = math.sqrt(b * b + 4.0 * x * y)
    if b >= 0:
        plus = (b + disc) / (2.0 * x)
        minus = -y / (x * plus) if plus > 0 else 0.0
    else:
        minus = (b - disc) / (2.0 * x)
        plus = -y / (x * minus)
    if sign > 0:
        return plus
    # -0.0 -> 0.0 keeps the (-1, 0] invariant tidy
    return minus + 0.0


def rates_to_boundary(r: RateParams) -> BoundaryParams:
    return BoundaryParams(
        A=kappa(r.beta, r.delta, r.q, +1),
        B=kappa(r.beta, r.delta, r.q, -1),
        C=kappa(r.alpha, r.gamma, r.q, +1),
        D=kappa(r.alpha, r.gamma, r.q, -1),
        q=r.q,
    )


def boundary_to_rates(b: BoundaryParams) -> RateParams:
    one_q = 1.0 - b.q
    left = (1.0 + b.C) * (1.0 + b.D)
    right = (1.0 + b.A) * (1.0 + b.B)
    return RateParams(
        alpha=one_q / left,
        beta=one_q / right,
        gamma=-one_q * b.C * b.D / left + 0.0,
        delta=-one_q * b.A * b.B / right + 0.0,
        q=b.q,
    )


def classify(b: BoundaryParams, tol: float = PHASE_TOL) -> PhaseLabel:
    A, C = b.A, b.C
    if abs(A - C) <= tol and A > 1 + tol:
        phase = Phase.COEXISTENCE
    elif A < 1 - tol and C < 1 - tol:
        phase = Phase.MAX_CURRENT
    elif A > 1 + tol and A > C + tol:
        phase = Phase.HIGH_DENSITY
    elif C > 1 + tol and C > A + tol:
        phase = Phase.LOW_DENSITY
    else:
        phase = Phase.BOUNDARY
    ac = A * C
    if abs(ac - 1.0) <= tol:
        region = Region.BOUNDARY_AC1
    elif ac < 1.0:
        region = Region.FAN
    else:
        region = Region.SHOCK
    return PhaseLabel(phase, region)


@dataclass(frozen=True)
class ScaledBoundary:
    """Boundary parameters at size ``n`` together with the lattice-avoidance flag."""

    params: BoundaryParams
    n: int
    near_lattice: bool


def scaling_sequence(s: ScalingLimitParams, n: int) -> ScaledBoundary:
    """``A_n = exp(-a/sqrt n)``, ``C_n = exp(-c/sqrt n)``, ``B_n = B``, ``D_n = D``.

    ``near_lattice`` is set when ``A_n C_n > 1`` and the unit time (or the
    product ``A_n B_n C_n D_n``) sits within ``LATTICE_TOL`` of a lattice
    point excluded from the admissible time domain.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rn = math.sqrt(n)
    bp = BoundaryParams(A=math.exp(-s.a_lim / rn), B=s.B, C=math.exp(-s.c_lim / rn), D=s.D, q=s.q)
    near = False
    if bp.A * bp.C > 1:
        from .aw_measure import on_q_lattice  # local import: aw_measure depends on params

        near = on_q_lattice(bp.C / bp.A, s.q, signed_powers=True) or on_q_lattice(
            1.0 / bp.abcd if bp.abcd != 0 else math.inf, s.q, signed_powers=False
        )
    return ScaledBoundary(bp, n, near)
