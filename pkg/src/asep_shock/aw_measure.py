"""Askey-Wilson signed measures, the marginals pi_t and transitions P_{s,t},
and integration of product functionals against the joint signed measure.

Densities are handled in the angle variable ``y = cos(theta)``, where
``f(y) dy`` becomes a smooth function of ``theta`` on ``(0, pi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AcOnLattice, DomainError, SupportError, TimeNotAdmissible
from .params import LATTICE_TOL, BoundaryParams
from .quadrature import adaptive_grid
from .specfun import qpoch, qpoch_multi

DEFAULT_TOL = 1e-12


# ---------------------------------------------------------------------------
# lattice membership

def _nearest_power(z, q):
    """Nearest ``q**l`` (l integer) to ``z`` measured on the log scale."""
    mag = abs(z)
    if mag == 0 or not math.isfinite(mag):
        return None
    l0 = round(math.log(mag) / math.log(q))
    best = None
    for l in (l0 - 1, l0, l0 + 1):
        pt = q ** l
        d = abs(z - pt)
        if best is None or d < best[1]:
            best = (l, d)
    return best


def lattice_distance(z, q: float, signed_powers: bool = True):
    """Return ``(l, distance)`` to the nearest lattice point.

    With ``signed_powers`` the lattice is ``{q**l : l in Z}``, otherwise it
    is ``{q**-l : l >= 0}``.  For ``q = 0`` both lattices reduce to ``{1}``.
    """
    if not np.isfinite(z):
        return None, math.inf
    if q == 0.0:
        return 0, abs(z - 1.0)
    best = _nearest_power(z, q)
    if best is None:
        return None, math.inf
    l, d = best
    if not signed_powers and l > 0:
        return 0, abs(z - 1.0)
    return (l if signed_powers else -l), d


def on_q_lattice(z, q: float, signed_powers: bool = True, tol: float = LATTICE_TOL) -> bool:
    return lattice_distance(z, q, signed_powers)[1] < tol


# ---------------------------------------------------------------------------
# parameters and validation

@dataclass(frozen=True)
class AwParams:
    a: float
    b: float
    c: complex
    d: complex
    q: float

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)


@dataclass
class OmegaReport:
    ok: bool
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_omega_q(p: AwParams, tol: float = LATTICE_TOL) -> OmegaReport:
    """Check admissibility of ``(a, b, c, d)``; never raises."""
    fails = []
    a, b, c, d, q = p.a, p.b, p.c, p.d, p.q
    abcd = complex(a * b * c * d)
    if abs(abcd.imag) < 1e-14:
        l, dist = lattice_distance(abcd.real, q, signed_powers=False)
        if dist < tol:
            fails.append(("i", f"abcd={abcd.real!r} within {dist:.3g} of q^-{l}"))
    big = [(name, v) for name, v in zip("abcd", p.as_tuple()) if abs(v) >= 1]
    for i in range(len(big)):
        for j in range(i + 1, len(big)):
            ratio = complex(big[i][1]) / complex(big[j][1])
            if abs(ratio.imag) < 1e-14:
                l, dist = lattice_distance(ratio.real, q, signed_powers=True)
                if dist < tol:
                    fails.append(("ii", f"{big[i][0]}/{big[j][0]}={ratio.real!r} within {dist:.3g} of q^{l}"))
    if np.iscomplexobj(a) or np.iscomplexobj(b) or complex(a).imag or complex(b).imag:
        fails.append(("iii", "a and b must be real"))
    cc, dc = complex(c), complex(d)
    real_pair = abs(cc.imag) < 1e-15 and abs(dc.imag) < 1e-15
    conj_pair = abs(cc - dc.conjugate()) < 1e-12 * max(1.0, abs(cc))
    if not (real_pair or conj_pair):
        fails.append(("iii", "c and d must be real or a conjugate pair"))
    if not float(np.real(a * b)) < 1:
        fails.append(("iii", f"ab={a * b!r} must be < 1"))
    if not (cc * dc).real < 1:
        fails.append(("iii", f"cd={(cc * dc).real!r} must be < 1"))
    return OmegaReport(not fails, fails)


# ---------------------------------------------------------------------------
# density and atoms

def _norm_const(a, b, c, d, q):
    num = qpoch_multi([q, a * b, a * c, a * d, b * c, b * d, c * d], q)
    den = qpoch(a * b * c * d, q)
    return np.real(num / den)


def density_theta(theta, a, b, c, d, q):
    """``f(cos theta) sin(theta)``: the density with respect to ``d theta``.

    ``c`` and ``d`` may be arrays of shape ``(rows,)``; the result then has
    shape ``(rows, len(theta))``.
    """
    theta = np.asarray(theta, dtype=float)
    c = np.asarray(c, dtype=complex)
    d = np.asarray(d, dtype=complex)
    e = np.exp(1j * theta)
    common = qpoch(e * e, q) / (qpoch(a * e, q) * qpoch(b * e, q))
    if c.ndim == 0:
        w = common / (qpoch(c * e, q) * qpoch(d * e, q))
        K = _norm_const(a, b, c, d, q)
        return K / (2 * math.pi) * np.abs(w) ** 2
    ce = c[:, None] * e[None, :]
    de = d[:, None] * e[None, :]
    w = common[None, :] / (qpoch(ce, q) * qpoch(de, q))
    K = _norm_const(a, b, c, d, q)
    return (K / (2 * math.pi))[:, None] * np.abs(w) ** 2


def aw_density(y, p: AwParams):
    """Continuous part of the measure, ``f(y)`` for ``|y| < 1``."""
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) >= 1):
        raise DomainError("density is defined only for |y| < 1")
    th = np.arccos(y)
    return density_theta(th, p.a, p.b, p.c, p.d, p.q) / np.sin(th)


def atom_masses(e: float, others, q: float):
    """Atoms generated by the real parameter ``e`` (``|e| >= 1``).

    ``others`` are the remaining three parameters (scalars or arrays of a
    common shape).  Returns ``(locations, masses)`` with masses of shape
    ``(J,) + shape(others)``.  The ``j >= 1`` masses use the product
    ``prod_{i<j} (o - q^{i+1} e)`` in place of ``(q e/o; q)_j o^j``, which
    stays finite when some of ``others`` vanish.
    """
    o1, o2, o3 = (np.asarray(o, dtype=complex) for o in others)
    locs = []
    j = 0
    while abs(e * q ** j) >= 1 if q > 0 else j == 0:
        g = e * q ** j
        locs.append(0.5 * (g + 1.0 / g))
        j += 1
        if q == 0:
            break
    if not locs:
        return np.zeros(0), np.zeros((0,) + np.broadcast(o1, o2, o3).shape)
    p0 = qpoch_multi([e ** -2, o1 * o2, o1 * o3, o2 * o3], q) / qpoch_multi(
        [o1 / e, o2 / e, o3 / e, e * o1 * o2 * o3], q
    )
    masses = [p0]
    run = np.ones_like(p0)
    for jj in range(1, len(locs)):
        i = jj - 1
        # update (e^2, eo1, eo2, eo3)_j and prod over others incrementally
        run = run * (1 - e * e * q ** i) * (1 - e * o1 * q ** i) * (1 - e * o2 * q ** i) * (1 - e * o3 * q ** i)
        run = run / ((1 - q ** (i + 1)) * (o1 - q ** (i + 1) * e) * (o2 - q ** (i + 1) * e) * (o3 - q ** (i + 1) * e))
        run = run * q / e
        masses.append(p0 * run * (1 - e * e * q ** (2 * jj)) / (1 - e * e))
    return np.array(locs), np.real(np.array(masses))


# ---------------------------------------------------------------------------
# signed measures

@dataclass
class SignedMeasure:
    """Askey-Wilson measure (or a point mass) with density and atoms."""

    params: AwParams | None
    atom_locs: np.ndarray
    atom_masses: np.ndarray
    point_mass: bool = False
    flags: tuple = ()

    @property
    def atoms(self):
        return list(zip(self.atom_locs.tolist(), self.atom_masses.tolist()))

    def has_density(self) -> bool:
        return self.params is not None and not self.point_mass

    def density(self, y):
        if not self.has_density():
            return np.zeros_like(np.asarray(y, dtype=float))
        return aw_density(y, self.params)

    def density_theta(self, theta):
        p = self.params
        return density_theta(theta, p.a, p.b, p.c, p.d, p.q)

    def integrate(self, g=None, tol: float = DEFAULT_TOL, breakpoints=()):
        """``int g d nu``; ``g`` is vectorized in ``y`` (default ``g = 1``)."""
        if g is None:
            g = np.ones_like
        total = float(np.sum(self.atom_masses * g(self.atom_locs))) if self.atom_locs.size else 0.0
        if self.has_density():
            f = lambda th: self.density_theta(th) * g(np.cos(th))
            x, w, _ = adaptive_grid(f, 0.0, math.pi, tol=tol, breakpoints=breakpoints)
            total += float(f(x) @ w)
        return total

    def total_mass(self, tol: float = DEFAULT_TOL) -> float:
        return self.integrate(None, tol)

    def to_csv_rows(self, n_grid: int = 200):
        rows = []
        if self.has_density():
            ys = np.cos(np.linspace(0, math.pi, n_grid + 2)[1:-1])[::-1]
            for y, v in zip(ys, self.density(ys)):
                rows.append(("cont", float(y), float(v)))
        for loc, m in self.atoms:
            rows.append(("atom", loc, m))
        return rows


def measure_from_params(p: AwParams) -> SignedMeasure:
    """Build ``nu(.; a, b, c, d, q)``; parameters are assumed admissible."""
    locs, masses = [], []
    params = p.as_tuple()
    for idx, e in enumerate(params):
        ec = complex(e)
        if abs(ec.imag) > 1e-15 or abs(ec) < 1:
            continue
        others = [params[k] for k in range(4) if k != idx]
        l, m = atom_masses(ec.real, others, p.q)
        locs.extend(l.tolist())
        masses.extend(np.asarray(m).tolist())
    return SignedMeasure(p, np.array(locs, dtype=float), np.array(masses, dtype=float))


def point_mass(x: float) -> SignedMeasure:
    return SignedMeasure(None, np.array([float(x)]), np.array([1.0]), point_mass=True)


# ---------------------------------------------------------------------------
# time domain and process measures

@dataclass(frozen=True)
class TimeDomain:
    lo: float
    hi: float
    ratio: float | None  # generator C/A of the excluded lattice, None if no exclusions
    q: float

    def lattice_hit(self, t: float, tol: float = LATTICE_TOL):
        if self.ratio is None:
            return None
        if self.q == 0.0:
            return 0 if abs(t - self.ratio) < tol else None
        l, dist = lattice_distance(t / self.ratio, self.q, signed_powers=True)
        # compare in t units
        if l is not None and abs(t - self.ratio * self.q ** l) < tol:
            return l
        return None

    def contains(self, t: float, tol: float = LATTICE_TOL) -> bool:
        if not (self.lo < t < self.hi):
            return False
        return self.lattice_hit(t, tol) is None

    def nearest(self, t: float) -> float:
        """A nearby admissible time (used for diagnostics only)."""
        lo, hi = self.lo, self.hi
        span = hi - lo if math.isfinite(hi) else max(1.0, t)
        cand = min(max(t, lo + 1e-6 * span), hi - 1e-6 * span) if math.isfinite(hi) else max(t, lo + 1e-6)
        step = 1e-4 * max(1.0, abs(cand))
        for k in range(1, 1000):
            if self.contains(cand):
                return cand
            cand = cand + step * (k if k % 2 else -k)
        return cand

    def require(self, t: float):
        if not self.contains(t):
            hit = self.lattice_hit(t)
            why = f"on excluded lattice point (C/A) q^{hit}" if hit is not None else f"outside ({self.lo}, {self.hi})"
            raise TimeNotAdmissible(f"time t={t!r} not admissible: {why}", t=t, nearest=self.nearest(t))


def admissible_times(bp: BoundaryParams) -> TimeDomain:
    A, B, C, D, q = bp.A, bp.B, bp.C, bp.D, bp.q
    if A * C <= 1:
        return TimeDomain(0.0, math.inf, None, q)
    abcd = A * B * C * D
    if abcd != 0 and on_q_lattice(abcd, q, signed_powers=False):
        raise AcOnLattice(f"ABCD={abcd!r} lies on the lattice q^-l")
    lo = max(math.sqrt(q), D * D)
    hi = min(1 / math.sqrt(q) if q > 0 else math.inf, 1 / (B * B) if B != 0 else math.inf)
    return TimeDomain(lo, hi, C / A, q)


def marginal_params(bp: BoundaryParams, t: float) -> AwParams:
    rt = math.sqrt(t)
    return AwParams(bp.A * rt, bp.B * rt, bp.C / rt, bp.D / rt, bp.q)


def marginal_pi(bp: BoundaryParams, t: float, domain: TimeDomain | None = None) -> SignedMeasure:
    (domain or admissible_times(bp)).require(t)
    return measure_from_params(marginal_params(bp, t))


def _cd_from_x(x, s, t):
    x = np.asarray(x, dtype=float)
    r = math.sqrt(s / t)
    root = np.sqrt((x * x - 1).astype(complex))
    # for x <= -1 pick the branch so that c = r(x + sqrt(x^2-1)) stays the
    # formula's value; numpy's principal sqrt already does this for real x.
    c = r * (x + root)
    d = r * (x - root)
    # cancellation-free smaller root via c*d = s/t
    big = np.abs(c) >= np.abs(d)
    c_safe = np.where(big, c, (s / t) / d)
    d_safe = np.where(big, (s / t) / c, d)
    inside = np.abs(x) < 1
    th = np.arccos(np.clip(x, -1, 1))
    c_safe = np.where(inside, r * np.exp(1j * th), c_safe)
    d_safe = np.where(inside, r * np.exp(-1j * th), d_safe)
    return c_safe, d_safe


def _in_support(x, meas_locs, tol=1e-9):
    if abs(x) <= 1 + 1e-14:
        return True
    return any(abs(x - l) <= tol * max(1.0, abs(l)) for l in meas_locs)


def transition_P(bp: BoundaryParams, s: float, t: float, x: float, domain: TimeDomain | None = None) -> SignedMeasure:
    """``P_{s,t}(x, .)``; ``s = t`` gives the unit point mass at ``x``."""
    dom = domain or admissible_times(bp)
    dom.require(s)
    dom.require(t)
    if s > t:
        raise DomainError("transition requires s <= t")
    locs = measure_from_params(marginal_params(bp, s)).atom_locs
    if not _in_support(x, locs):
        return SignedMeasure(None, np.zeros(0), np.zeros(0), flags=("outside_support",))
    if s == t:
        return point_mass(x)
    c, d = _cd_from_x(x, s, t)
    rt = math.sqrt(t)
    cc, dd = complex(c), complex(d)
    if abs(x) >= 1:
        cc, dd = cc.real, dd.real
    return measure_from_params(AwParams(bp.A * rt, bp.B * rt, cc, dd, bp.q))


def transition_P_checked(bp, s, t, x, domain=None) -> SignedMeasure:
    """Like :func:`transition_P` but raises :class:`SupportError` off support."""
    m = transition_P(bp, s, t, x, domain)
    if "outside_support" in m.flags:
        raise SupportError(f"x={x!r} is not in the support of pi_{s}")
    return m


# ---------------------------------------------------------------------------
# joint integration

def _transition_rows(bp: BoundaryParams, s: float, t: float, xs: np.ndarray):
    """Density-in-theta evaluator and atom table for ``P_{s,t}(x_i, .)``.

    Returns ``(dens(theta) -> (rows, nodes), atom_locs, atom_mass_matrix)``
    where the mass matrix has shape ``(rows, len(atom_locs))``.
    """
    rt = math.sqrt(t)
    a, b, q = bp.A * rt, bp.B * rt, bp.q
    c, d = _cd_from_x(xs, s, t)

    def dens(theta):
        return density_theta(theta, a, b, c, d, q)

    rows = len(xs)
    entries = {}  # location -> mass column

    def column(loc):
        for k in entries:
            if abs(k - loc) <= 1e-11 * max(1.0, abs(loc)):
                return entries[k]
        entries[float(loc)] = np.zeros(rows)
        return entries[float(loc)]

    # atoms generated by a and b (shared generator, per-row masses)
    for idx, e in enumerate((a, b)):
        if abs(e) >= 1:
            other = b if idx == 0 else a
            locs, masses = atom_masses(e, (np.full(rows, other, dtype=complex), c, d), q)
            for j in range(len(locs)):
                column(locs[j])[:] += masses[j]
    # atoms generated by the row-specific real c or d
    for r in range(rows):
        if abs(xs[r]) < 1:
            continue
        for e, other in ((c[r], d[r]), (d[r], c[r])):
            e = e.real
            if abs(e) >= 1:
                locs, masses = atom_masses(e, (a, b, other.real), q)
                for loc, m in zip(locs, masses):
                    column(loc)[r] += m
    keys = sorted(entries)
    mass = np.column_stack([entries[k] for k in keys]) if keys else np.zeros((rows, 0))
    return dens, np.array(keys, dtype=float), mass


def _merge_times(times, factors):
    ts, gs = [], []
    for t, g in zip(times, factors):
        if ts and t == ts[-1]:
            prev = gs[-1]
            gs[-1] = (lambda p, h: (lambda y: p(y) * h(y)))(prev, g)
        else:
            ts.append(t)
            gs.append(g)
    return ts, gs


def integrate_joint(bp: BoundaryParams, times, factors, tol: float = DEFAULT_TOL, breakpoints=None,
                    return_error: bool = False):
    """``int prod_k g_k(y_k)`` against ``pi_{t_1}(dy_1) P_{t_1,t_2}(y_1, dy_2) ...``.

    Every level is discretized by a common adaptive angle grid (refined
    until all transition rows times the level's factor are resolved) plus
    the atom locations of that level; the integral is then a chain of
    matrix-vector products evaluated from the last coordinate backwards.

    ``breakpoints`` optionally gives a list (one entry per time) of angle
    breakpoints used to seed the grids.
    """
    times = list(times)
    if len(times) != len(factors):
        raise ValueError("times and factors must have equal length")
    if any(t2 < t1 for t1, t2 in zip(times[:-1], times[1:])):
        raise DomainError("times must be ascending")
    dom = admissible_times(bp)
    for t in times:
        dom.require(t)
    bps = breakpoints or [()] * len(times)
    ts, gs = _merge_times(times, factors)
    if len(ts) < len(times):
        bps = [()] * len(ts)

    # level 1
    p1 = marginal_params(bp, ts[0])
    m1 = measure_from_params(p1)
    g1 = gs[0]
    f1 = lambda th: density_theta(th, p1.a, p1.b, p1.c, p1.d, p1.q) * g1(np.cos(th))
    th1, w1, err = adaptive_grid(f1, 0.0, math.pi, tol=tol, breakpoints=bps[0])
    states = [np.concatenate([np.cos(th1), m1.atom_locs])]
    first_w = np.concatenate([density_theta(th1, p1.a, p1.b, p1.c, p1.d, p1.q) * w1, m1.atom_masses])
    errs = [err]
    mats = []
    for k in range(1, len(ts)):
        xs = states[-1]
        dens, alocs, amass = _transition_rows(bp, ts[k - 1], ts[k], xs)
        gk = gs[k]
        fk = lambda th, dens=dens, gk=gk: dens(th) * gk(np.cos(th))[None, :]
        thk, wk, err = adaptive_grid(fk, 0.0, math.pi, tol=tol, breakpoints=bps[k])
        errs.append(err)
        M = np.concatenate([dens(thk) * wk[None, :], amass], axis=1)
        mats.append(M)
        states.append(np.concatenate([np.cos(thk), alocs]))
    v = gs[-1](states[-1])
    for k in range(len(ts) - 1, 0, -1):
        v = gs[k - 1](states[k - 1]) * (mats[k - 1] @ v)
    value = float(first_w @ v)
    if return_error:
        return value, float(sum(errs))
    return value
