"""Carleman weights and numerical Carleman-ratio measurements.

Weights are radial, written in ``s = log r`` (exterior families), ``s = log(1 + r)``
(medium) or ``r`` itself (interior).  Ratios compare the two sides of a weighted
estimate for ``P`` on compactly supported test functions, evaluated by quadrature
on the radial grid with ``P`` applied through the assembled pencil.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .disc import RadialGrid, assemble_pencil, averaging, difference
from .errors import ConfigError, ConstructionError, PreconditionError
from .model import annulus_weight, dyadic_intervals

log = logging.getLogger(__name__)

N_SAMPLES = 1000
BLEND_POWER = 4            # medium weight: p-norm blend of r and log(r + 10)
INTERIOR_C = 2.0           # constant in |phi'''| <= C sigma^2 phi'
CONVEX_S_MAX = 12.0      # exterior_convex checks run on 1 <= s <= this
FD_STEP = 1e-3


class Family(str, Enum):
    EXTERIOR_CONVEX = "exterior_convex"
    EXTERIOR_CUT = "exterior_cut"
    INTERIOR = "interior"
    MEDIUM = "medium"


class Estimate(str, Enum):
    EXTERIOR = "exterior"
    CUT = "cut"
    INTERIOR = "interior"


# ---------------------------------------------------------------------------
# weights

def _smoothstep_down():
    """C^2 blend from 1 at x = 0 to 0 at x = 1."""
    return Polynomial([1.0, 0.0, 0.0, -10.0, 15.0, -6.0])


@dataclass(frozen=True)
class CarlemanWeight:
    family: Family
    lam: float
    sigma: float | None = None
    R: float | None = None
    _table: CubicSpline | None = field(default=None, repr=False, compare=False)

    # -- coordinates -------------------------------------------------------
    @property
    def variable(self):
        return "r" if self.family is Family.INTERIOR else "s"

    def coordinate(self, r):
        r = np.asarray(r, float)
        if self.family is Family.INTERIOR:
            return r
        if self.family is Family.MEDIUM:
            return np.log1p(r)
        return np.log(r)

    def radius(self, x):
        x = np.asarray(x, float)
        if self.family is Family.INTERIOR:
            return x
        if self.family is Family.MEDIUM:
            return np.expm1(x)
        return np.exp(x)

    # -- evaluation --------------------------------------------------------
    def derivs(self, x):
        """Rows ``phi, phi', phi'', phi''', phi''''`` in the native variable."""
        x = np.atleast_1d(np.asarray(x, float))
        f = {Family.EXTERIOR_CONVEX: self._convex, Family.EXTERIOR_CUT: self._cut,
             Family.INTERIOR: self._interior, Family.MEDIUM: self._medium}[self.family]
        return f(x)

    def phi(self, x):
        return self.derivs(x)[0]

    def at_radius(self, r):
        """``(phi, phi', phi'')`` at radii ``r``; derivatives stay in the native variable."""
        d = self.derivs(self.coordinate(r))
        return d[0], d[1], d[2]

    def _convex(self, s):
        lam = self.lam
        hi = s >= 1.0
        out = np.zeros((5, s.size))
        out[0] = np.where(hi, lam * (s + s * s / 2), lam * (1.5 + 2 * (s - 1)))
        out[1] = np.where(hi, lam * (1 + s), 2 * lam)
        out[2] = np.where(hi, lam, 0.0)
        return out

    def _cut(self, s):
        L = math.log(self.R)
        out = self._convex(np.minimum(s, L))
        p = self.lam * Polynomial([1 + L, 1.0]) * _smoothstep_down()
        polys = [p.integ(), p, p.deriv(1), p.deriv(2), p.deriv(3)]
        base = self._convex(np.array([L]))[0, 0]
        x = np.clip(s - L, 0.0, 1.0)
        mid = s > L
        far = s >= L + 1
        for k, q in enumerate(polys):
            val = q(x) + (base if k == 0 else 0.0)
            out[k] = np.where(mid, val, out[k])
            # exact constant tail; the blend polynomial leaves rounding residue at x = 1
            out[k] = np.where(far, base + polys[0](1.0) if k == 0 else 0.0, out[k])
        return out

    def _interior(self, r):
        lam, sig = self.lam, self.sigma
        e = np.expm1(sig * r)
        out = np.empty((5, r.size))
        out[0] = lam / sig * (e / sig - r)
        out[1] = lam / sig * e
        out[2] = lam * (e + 1)
        out[3] = lam * sig * (e + 1)
        out[4] = lam * sig * sig * (e + 1)
        return out

    # medium: phi' = lam * m(r) * chi(s) with m a smooth min of r and log(r + 10)
    @staticmethod
    def _blend(r):
        p = BLEND_POWER
        ell = np.log(r + 10.0)
        z = r / ell
        q = 1 + z**p
        m = r * q ** (-1 / p)
        dz = (ell - r / (r + 10.0)) / ell**2
        dm = q ** (-1 / p) * (1 - r * z ** (p - 1) * dz / q)
        return m, dm

    def _medium_d1d2(self, s):
        L = math.log(self.R)
        r = np.expm1(s)
        m, dm = self._blend(r)
        chi_p = _smoothstep_down()
        x = np.clip(s - L, 0.0, 1.0)
        chi = np.where(s > L + 1, 0.0, chi_p(x))
        dchi = np.where((s > L) & (s < L + 1), chi_p.deriv()(x), 0.0)
        d1 = self.lam * m * chi
        d2 = self.lam * (dm * (1 + r) * chi + m * dchi)
        return d1, d2

    def _medium(self, s):
        d1, d2 = self._medium_d1d2(s)
        out = np.zeros((5, s.size))
        out[0] = self._table(np.clip(s, 0.0, self._table.x[-1]))
        out[1], out[2] = d1, d2
        hstep = FD_STEP
        up, dn = self._medium_d1d2(s + hstep)[1], self._medium_d1d2(s - hstep)[1]
        out[3] = (up - dn) / (2 * hstep)
        out[4] = (up - 2 * d2 + dn) / hstep**2
        return out

    # -- invariants --------------------------------------------------------
    def check(self, n=N_SAMPLES):
        """Re-run the family's differential conditions on ``n`` samples."""
        checks = {Family.EXTERIOR_CONVEX: self._check_convex, Family.EXTERIOR_CUT: self._check_cut,
                  Family.INTERIOR: self._check_interior, Family.MEDIUM: self._check_medium}
        checks[self.family](n)

    def _fail(self, name, x, mask):
        if np.any(mask):
            where = float(np.asarray(x)[np.argmax(mask)])
            raise ConstructionError(f"{self.family.value}: condition '{name}' fails at "
                                    f"{self.variable} = {where:.6g}")

    def _convex_conditions(self, s):
        d = self.derivs(s)
        lam = self.lam
        tol = 1e-12 * np.maximum(d[1], 1.0)
        self._fail("phi' >= lam", s, d[1] < lam - tol)
        self._fail("phi'' >= lam / 2", s, d[2] < lam / 2 - tol)
        self._fail("phi'' <= phi' / 2", s, d[2] > d[1] / 2 + tol)
        self._fail("|phi'''| + |phi''''| <= 0.1 phi'", s, np.abs(d[3]) + np.abs(d[4]) > 0.1 * d[1] + tol)

    def _check_convex(self, n):
        self._convex_conditions(np.linspace(1.0, CONVEX_S_MAX, n))

    def _check_cut(self, n):
        L = math.log(self.R)
        if L > 1:
            self._convex_conditions(np.linspace(1.0, L, n, endpoint=False))
        s = np.linspace(0.0, L + 3, n)
        d = self.derivs(s)
        self._fail("phi' >= 0", s, d[1] < -1e-12 * self.lam)
        far = np.linspace(L + 1 + 1e-9, L + 4, 100)
        df = self.derivs(far)
        self._fail("phi constant beyond log R + 1", far, (df[1] != 0) | (df[0] != df[0][0]))

    def _check_interior(self, n):
        lam, sig = self.lam, self.sigma
        d0 = self.derivs(np.array([0.0]))
        self._fail("phi'(0) = 0", [0.0], d0[1] != 0)
        r = np.linspace(0.0, self.R, n)
        d = self.derivs(r)
        ratio = d[2] / (lam + sig * d[1])
        self._fail("0.5 <= phi'' / (lam + sigma phi') <= 2", r, (ratio < 0.5) | (ratio > 2))
        r = np.linspace(math.log(2) / sig, self.R, n)
        d = self.derivs(r)
        tol = 1e-10 * d[3]
        self._fail("|phi'''| <= C sigma^2 phi'", r, np.abs(d[3]) > INTERIOR_C * sig**2 * d[1] + tol)
        self._fail("|phi''''| <= C sigma^3 phi'", r, np.abs(d[4]) > INTERIOR_C * sig**3 * d[1] + sig * tol)

    def _check_medium(self, n):
        L = math.log(self.R)
        s = np.linspace(1.0, L, n)
        r = np.expm1(s)
        d = self.derivs(s)
        ratio = d[1] / np.minimum(self.lam * r, self.lam * np.log(r + 10))
        self._fail("0.5 <= phi' / min(lam r, lam log(r + 10)) <= 2", s, (ratio < 0.5) | (ratio > 2))
        q = d[2] / self.lam
        self._fail("phi'' / lam within [1/4, 4]", s, (q < 0.25) | (q > 4))
        s = np.linspace(0.0, L + 3, n)
        d = self.derivs(s)
        self._fail("phi' >= 0", s, d[1] < 0)
        self._fail("phi bounded (phi' = 0 beyond log R + 1)", s, (s > L + 1) & (d[1] != 0))

    # -- export ------------------------------------------------------------
    def profile(self, n=200, x_range=None):
        """Sampled ``(x, r, phi, phi', phi'')`` rows for plotting."""
        if x_range is None:
            if self.family is Family.INTERIOR:
                x_range = (0.0, self.R)
            elif self.family is Family.EXTERIOR_CONVEX:
                x_range = (0.0, 6.0)
            else:
                x_range = (0.0, math.log(self.R) + 2)
        x = np.linspace(*x_range, n)
        d = self.derivs(x)
        return [{"x": float(a), "r": float(b), "phi": float(c), "dphi": float(e), "ddphi": float(g)}
                for a, b, c, e, g in zip(x, self.radius(x), d[0], d[1], d[2])]


def build_weight(family, lam, sigma=None, R=None, r0=1.0, check=True):
    """Construct a weight of the given family and verify its conditions on 10^3 samples."""
    family = Family(family)
    if not lam >= 4:
        raise PreconditionError(f"lambda = {lam} must be at least 4")
    table = None
    if family is Family.INTERIOR:
        if sigma is None or not sigma >= 4:
            raise PreconditionError(f"sigma = {sigma} must be at least 4 for the interior weight")
        R = 2.0 if R is None else float(R)
    elif family in (Family.EXTERIOR_CUT, Family.MEDIUM):
        if R is None or not R > r0:
            raise PreconditionError(f"R = {R} must exceed R0 = {r0}")
        if R < math.e:
            raise PreconditionError(f"R = {R} must be at least e so that log R >= 1")
    w = CarlemanWeight(family, float(lam), None if sigma is None else float(sigma),
                       None if R is None else float(R))
    if family is Family.MEDIUM:
        s = np.linspace(0.0, math.log(R) + 1.0, 2**14 + 1)
        d1, _ = w._medium_d1d2(s)
        phi = cumulative_simpson(d1, x=s, initial=0.0)
        table = CubicSpline(s, phi)
        w = CarlemanWeight(family, w.lam, w.sigma, w.R, table)
    if check:
        w.check()
    return w


# ---------------------------------------------------------------------------
# test functions

def bump(x):
    """Smooth bump supported in ``|x| < 1`` with value 1 at 0."""
    x = np.asarray(x, float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1 - 1 / (1 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class SpacetimeTest:
    """Samples ``v = r u`` on a uniform time grid, shape ``(nt, n)``."""

    v: np.ndarray
    dt: float

    def scaled(self, c):
        return SpacetimeTest(c * self.v, self.dt)


@dataclass(frozen=True)
class HarmonicTest:
    """``e^{i tau t} u(r)`` with ``v = r u`` on the grid; norms are per unit time."""

    tau: float
    v: np.ndarray

    def scaled(self, c):
        return HarmonicTest(self.tau, c * self.v)


def bump_tests(grid, n_tests, r_range, seed=0, T=8.0, dt=None, k_max=3.0, tau_max=3.0):
    """Random space-time bumps ``bump(r) bump(t) exp(i(k r - tau t))`` with supports in ``r_range``."""
    rng = np.random.default_rng(seed)
    dt = grid.h if dt is None else dt
    t = np.arange(0.0, T + dt / 2, dt)
    r = grid.r
    lo, hi = r_range
    tests = []
    for _ in range(n_tests):
        a = rng.uniform(0.15, 0.45) * (hi - lo)
        c = rng.uniform(lo + a, hi - a)
        b = rng.uniform(0.2, 0.45) * T
        k, tau, theta = rng.uniform(0, k_max), rng.uniform(0, tau_max), rng.uniform(0, 2 * np.pi)
        space = bump((r - c) / a) * np.exp(1j * k * r)
        time = bump((t - T / 2) / b) * np.exp(-1j * (tau * t + theta))
        tests.append(SpacetimeTest(np.outer(time, r * space), dt))
    return tests


def packet_tests(grid, widths, T=6.0, dt=None, speed=1.0):
    """Radial packets passing through the origin, cut off smoothly in time.

    ``v(t, r) = F(r - c t) - F(-r - c t)`` keeps ``u = v / r`` regular at ``r = 0``.
    """
    dt = grid.h if dt is None else dt
    t = np.arange(0.0, T + dt / 2, dt)
    r = grid.r
    tests = []
    for width in widths:
        def F(x):
            return bump(x / width) * x
        tt = (t - T / 2)[:, None]
        v = F(r[None, :] - speed * tt) - F(-r[None, :] - speed * tt)
        v = v * bump((t - T / 2) / (0.45 * T))[:, None]
        tests.append(SpacetimeTest(v.astype(complex), dt))
    return tests


def harmonic_tests(grid, taus, n_profiles, r_range, seed=0):
    """Time-harmonic tests; the same random bump envelopes are reused for every ``tau``."""
    rng = np.random.default_rng(seed)
    r = grid.r
    lo, hi = r_range
    shapes = []
    for _ in range(n_profiles):
        # log-uniform centers so every dyadic region gets sampled
        c = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        a = max(rng.uniform(0.2, 0.6) * min(c - lo, hi - c, c), 4 * grid.h)
        shapes.append((c, a, rng.uniform(0.5, 1.5)))
    return [HarmonicTest(float(tau), r * bump((r - c) / a) * np.exp(1j * q * tau * r))
            for tau in taus for c, a, q in shapes]


# ---------------------------------------------------------------------------
# quadrature

def _dt(v, dt):
    """Fourth-order centered difference in t (tests vanish near both ends)."""
    return (8 * (np.roll(v, -1, 0) - np.roll(v, 1, 0)) - (np.roll(v, -2, 0) - np.roll(v, 2, 0))) / (12 * dt)


def _dtt(v, dt):
    return (16 * (np.roll(v, -1, 0) + np.roll(v, 1, 0)) - (np.roll(v, -2, 0) + np.roll(v, 2, 0))
            - 30 * v) / (12 * dt * dt)


@dataclass
class _Fields:
    """Per-test arrays: all in the ``r``-times form (``V = r X`` for a 3D quantity ``X``)."""

    grid: RadialGrid
    v: np.ndarray       # r u at nodes
    vt: np.ndarray      # r u_t at nodes
    pv: np.ndarray      # r P u at nodes
    grad: np.ndarray    # r_half * d_r u at half points
    weight_dt: float    # time quadrature weight


def _fields(pencil, test):
    grid = pencil.grid
    D, A = difference(grid), averaging(grid)
    if isinstance(test, HarmonicTest):
        v = test.v[None, :]
        vt = 1j * test.tau * v
        pv = (pencil.at(test.tau) @ test.v)[None, :]
        wdt = 1.0
    else:
        v = test.v
        vt = _dt(v, test.dt)
        vtt = _dtt(v, test.dt)
        pv = (pencil.K @ v.T).T - 1j * (pencil.B @ vt.T).T - vtt * pencil.m
        wdt = test.dt
    grad = (D @ v.T).T - (A @ v.T).T / grid.r_half
    return _Fields(grid, v, vt, pv, grad, wdt)


def _sq(f, X, w, mask=None):
    """``int w^2 |X|^2`` over time and radius; ``X`` sampled on nodes or half points."""
    dens = np.sum(np.abs(X) ** 2, axis=0) * w**2
    if mask is not None:
        dens = dens * mask
    return float(f.grid.h * f.weight_dt * np.sum(dens))


def _le(f, X, w, r, kind, r_min=0.0):
    """Dyadic ``LE`` (sup) or ``LE*`` (sum) norm on ``r > r_min``."""
    vals = []
    for k, lo, hi in dyadic_intervals(f.grid.r_max):
        if hi <= r_min:
            continue
        mask = (r >= max(lo, r_min)) & (r < hi)
        if not mask.any():
            continue
        scale = annulus_weight(k) ** (-0.5 if kind == "LE" else 0.5)
        vals.append(scale * math.sqrt(_sq(f, X, w, mask)))
    if not vals:
        return 0.0
    return max(vals) if kind == "LE" else sum(vals)


def _support(test, grid, pad=3):
    """Nodes where the test lives, dilated by the stencil width."""
    amp = np.max(np.abs(test.v), axis=0) if test.v.ndim == 2 else np.abs(test.v)
    live = (amp > 0).astype(float)
    return np.convolve(live, np.ones(2 * pad + 1), mode="same") > 0


def _normalised(weight, r, rh, support):
    phi_n, d1, d2 = weight.at_radius(r)
    phi_h, d1h, d2h = weight.at_radius(rh)
    # every integrand vanishes off the dilated support, so clipping there is harmless
    c = np.max(phi_n[support])
    E = np.exp(np.minimum(phi_n - c, 0.0))
    Eh = np.exp(np.minimum(phi_h - c, 0.0))
    return (E, d1, d2), (Eh, d1h, d2h)


def _exterior(f, weight, support):
    g = f.grid
    r, rh = g.r, g.r_half
    (E, d1, d2), (Eh, d1h, d2h) = _normalised(weight, r, rh, support)
    t1 = (_sq(f, f.v, E * np.sqrt(1 + d2) * (1 + d1) / r**2)
          + _sq(f, f.grad, Eh * np.sqrt(1 + d2h) / rh))
    t2 = _sq(f, f.vt, E * np.sqrt(1 + d1) / r)
    return math.sqrt(t1) + math.sqrt(t2), math.sqrt(_sq(f, f.pv, E))


def _cut(f, weight, support):
    g = f.grid
    r, rh = g.r, g.r_half
    R = weight.R
    (E, d1, d2), (Eh, d1h, d2h) = _normalised(weight, r, rh, support)
    d2p, d2hp = np.maximum(d2, 0), np.maximum(d2h, 0)
    inner, inner_h = r < R, rh < R
    t1 = (_sq(f, f.v, E * np.sqrt(1 + d2p) * (1 + d1) / r**2, inner)
          + _sq(f, f.grad, Eh * np.sqrt(1 + d2hp) / rh, inner_h))
    t2 = _sq(f, f.vt, E * np.sqrt(1 + d1) / r, inner)
    # LE^1 of e^phi u outside R, with derivatives of the product taken on the grid
    ev = E * f.v
    egrad = (difference(g) @ ev.T).T - (averaging(g) @ ev.T).T / rh
    evt = E * f.vt
    le1 = 0.0
    for k, lo, hi in dyadic_intervals(g.r_max):
        if hi <= R:
            continue
        m = (r >= max(lo, R)) & (r < hi)
        mh = (rh >= max(lo, R)) & (rh < hi)
        if not m.any():
            continue
        sq = (_sq(f, evt, 1.0, m) + _sq(f, egrad, 1.0, mh)
              + _sq(f, ev, 1 / np.sqrt(1 + r**2), m))
        le1 = max(le1, math.sqrt(sq / annulus_weight(k)))
    lhs = math.sqrt(t1) + math.sqrt(t2) + le1 / math.sqrt(R)
    rhs = (math.sqrt(_sq(f, f.pv, E, inner)) + _le(f, f.pv, E, r, "LEstar", R) / math.sqrt(R)
           + math.sqrt(_sq(f, f.v, (1 + d1) ** 1.5 * E, (r >= R) & (r <= math.e * R))) / R**2)
    return lhs, rhs


def _interior(f, weight, support):
    g = f.grid
    r, rh = g.r, g.r_half
    (E, d1, d2), (Eh, d1h, d2h) = _normalised(weight, r, rh, support)
    du = _sq(f, f.vt, E * np.sqrt(d1 / r)) + _sq(f, f.grad, Eh * np.sqrt(d1h / rh))
    lhs = (math.sqrt(du) + math.sqrt(_sq(f, f.v, np.sqrt(d2) * d1 * E))
           + math.sqrt(_sq(f, f.v, d1 * E / r)))
    rhs = (math.sqrt(_sq(f, f.pv, E))
           + math.sqrt(_sq(f, f.vt, E * np.sqrt(d1 / np.sqrt(1 + r**2)), r >= 1.0)))
    return lhs, rhs


_SIDES = {Estimate.EXTERIOR: _exterior, Estimate.CUT: _cut, Estimate.INTERIOR: _interior}


@dataclass
class RatioStats:
    estimate: str
    family: str
    lam: float
    max_ratio: float
    median_ratio: float
    n_tests: int
    skipped: int
    ratios: list[float]

    def row(self):
        return {"lambda": self.lam, "family": self.family, "max_ratio": self.max_ratio,
                "median_ratio": self.median_ratio, "n_tests": self.n_tests, "estimate": self.estimate}


def _pencil(target, grid):
    if hasattr(target, "K"):
        return target
    if grid is None:
        raise ConfigError("a grid is required when a model is given", "grid")
    return assemble_pencil(target, grid)


def carleman_ratio(target, weight, tests, estimate="exterior", grid=None, workers=1):
    """LHS / RHS of a weighted estimate over a family of tests.

    ``target`` is a model (with ``grid``) or an assembled pencil.  Exterior
    estimates require every test to vanish on ``r <= R0``.
    """
    estimate = Estimate(estimate)
    pencil = _pencil(target, grid)
    g = pencil.grid
    r0 = pencil.model.r0 if pencil.model is not None else 0.0
    if estimate is not Estimate.INTERIOR and weight.family is Family.INTERIOR:
        raise ConfigError("exterior estimates need an exterior weight", "weight.family")
    if estimate is Estimate.CUT and weight.family is not Family.EXTERIOR_CUT:
        raise ConfigError("the cut estimate needs an exterior_cut weight", "weight.family")

    live = []
    for i, t in enumerate(tests):
        v = np.asarray(t.v)
        if not np.any(v):
            log.info("test %d is identically zero; skipped", i)
            continue
        amp = np.max(np.abs(v), axis=0) if v.ndim == 2 else np.abs(v)
        if estimate is not Estimate.INTERIOR and np.any(amp[g.r <= r0] > 0):
            raise PreconditionError(f"test {i} is not supported in r > R0 = {r0}")
        if np.any(amp[-2:] > 0) or (v.ndim == 2 and (np.any(v[:2]) or np.any(v[-2:]))):
            raise PreconditionError(f"test {i} is not compactly supported inside the grid window")
        live.append(t)
    skipped = len(tests) - len(live)
    if not live:
        raise PreconditionError("no nonzero tests")

    side = _SIDES[estimate]

    def one(t):
        f = _fields(pencil, t)
        lhs, rhs = side(f, weight, _support(t, g))
        return lhs / rhs if rhs > 0 else math.inf

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            ratios = list(ex.map(one, live))
    else:
        ratios = [one(t) for t in live]
    return RatioStats(estimate.value, weight.family.value, weight.lam, float(np.max(ratios)),
                      float(np.median(ratios)), len(live), skipped, [float(x) for x in ratios])


# ---------------------------------------------------------------------------
# medium frequencies

@dataclass
class BandVerdict:
    passed: bool
    lam: float
    R: float
    band: tuple[float, float]
    delta: float
    absorption: float        # max over tests of delta * D / L (must stay <= 1/2)
    constant: float          # max over tests of L / |e^phi P u|_{LE*}
    band_spread: float       # max / min over taus of the per-tau constant
    per_tau: dict[float, float]
    n_tests: int

    def to_dict(self):
        return {"passed": self.passed, "lambda": self.lam, "R": self.R, "band": list(self.band),
                "delta": self.delta, "absorption": self.absorption, "constant": self.constant,
                "band_spread": self.band_spread, "per_tau": {str(k): v for k, v in self.per_tau.items()},
                "n_tests": self.n_tests}


LAMBDA_SEPARATION = 4.0    # tau_1 <= lambda / this
BAND_SPREAD_MAX = 2.0


def _medium_sides(f, weight, support):
    g = f.grid
    r, rh = g.r, g.r_half
    (E, d1, d2), (Eh, d1h, d2h) = _normalised(weight, r, rh, support)
    d2p, d2hp = np.maximum(d2, 0), np.maximum(d2h, 0)
    jr = np.sqrt(1 + r**2)
    L = (_le(f, f.grad, Eh * np.sqrt(1 + d2hp) / rh, rh, "LE")
         + _le(f, f.v, E * np.sqrt(1 + d2p) * (1 + d1) / (jr * r), r, "LE")
         + _le(f, f.vt, E * np.sqrt(1 + d1) / r, r, "LE"))
    D = (_le(f, f.v, E * np.sqrt(1 + d1) / r, r, "LE")
         + _le(f, f.vt, E * np.sqrt(1 + d2p) * (1 + d1) / (jr * r), r, "LE"))
    F = _le(f, f.pv, E / r, r, "LEstar")
    return L, D, F


def medium_band_check(target, weight, band, grid=None, delta=0.1, n_tau=6, n_per_tau=4, seed=0,
                      r_range=None):
    """Check the medium-frequency weighted bound on time-harmonic tests with ``tau`` in ``band``.

    Passes when ``delta * D <= L / 2`` for every test (the ``delta`` terms can be
    absorbed) and the ratio ``L / |e^phi P u|_{LE*}`` varies by at most a factor 2
    across the band.
    """
    if weight.family is not Family.MEDIUM:
        raise ConfigError("medium_band_check needs a medium weight", "weight.family")
    tau0, tau1 = map(float, band)
    if not 0 < tau0 < tau1:
        raise ConfigError(f"band [{tau0}, {tau1}] must satisfy 0 < tau0 < tau1", "band")
    if tau1 > weight.lam / LAMBDA_SEPARATION:
        raise ConfigError(f"tau1 = {tau1} is not small against lambda = {weight.lam} "
                          f"(need tau1 <= lambda / {LAMBDA_SEPARATION:g})", "band.tau1")
    floor = float(weight.derivs(math.log(weight.R))[1][0]) / weight.R
    if tau0 < floor:
        raise ConfigError(f"tau0 = {tau0} is below phi'(log R) / R = {floor:.4g}", "band.tau0")

    pencil = _pencil(target, grid)
    g = pencil.grid
    # tests start where log(1 + r) >= 1, the range the weight conditions cover
    lo, hi = r_range or (2.0, min(weight.R, g.r_max / 2))
    taus = np.geomspace(tau0, tau1, n_tau)
    tests = harmonic_tests(g, taus, n_per_tau, (lo, hi), seed=seed)
    absorb, consts, per_tau = [], [], {}
    for t in tests:
        f = _fields(pencil, t)
        L, D, F = _medium_sides(f, weight, _support(t, g))
        absorb.append(delta * D / L)
        c = L / F if F > 0 else math.inf
        consts.append(c)
        per_tau[float(t.tau)] = max(per_tau.get(float(t.tau), 0.0), c)
    spread = max(per_tau.values()) / min(per_tau.values())
    passed = max(absorb) <= 0.5 and spread <= BAND_SPREAD_MAX and math.isfinite(max(consts))
    return BandVerdict(bool(passed), weight.lam, weight.R, (tau0, tau1), delta, float(max(absorb)),
                       float(max(consts)), float(spread), per_tau, len(tests))
