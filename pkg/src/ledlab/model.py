"""Radial coefficient models and their structural diagnostics.

A model is a finite collection of closed-form radial fields perturbing the
Minkowski wave operator.  Metric fields perturb the inverse metric in the
``(t, r)`` block, magnetic fields give the potentials ``A_0`` and ``A_r``, and
a potential field adds to ``V``.  Every field may be slowly modulated in time
and may carry an imaginary part (magnetic and potential fields only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, ConstructionError

#: Library smallness constant for the AF norm outside ``R0``.
SMALL_C = 0.1
#: Default slow-variation exponent of frequency envelopes.
DELTA = 0.25
#: Last dyadic annulus index used by the AF norm.
K_MAX = 40


class Kind(str, Enum):
    METRIC_TT = "metric_tt"
    METRIC_TR = "metric_tr"
    METRIC_RR = "metric_rr"
    MAGNETIC_T = "magnetic_t"
    MAGNETIC_R = "magnetic_r"
    POTENTIAL = "potential"

    @property
    def is_metric(self):
        return self.value.startswith("metric")

    @property
    def is_magnetic(self):
        return self.value.startswith("magnetic")


def dyadic_intervals(r_max, k_max=K_MAX):
    """Return ``[(k, lo, hi), ...]`` covering ``[0, r_max)``.

    The inner ball ``r < 1`` carries ``k = 0`` weight but is labelled ``-1``;
    annulus ``k`` is ``[2**k, 2**(k+1))``.
    """
    out = [(-1, 0.0, min(1.0, r_max))]
    k = 0
    while 2.0**k < r_max and k <= k_max:
        out.append((k, 2.0**k, min(2.0 ** (k + 1), r_max)))
        k += 1
    return out


def annulus_weight(k):
    """Dyadic scale ``2**k`` of an annulus (the inner ball counts as 1)."""
    return 2.0 ** max(k, 0)


# ---------------------------------------------------------------------------
# profiles


def _bump(s):
    """Unit bump ``exp(1 - 1/(1-s^2))`` and its first two s-derivatives."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    psi = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    d1 = psi * (-2.0 * s / q**2)
    d2 = psi * (4.0 * s * s / q**4 - 2.0 / q**2 - 8.0 * s * s / q**3)
    return psi, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


def _tail(r, p):
    base = 1.0 + r * r
    f = base ** (-p / 2)
    d1 = -p * r * base ** (-p / 2 - 1)
    d2 = -p * base ** (-p / 2 - 1) + p * (p + 2) * r * r * base ** (-p / 2 - 2)
    return f, d1, d2


@dataclass(frozen=True)
class CoefficientField:
    """One closed-form radial coefficient.

    ``profile`` is ``"bump"`` (height 1 at ``center``, support
    ``|r - center| < 3 width``) or ``"tail"`` (``<r>^-power``).  The field value
    is ``(amplitude + i imaginary_amplitude) * profile(r) * m(t)`` where
    ``m(t) = 1 + sin(rate t) / 2`` for sinusoidal modulation.

    For ``metric_tt`` the value increases ``|g^00|``: ``g^00 = -(1 + value)``.
    """

    kind: Kind
    profile: str = "bump"
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    power: float = 3.0
    rate: float = 0.0
    modulation: str = "none"
    imaginary_amplitude: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.profile not in ("bump", "tail"):
            raise ConfigError(f"unknown profile {self.profile!r}", "profile")
        if self.modulation not in ("none", "sinusoidal"):
            raise ConfigError(f"unknown modulation {self.modulation!r}", "modulation")
        if self.profile == "bump" and not self.width > 0:
            raise ConfigError("bump width must be positive", "width")
        if self.profile == "tail" and not self.power > 0:
            raise ConfigError("tail power must be positive", "power")
        if self.center < 0:
            raise ConfigError("center must be nonnegative", "center")
        if self.rate < 0:
            raise ConfigError("modulation rate must be nonnegative", "rate")
        if self.imaginary_amplitude < 0:
            raise ConfigError("imaginary_amplitude must be nonnegative", "imaginary_amplitude")
        if self.kind.is_metric and self.imaginary_amplitude:
            raise ConfigError("metric fields are real", "imaginary_amplitude")
        if not all(map(math.isfinite, (self.amplitude, self.center, self.width, self.power))):
            raise ConfigError("non-finite profile parameter", "profile")

    @property
    def support(self):
        """Outer edge of the support (``inf`` for tails)."""
        if self.profile == "bump":
            return self.center + 3.0 * self.width
        return math.inf

    @property
    def feature_width(self):
        return self.width if self.profile == "bump" else 1.0

    @property
    def stationary(self):
        return self.modulation == "none" or self.rate == 0.0

    def shape(self, r):
        """Unit profile and its first two radial derivatives."""
        r = np.asarray(r, dtype=float)
        if self.profile == "bump":
            scale = 3.0 * self.width
            f, d1, d2 = _bump((r - self.center) / scale)
            return f, d1 / scale, d2 / scale**2
        return _tail(r, self.power)

    def modulation_factor(self, t):
        """``(m(t), m'(t))``."""
        if self.stationary:
            return 1.0, 0.0
        w = self.rate
        return 1.0 + 0.5 * math.sin(w * t), 0.5 * w * math.cos(w * t)

    @property
    def complex_amplitude(self):
        return complex(self.amplitude, self.imaginary_amplitude)

    def value(self, r, t=0.0, deriv=0, dt=False):
        """Field value (``deriv`` radial derivatives; ``dt`` applies d/dt)."""
        m, mdot = self.modulation_factor(t)
        shape = self.shape(r)[deriv]
        return self.complex_amplitude * (mdot if dt else m) * shape

    def scaled(self, factor=1.0, imaginary_factor=None, rate=None):
        """Copy with rescaled amplitudes (used in sweeps)."""
        imag = self.imaginary_amplitude * (factor if imaginary_factor is None else imaginary_factor)
        return CoefficientField(
            kind=self.kind,
            profile=self.profile,
            amplitude=self.amplitude * factor,
            center=self.center,
            width=self.width,
            power=self.power,
            rate=self.rate if rate is None else rate,
            modulation=self.modulation,
            imaginary_amplitude=imag,
        )


@dataclass(frozen=True)
class FrequencyEnvelope:
    """Slowly varying dyadic majorant ``c_k`` for ``k >= ceil(log2 R0)``."""

    k_start: int
    values: tuple
    delta: float = DELTA

    def violations(self, small_c=SMALL_C):
        c = np.asarray(self.values, dtype=float)
        out = []
        if np.any(c < 0):
            out.append("negative envelope value")
        if c.sum() > small_c * (1 + 1e-12):
            out.append(f"summability: sum c_k = {c.sum():.4g} > {small_c}")
        pos = c > 0
        for j in range(len(c)):
            for k in range(len(c)):
                if not (pos[j] and pos[k]):
                    if pos[j] != pos[k]:
                        out.append("slow variation: envelope has isolated zeros")
                        return out
                    continue
                if c[k] / c[j] > 2.0 ** (self.delta * abs(j - k)) * (1 + 1e-12):
                    out.append(f"slow variation fails between k={self.k_start + j} and k={self.k_start + k}")
                    return out
        return out

    @classmethod
    def from_model(cls, model, delta=DELTA, k_max=K_MAX):
        """Smallest ``2^{-delta|j-k|}``-slowly varying majorant of the dyadic AF norms."""
        k0 = max(0, math.ceil(math.log2(model.r0)))
        ks = np.arange(k0, k_max + 1)
        d = np.array([af_norm(model, 2.0**k, r_max=2.0 ** (k + 1)) for k in ks])
        c = np.array([max(d[j] * 2.0 ** (-delta * abs(j - i)) for j in range(len(ks))) for i in range(len(ks))])
        return cls(k_start=int(k0), values=tuple(float(x) for x in c), delta=delta)


@dataclass(frozen=True)
class Coefficients:
    """Sampled coefficients of the radial operator at fixed time."""

    g00: np.ndarray
    g0r: np.ndarray
    grr: np.ndarray
    grr_r: np.ndarray
    a0: np.ndarray
    ar: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class AFModel:
    """Asymptotically flat radial model."""

    fields: tuple = ()
    r0: float = 1.0
    m0: float = 1.0
    envelope: FrequencyEnvelope | None = None
    name: str = ""
    small_c: float = SMALL_C
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if not self.r0 > 0:
            raise ConfigError("r0 must be positive", "r0")
        if self.m0 < 0:
            raise ConfigError("m0 must be nonnegative", "m0")

    # -- sampling -----------------------------------------------------------
    def field_sum(self, kind, r, t=0.0, deriv=0, dt=False):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex)
        for f in self.fields:
            if f.kind == kind:
                out = out + f.value(r, t, deriv, dt)
        return out

    def g00(self, r, t=0.0):
        return -1.0 - self.field_sum(Kind.METRIC_TT, r, t).real

    def coefficients(self, r_nodes, r_half, t=0.0):
        """Coefficients on nodes (``g00, grr_r, a0, v``) and half points (rest)."""
        fs = self.field_sum
        return Coefficients(
            g00=self.g00(r_nodes, t),
            g0r=fs(Kind.METRIC_TR, r_half, t).real,
            grr=1.0 + fs(Kind.METRIC_RR, r_half, t).real,
            grr_r=fs(Kind.METRIC_RR, r_nodes, t, deriv=1).real,
            a0=fs(Kind.MAGNETIC_T, r_nodes, t),
            ar=fs(Kind.MAGNETIC_R, r_half, t),
            v=fs(Kind.POTENTIAL, r_nodes, t),
        )

    # -- properties ---------------------------------------------------------
    @property
    def stationary(self):
        return all(f.stationary for f in self.fields)

    @property
    def symmetric(self):
        return all(f.imaginary_amplitude == 0 for f in self.fields)

    @property
    def max_rate(self):
        return max((f.rate for f in self.fields if not f.stationary), default=0.0)

    @property
    def feature_width(self):
        return min((f.feature_width for f in self.fields if f.amplitude or f.imaginary_amplitude), default=math.inf)

    @property
    def outer_support(self):
        return max((f.support for f in self.fields), default=0.0)

    def with_fields(self, fields, **kw):
        return AFModel(fields=tuple(fields), r0=kw.get("r0", self.r0), m0=kw.get("m0", self.m0),
                       envelope=self.envelope, name=kw.get("name", self.name), small_c=self.small_c)

    def check_invariants(self, n_samples=1000, seed=0, t_range=(0.0, 100.0), c0=1e-3):
        """List violated invariants at random ``(r, t)`` samples (empty if none)."""
        rng = np.random.default_rng(seed)
        r_hi = max(4.0 * self.r0, self.outer_support if math.isfinite(self.outer_support) else 0.0) * 1.5
        r = rng.uniform(0.0, r_hi, n_samples)
        t = rng.uniform(*t_range, n_samples)
        bad = []
        for ri, ti in zip(r, t):
            if self.g00(ri, ti) > -c0:
                bad.append(f"time-like: g00({ri:.3g},{ti:.3g}) = {self.g00(ri, ti):.3g}")
                break
        for ri, ti in zip(r, t):
            grr = 1.0 + self.field_sum(Kind.METRIC_RR, ri, ti).real
            if grr <= c0:
                bad.append(f"space-like: grr({ri:.3g},{ti:.3g}) = {float(grr):.3g}")
                break
        total = af_norm(self)
        if total > self.m0 * (1 + 1e-9):
            bad.append(f"AF norm {total:.4g} exceeds m0 = {self.m0}")
        outer = af_norm(self, self.r0)
        if outer > self.small_c:
            bad.append(f"AF norm beyond r0 is {outer:.4g} > {self.small_c}")
        if self.envelope is not None:
            bad.extend(self.envelope.violations(self.small_c))
        return bad


MINKOWSKI = AFModel(fields=(), r0=1.0, m0=0.0, name="minkowski")


# ---------------------------------------------------------------------------
# AF norms


def _sup_terms(model, lo, hi, m, t, dt, kinds):
    """Sum over derivative orders of sup over ``[lo, hi]`` for each weighted kind group."""
    r = np.linspace(lo, hi, m)
    jb = np.sqrt(1.0 + r * r)
    fs = model.field_sum
    total = 0.0
    groups = {
        "h00": [Kind.METRIC_TT],
        "h0r": [Kind.METRIC_TR],
        "hrr": [Kind.METRIC_RR],
        "a0": [Kind.MAGNETIC_T],
        "ar": [Kind.MAGNETIC_R],
        "v": [Kind.POTENTIAL],
    }
    for name, ks in groups.items():
        ks = [k for k in ks if k in kinds]
        if not ks:
            continue
        vals = [sum(fs(k, r, t, d, dt) for k in ks) for d in range(3)]
        if name.startswith("h"):
            total += sum(np.max(np.abs(jb**d * vals[d])) for d in range(3))
        elif name.startswith("a"):
            # <r> A and its radial derivative
            w0 = jb * vals[0]
            w1 = (r / jb) * vals[0] + jb * vals[1]
            total += np.max(np.abs(w0)) + np.max(np.abs(jb * w1))
        else:
            total += np.max(np.abs(jb**2 * vals[0]))
    return float(total)


def _af_norm(model, r_min, r_max, t, dt, kinds, rel_tol, k_max):
    if not model.fields:
        return 0.0
    intervals = []
    for k, lo, hi in dyadic_intervals(2.0 ** (k_max + 1), k_max):
        lo, hi = max(lo, r_min), min(hi, r_max)
        if hi > lo:
            intervals.append((lo, hi))
    m = 64
    prev = None
    while True:
        val = sum(_sup_terms(model, lo, hi, m, t, dt, kinds) for lo, hi in intervals)
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            return val
        if m >= 1 << 14:
            return val
        prev, m = val, 2 * m


def af_norm(model, region=None, *, r_max=math.inf, t=0.0, rel_tol=0.01, k_max=K_MAX):
    """Dyadic AF norm of ``(g - m, A, V)``, restricted to ``r > region`` if given.

    The l^1 L^inf structure is sampled with 64 points per annulus, doubled
    until the value changes by less than ``rel_tol``.  Radial derivatives
    stand in for the Cartesian ones.
    """
    r_min = 0.0 if region is None else float(region)
    if r_min < 0:
        raise ConfigError("region radius must be nonnegative", "region")
    return _af_norm(model, r_min, r_max, t, False, set(Kind), rel_tol, k_max)


def slow_variation(model, t=0.0, rel_tol=0.01):
    """AF norm of the time derivative of every coefficient.

    At ``t = 0`` each sinusoidal modulation has its largest derivative, so the
    default measures the peak rate of change.
    """
    if model.stationary:
        return 0.0
    return _af_norm(model, 0.0, math.inf, t, True, set(Kind), rel_tol, K_MAX)


def symmetry_defect(model, t=0.0, rel_tol=0.01):
    """AF norm of ``(0, Im A, Im V)``."""
    imag = []
    for f in model.fields:
        if f.imaginary_amplitude and not f.kind.is_metric:
            imag.append(
                CoefficientField(kind=f.kind, profile=f.profile, amplitude=f.imaginary_amplitude,
                                 center=f.center, width=f.width, power=f.power, rate=f.rate,
                                 modulation=f.modulation)
            )
    if not imag:
        return 0.0
    return af_norm(model.with_fields(imag), t=t, rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# null rays


@dataclass(frozen=True)
class TrappingReport:
    t0: float
    samples: int
    max_sojourn: float
    escaped: np.ndarray
    sojourn: np.ndarray
    cap: float

    @property
    def possibly_trapping(self):
        return not bool(np.all(self.escaped))

    def to_dict(self):
        return {
            "t0": self.t0,
            "samples": self.samples,
            "max_sojourn": self.max_sojourn,
            "escaped": int(np.sum(self.escaped)),
            "possibly_trapping": self.possibly_trapping,
            "cap": self.cap,
        }


class _RayField:
    """Hamiltonian vector field of null rays with coordinate time as parameter.

    With ``c = |g^00|``, ``b = g^{0r}``, ``alpha = g^{rr} - 1`` and
    ``Q = |xi|^2 + alpha xi_r^2`` the forward root of the null condition gives
    ``H = (S - b xi_r) / c`` with ``S^2 = b^2 xi_r^2 + c Q``.
    """

    def __init__(self, model, t):
        self.model = model
        self.t = t

    def _coef(self, r):
        fs = self.model.field_sum
        c = 1.0 + fs(Kind.METRIC_TT, r, self.t).real
        cp = fs(Kind.METRIC_TT, r, self.t, 1).real
        b = fs(Kind.METRIC_TR, r, self.t).real
        bp = fs(Kind.METRIC_TR, r, self.t, 1).real
        a = fs(Kind.METRIC_RR, r, self.t).real
        ap = fs(Kind.METRIC_RR, r, self.t, 1).real
        return c, cp, b, bp, a, ap

    def __call__(self, z):
        x, xi = z[..., :2], z[..., 2:]
        r = np.sqrt(np.sum(x * x, axis=-1) + 1e-300)
        n = x / r[..., None]
        xr = np.sum(xi * n, axis=-1)
        dxr_dx = (xi - xr[..., None] * n) / r[..., None]
        c, cp, b, bp, a, ap = self._coef(r)
        q = np.sum(xi * xi, axis=-1) + a * xr * xr
        s = np.sqrt(b * b * xr * xr + c * q)
        # d/dxi
        dq_dxi = 2.0 * xi + (2.0 * a * xr)[..., None] * n
        ds_dxi = ((b * b * xr)[..., None] * n + 0.5 * c[..., None] * dq_dxi) / s[..., None]
        dh_dxi = (ds_dxi - b[..., None] * n) / c[..., None]
        # d/dx
        dq_dx = (ap * xr * xr)[..., None] * n + (2.0 * a * xr)[..., None] * dxr_dx
        ds2_dx = ((2 * b * bp * xr * xr + cp * q)[..., None] * n
                  + (2 * b * b * xr)[..., None] * dxr_dx + c[..., None] * dq_dx)
        ds_dx = ds2_dx / (2.0 * s[..., None])
        dh_dx = ((ds_dx - (bp * xr)[..., None] * n - b[..., None] * dxr_dx) / c[..., None]
                 - ((s - b * xr) * cp / c**2)[..., None] * n)
        return np.concatenate([dh_dxi, -dh_dx], axis=-1)


_GL_A = np.array([[0.25, 0.25 - math.sqrt(3) / 6], [0.25 + math.sqrt(3) / 6, 0.25]])


def _gl4_step(f, z, h, iters=6):
    """One step of the 2-stage Gauss-Legendre (symplectic, order 4) method."""
    k = np.stack([f(z), f(z)])
    for _ in range(iters):
        z1 = z + h * (_GL_A[0, 0] * k[0] + _GL_A[0, 1] * k[1])
        z2 = z + h * (_GL_A[1, 0] * k[0] + _GL_A[1, 1] * k[1])
        k_new = f(np.stack([z1, z2]))
        if np.max(np.abs(k_new - k)) < 1e-14:
            k = k_new
            break
        k = k_new
    return z + 0.5 * h * (k[0] + k[1])


def _exit_times(f, z0, r0, h, cap):
    """Time until each ray leaves ``B(0, r0)`` (``nan`` if still inside at ``cap``)."""
    z = z0.copy()
    m = len(z)
    out = np.full(m, np.nan)
    r_prev = np.linalg.norm(z[:, :2], axis=1)
    # rays starting on or outside the sphere heading outward leave at once
    radial = np.sum(z[:, :2] * f(z)[:, :2], axis=1) * np.sign(h)
    done = (r_prev >= r0) & (radial >= 0)
    out[done] = 0.0
    active = np.flatnonzero(~done)
    t = 0.0
    while active.size and t < cap:
        z_new = _gl4_step(f, z[active], h)
        r_new = np.linalg.norm(z_new[:, :2], axis=1)
        crossed = (r_new >= r0) & (r_prev[active] < r0 + 1e-12)
        # rays that start exactly on the sphere heading inward
        crossed &= r_new > r_prev[active] - 1e-15
        if crossed.any():
            rp, rn = r_prev[active][crossed], r_new[crossed]
            frac = np.clip((r0 - rp) / np.where(rn > rp, rn - rp, 1.0), 0.0, 1.0)
            out[active[crossed]] = t + frac * abs(h)
        z[active] = z_new
        r_prev[active] = r_new
        active = active[~crossed]
        t += abs(h)
    return out


def trapping_time(model, n_rays=64, cap=None, step=None, t=0.0):
    """Integrate null rays through ``B(0, R0)`` and report their sojourn times.

    Rays start at stratified radii in ``(0, R0]`` and directions in ``[0, pi]``
    (measured from the inward normal) and are followed both forward and
    backward; the sojourn is the total time spent inside the ball.
    """
    r0 = model.r0
    cap = 100.0 * r0 if cap is None else cap
    step = 1e-3 * r0 if step is None else step
    n_r = max(1, int(round(math.sqrt(n_rays / 2))))
    n_th = max(2, n_rays // n_r)
    radii = r0 * np.arange(1, n_r + 1) / n_r
    thetas = np.linspace(0.0, math.pi, n_th)
    z = []
    for rho in radii:
        for th in thetas:
            z.append([rho, 0.0, -math.cos(th), math.sin(th)])
    z = np.array(z)
    f = _RayField(model, t)
    fwd = _exit_times(f, z, r0, step, cap)
    bwd = _exit_times(f, z, r0, -step, cap)
    sojourn = fwd + bwd
    escaped = np.isfinite(sojourn)
    t0 = float(np.max(sojourn[escaped])) if escaped.any() else math.inf
    max_sojourn = float(np.nanmax(np.where(escaped, sojourn, 2 * cap)))
    return TrappingReport(t0=t0, samples=len(z), max_sojourn=max_sojourn, escaped=escaped,
                          sojourn=sojourn, cap=cap)


def model_report(model, n_rays=64, cap=None):
    """JSON-ready summary with the fixed field names."""
    tr = trapping_time(model, n_rays=n_rays, cap=cap)
    return {
        "af_norm": af_norm(model),
        "af_norm_exterior": af_norm(model, model.r0),
        "t0": tr.t0 if math.isfinite(tr.t0) else None,
        "epsilon_slow": slow_variation(model),
        "epsilon_sym": symmetry_defect(model),
        "trapping": tr.to_dict(),
        "invariants": model.check_invariants(),
    }


__all__ = [
    "AFModel", "CoefficientField", "Coefficients", "FrequencyEnvelope", "Kind", "MINKOWSKI",
    "SMALL_C", "DELTA", "TrappingReport", "af_norm", "dyadic_intervals", "annulus_weight",
    "model_report", "slow_variation", "symmetry_defect", "trapping_time",
]
