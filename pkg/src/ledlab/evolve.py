"""Time stepping of the first-order system and empirical decay ratios.

States are ``U = (v, w)`` with ``w = d/dt v``; the system reads
``dU/dt = A(t) U + (0, -M^{-1} f)`` with ``A = i H``.  Steps use the
implicit midpoint rule, which keeps the energy form exactly for frozen
symmetric coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid

from .disc import RadialGrid, assemble_hamiltonian, assemble_pencil, positive_gram
from .errors import ConfigError, NumericError, PreconditionError
from .model import annulus_weight, dyadic_intervals

SPONGE_FRACTION = 0.25
SPONGE_STRENGTH = 4.0


def sponge_profile(grid, strength=SPONGE_STRENGTH, fraction=SPONGE_FRACTION):
    """Quadratic damping ramp on the outer ``fraction`` of the grid.

    Tuned for wavelengths of a few grid units or less; near-static content
    is partly reflected.
    """
    start = (1 - fraction) * grid.r_max
    x = np.clip((grid.r - start) / (grid.r_max - start), 0.0, 1.0)
    return strength * x**2


def generator(pencil, sponge=None):
    """Sparse ``A = i H`` (plus velocity damping) for one frozen pencil."""
    n = pencil.n
    minv = sp.diags(1.0 / pencil.m)
    lower_right = -1j * (minv @ pencil.B)
    if sponge is not None:
        lower_right = lower_right - sp.diags(sponge)
    return sp.bmat([[None, sp.identity(n)], [minv @ pencil.K, lower_right]], format="csc").astype(complex)


def _split(U, n):
    U = np.asarray(U, dtype=complex)
    if U.shape != (2 * n,):
        raise ValueError(f"state has shape {U.shape}, expected ({2 * n},)")
    return U[:n], U[n:]


class _Bins:
    """Radial bins refining the dyadic partition and any extra radii."""

    def __init__(self, grid, ell, extra=()):
        self.grid = grid
        self.ell = ell
        edges = {0.0, grid.r_max}
        for _, lo, hi in dyadic_intervals(grid.r_max):
            edges.update((lo, hi))
        edges.update(x for x in extra if 0 < x < grid.r_max)
        self.edges = np.array(sorted(edges))
        self.node_bin = np.searchsorted(self.edges, grid.r, side="right") - 1
        self.half_bin = np.clip(np.searchsorted(self.edges, grid.r_half, side="right") - 1, 0, len(self.edges) - 2)
        self.nb = len(self.edges) - 1
        self.lo = self.edges[:-1]

    def _sum(self, values, bins):
        return np.bincount(bins, weights=values, minlength=self.nb) * self.grid.h

    def densities(self, v, w, f):
        g = self.grid
        r, rh = g.r, g.r_half
        pad = np.concatenate([[0], v, [0]])
        dv = np.diff(pad) / g.h
        vh = 0.5 * (pad[1:] + pad[:-1]) / rh
        grad = self._sum(np.abs(dv - vh) ** 2, self.half_bin)
        if self.ell:
            grad += self._sum(self.ell * (self.ell + 1) * np.abs(v) ** 2 / r**2, self.node_bin)
        av2 = np.abs(v) ** 2
        return {
            "grad": grad,
            "dt": self._sum(np.abs(w) ** 2, self.node_bin),
            "low": self._sum(av2 / (1 + r * r), self.node_bin),
            "u2": self._sum(av2, self.node_bin),
            "u4": self._sum(av2 / (1 + r * r) ** 2, self.node_bin),
            "f2": self._sum(np.abs(f) ** 2, self.node_bin) if f is not None else np.zeros(self.nb),
        }

    def annuli(self, r_min=0.0, r_max=math.inf):
        """``[(weight_exponent_k, bin_mask)]`` for dyadic annuli clipped to ``[r_min, r_max)``."""
        out = []
        for k, lo, hi in dyadic_intervals(self.grid.r_max):
            mask = (self.lo >= max(lo, r_min) - 1e-12) & (self.lo < min(hi, r_max) - 1e-12)
            if mask.any():
                out.append((k, mask))
        return out


@dataclass
class Trajectory:
    """Sampled solution with per-step radial-bin accumulators."""

    grid: RadialGrid
    ell: int
    dt: float
    times: np.ndarray
    energy: np.ndarray
    stored_times: np.ndarray
    states: np.ndarray
    series: dict
    bins: _Bins = field(repr=False)
    model: object = field(default=None, repr=False)
    sponge: np.ndarray | None = None
    forced: bool = False
    cfl: float = 0.0
    max_abs: np.ndarray | None = None

    # -- helpers --------------------------------------------------------------
    def _upto(self, T):
        m = int(np.searchsorted(self.times, T + 1e-9 * self.dt, side="right"))
        if T > self.times[-1] + 1e-9 * self.dt:
            raise PreconditionError(f"trajectory ends at {self.times[-1]:.4g} < {T:.4g}")
        return m

    def _time_integral(self, key, T):
        m = self._upto(T)
        s = self.series[key][:m]
        if m < 2:
            return np.zeros(self.bins.nb)
        return np.trapezoid(s, dx=self.dt, axis=0) if hasattr(np, "trapezoid") else np.trapz(s, dx=self.dt, axis=0)

    def _le(self, sq, r_min=0.0, r_max=math.inf, dual=False):
        vals = []
        for k, mask in self.bins.annuli(r_min, r_max):
            vals.append(annulus_weight(k) ** (0.5 if dual else -0.5) * math.sqrt(max(sq[mask].sum(), 0.0)))
        if not vals:
            return 0.0
        return float(sum(vals) if dual else max(vals))

    def step_index(self, t):
        return min(int(round(t / self.dt)), len(self.times) - 1)

    # -- norms ----------------------------------------------------------------
    def le1(self, T, r_min=0.0, r_max=math.inf):
        sq = self._time_integral("grad", T) + self._time_integral("dt", T) + self._time_integral("low", T)
        return self._le(sq, r_min, r_max)

    def le(self, key, T, r_min=0.0, r_max=math.inf):
        return self._le(self._time_integral(key, T), r_min, r_max)

    def du_norm(self, t, r_min=0.0):
        """``|du(t)|_{L^2}`` (gradient and time derivative) restricted to ``r >= r_min``."""
        m = self.step_index(t)
        mask = self.bins.lo >= r_min - 1e-12
        return float(math.sqrt((self.series["grad"][m] + self.series["dt"][m])[mask].sum()))

    def du_series(self):
        return np.sqrt((self.series["grad"] + self.series["dt"]).sum(axis=1))

    def du_sup(self, T):
        return float(self.du_series()[: self._upto(T)].max())

    def forcing_le_star(self, T, r_min=0.0, r_max=math.inf):
        return self._le(self._time_integral("f2", T), r_min, r_max, dual=True)

    def forcing_l1l2(self, T, r_min=0.0, r_max=math.inf):
        m = self._upto(T)
        mask = (self.bins.lo >= r_min - 1e-12) & (self.bins.lo < r_max - 1e-12)
        per_t = np.sqrt(self.series["f2"][:m][:, mask].sum(axis=1))
        return float(np.sum(0.5 * (per_t[1:] + per_t[:-1])) * self.dt) if m > 1 else 0.0

    def forcing_norm(self, T, split=None):
        """Sum-space norm proxy: the least of three splittings of the forcing."""
        if not self.forced:
            return 0.0
        split = 2 * self.model.r0 if split is None and self.model is not None else (split or self.grid.r_max / 2)
        options = [
            self.forcing_le_star(T),
            self.forcing_l1l2(T),
            self.forcing_le_star(T, r_max=split) + self.forcing_l1l2(T, r_min=split),
        ]
        return float(min(options))

    def final_state(self):
        return self.states[-1]

    def norm_rows(self):
        """Per-step ``t, E, LE1_partial, max|U|``; the LE1 column integrates over ``[0, t]``."""
        dens = self.series["grad"] + self.series["dt"] + self.series["low"]
        cum = np.zeros_like(dens)
        cum[1:] = np.cumsum(0.5 * (dens[1:] + dens[:-1]) * self.dt, axis=0)
        le1 = np.zeros(len(self.times))
        for k, mask in self.bins.annuli():
            le1 = np.maximum(le1, annulus_weight(k) ** -0.5 * np.sqrt(np.maximum(cum[:, mask].sum(axis=1), 0.0)))
        top = self.max_abs if self.max_abs is not None else np.full(len(self.times), np.nan)
        return [{"t": float(t), "E": float(e), "LE1_partial": float(l), "max_abs_U": float(u)}
                for t, e, l, u in zip(self.times, self.energy, le1, top)]


def evolve(model, grid, ell, U0, f=None, T=10.0, dt=None, sponge=False, store_every=None, extra_radii=(),
           sponge_strength=SPONGE_STRENGTH, projector=None, project_every=1.0):
    """Integrate from ``U0 = (v, dv/dt)`` up to time ``T``.

    ``f`` is an optional callable ``t -> forcing samples`` (the right-hand
    side of the wave equation for ``v``).  ``projector`` is an invariant
    projection re-applied every ``project_every`` time units; it only strips
    roundoff that would otherwise feed exponentially growing modes.
    """
    h = grid.h
    dt = 0.5 * h if dt is None else float(dt)
    if not dt > 0:
        raise ConfigError("time step must be positive", "dt")
    if dt > 0.5 * h * (1 + 1e-12):
        raise ConfigError(f"dt = {dt:.4g} exceeds 0.5 h = {0.5 * h:.4g}", "dt")
    rate = model.max_rate
    if rate > 0 and dt > 0.1 / rate:
        raise ConfigError(f"dt = {dt:.4g} does not resolve the modulation rate {rate:.4g}", "dt")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1):
        raise ConfigError("horizon must be a positive multiple of dt", "T")
    n = grid.n
    v, w = _split(U0, n)
    U = np.concatenate([v, w])
    if projector is not None and not model.stationary:
        raise PreconditionError("re-projection needs a stationary model")
    reproject = max(1, int(round(project_every / dt)))
    stride = max(1, steps // 200) if store_every is None else max(1, int(store_every))
    damp = sponge_profile(grid, sponge_strength) if sponge else None
    bins = _Bins(grid, ell, tuple(extra_radii) + (2 * model.r0, 4 * model.r0))

    stationary = model.stationary
    p0 = assemble_pencil(model, grid, ell, 0.0)
    lu = None
    if stationary:
        A = generator(p0, damp)
        I = sp.identity(2 * n, format="csc", dtype=complex)
        lu = spla.splu((I - 0.5 * dt * A).tocsc())
        rhs_op = (I + 0.5 * dt * A).tocsr()

    def forcing(t):
        if f is None:
            return None
        out = np.asarray(f(t), dtype=complex)
        if out.shape != (n,):
            raise ValueError("forcing has the wrong shape")
        return out

    def energy_of(pencil, U):
        vv, ww = U[:n], U[n:]
        return float(h * (np.vdot(vv, pencil.K @ vv).real - np.vdot(ww, pencil.m * ww).real))

    times = dt * np.arange(steps + 1)
    energy = np.empty(steps + 1)
    top = np.empty(steps + 1)
    series = {k: np.empty((steps + 1, bins.nb)) for k in ("grad", "dt", "low", "u2", "u4", "f2")}
    stored_t, stored = [0.0], [U.copy()]

    def record(m, pencil, U):
        energy[m] = energy_of(pencil, U)
        top[m] = np.abs(U).max()
        for key, val in bins.densities(U[:n], U[n:], forcing(times[m])).items():
            series[key][m] = val

    record(0, p0, U)
    for m in range(steps):
        t_mid = times[m] + 0.5 * dt
        fm = forcing(t_mid)
        if stationary:
            pencil_mid = p0
            b = rhs_op @ U
        else:
            pencil_mid = assemble_pencil(model, grid, ell, t_mid)
            A = generator(pencil_mid, damp)
            I = sp.identity(2 * n, format="csc", dtype=complex)
            lu = spla.splu((I - 0.5 * dt * A).tocsc())
            b = (I + 0.5 * dt * A) @ U
        if fm is not None:
            b = b.copy()
            b[n:] += dt * (-fm / pencil_mid.m)
        U = lu.solve(b)
        if projector is not None and (m + 1) % reproject == 0:
            U = projector @ U
        if not np.all(np.isfinite(U)):
            raise NumericError("non-finite state", step=m + 1)
        pencil_now = p0 if stationary else assemble_pencil(model, grid, ell, times[m + 1])
        record(m + 1, pencil_now, U)
        if (m + 1) % stride == 0 or m + 1 == steps:
            stored_t.append(times[m + 1])
            stored.append(U.copy())

    speed = math.sqrt(np.max((1.0 + 0 * p0.m) / np.abs(p0.m)))
    return Trajectory(grid=grid, ell=ell, dt=dt, times=times, energy=energy, stored_times=np.array(stored_t),
                      states=np.array(stored), series=series, bins=bins, model=model, sponge=damp,
                      forced=f is not None, cfl=float(dt * 2 * speed / h), max_abs=top)


# ---------------------------------------------------------------------------
# decay ratios


def _ratio(num, den):
    return float(num / den) if den > 0 else None


@dataclass(frozen=True)
class DichotomyVerdict:
    kind: str  # exponential_growth | bounded_dispersive | inconclusive
    rate: float
    r2: float
    le_last_ratio: float | None

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate, "r2": self.r2, "le_last_ratio": self.le_last_ratio}


@dataclass(frozen=True)
class DecayReport:
    horizons: tuple
    two_point_ratio: dict
    le_ratio: dict
    stationary_ratio: dict
    high_freq_ratio: dict
    low_mourre_ratio: dict
    high_mourre_ratio: dict
    classification: DichotomyVerdict | None
    annuli: int

    def sup(self, name):
        vals = [v for v in getattr(self, name).values() if v is not None]
        return max(vals) if vals else None

    def to_dict(self):
        keys = ("two_point_ratio", "le_ratio", "stationary_ratio", "high_freq_ratio", "low_mourre_ratio",
                "high_mourre_ratio")
        out = {"horizons": list(self.horizons), "annuli": self.annuli}
        for k in keys:
            out[k] = {str(T): v for T, v in getattr(self, k).items()}
            out[k + "_sup"] = self.sup(k)
        out["classification"] = self.classification.to_dict() if self.classification else None
        return out


def decay_report(traj, horizons, alpha_hint=0.0, classify=True, exterior_radius=None):
    """Empirical ratios of the local energy estimates at each horizon."""
    horizons = tuple(float(T) for T in horizons)
    if max(horizons) > traj.times[-1] + 1e-9:
        raise PreconditionError("trajectory does not cover the largest horizon")
    R = exterior_radius if exterior_radius is not None else (2 * traj.model.r0 if traj.model else traj.grid.r_max / 4)
    tp, le, st, hf, lo, hi = {}, {}, {}, {}, {}, {}
    du0 = traj.du_norm(0.0)
    for T in horizons:
        lhs = traj.le1(T) + traj.du_sup(T)
        force = traj.forcing_norm(T)
        duT = traj.du_norm(T)
        le[T] = _ratio(lhs, du0 + force)
        tp[T] = _ratio(lhs, du0 + duT + force)
        st[T] = _ratio(lhs, du0 + duT + traj.le("dt", T) + force)
        hf[T] = _ratio(lhs, du0 + traj.le("u4", T) + force)
        ext = traj.le1(T, r_min=R)
        du_le_r = traj._le(traj._time_integral("grad", T) + traj._time_integral("dt", T), R, 2 * R)
        f_ext = traj.forcing_le_star(T, r_min=R) if traj.forced else 0.0
        lo[T] = _ratio(ext, traj.du_norm(0.0, R) + du_le_r + f_ext)
        u_le_r = traj.le("u2", T, R, 2 * R)
        hi[T] = _ratio(ext, traj.du_norm(T, R) + traj.du_norm(0.0, R) + f_ext + u_le_r / R)
    verdict = None
    if classify:
        try:
            verdict = classify_dichotomy(traj, alpha_hint)
        except PreconditionError:
            verdict = None
    return DecayReport(horizons, tp, le, st, hf, lo, hi, verdict, len(traj.bins.annuli()))


def classify_dichotomy(traj, alpha_hint=0.0, alpha_floor=0.01, r2_min=0.99, bound_factor=10.0):
    """Growth or boundedness verdict from the energy-norm history.

    The fit uses ``log |du(t)|^2`` over the second half of the run (the
    energy form itself can be indefinite).
    """
    T = traj.times[-1]
    need = 20.0 / alpha_hint if alpha_hint > 0 else 100.0
    if T < need * (1 - 1e-9):
        raise PreconditionError(f"trajectory length {T:.4g} is below the required {need:.4g}")
    e = traj.du_series() ** 2
    tail = traj.times >= T / 2
    t, y = traj.times[tail], np.log(np.maximum(e[tail], 1e-300))
    slope, icpt = np.polyfit(t, y, 1)
    pred = slope * t + icpt
    ss = np.sum((y - y.mean()) ** 2)
    r2 = float(1 - np.sum((y - pred) ** 2) / ss) if ss > 0 else 0.0
    rate = float(slope / 2)
    force = traj.forcing_norm(T)
    du0 = traj.du_norm(0.0)
    if rate >= alpha_floor and r2 >= r2_min:
        return DichotomyVerdict("exponential_growth", rate, r2, None)
    if traj.du_sup(T) <= bound_factor * (du0 + force):
        ratio = _ratio(traj.le1(T) + traj.du_sup(T), du0 + force)
        return DichotomyVerdict("bounded_dispersive", rate, r2, ratio)
    return DichotomyVerdict("inconclusive", rate, r2, None)


# ---------------------------------------------------------------------------
# propagators


def eigen_projectors(ham, alpha_floor=None, exterior_max=0.1):
    """``(P-, P+, P0)`` from left/right eigenvectors of the localized non-real modes."""
    from .spectral import eig_lower_half

    rep = eig_lower_half(ham, alpha_floor=alpha_floor, exterior_max=exterior_max)
    H = ham.dense()
    size = H.shape[0]
    w, vl, vr = sla.eig(H, left=True, right=True)

    def proj(targets):
        if len(targets) == 0:
            return np.zeros((size, size), dtype=complex)
        idx = [int(np.argmin(np.abs(w - z))) for z in targets]
        V, Y = vr[:, idx], vl[:, idx]
        return V @ np.linalg.solve(Y.conj().T @ V, Y.conj().T)

    pm = proj(rep.eigenvalues)
    pp = proj(np.conj(rep.eigenvalues))
    return pm, pp, np.eye(size) - pm - pp, rep


def symmetrized(model):
    """Same model with all imaginary parts dropped."""
    return model.with_fields([f.scaled(1.0, imaginary_factor=0.0) for f in model.fields])


@dataclass
class FlowSet:
    """One-step propagators ``Phi_n`` over ``[t_n, t_{n+1}]`` and their corrected versions."""

    t_grid: np.ndarray
    phi: list
    psi: list
    projectors: list
    deviations: np.ndarray
    weight: np.ndarray
    kappas: list

    def cumulative(self, which="F"):
        seq = self.phi if which == "F" else self.psi
        out = [np.eye(seq[0].shape[0], dtype=complex)]
        for S in seq:
            out.append(S @ out[-1])
        return out

    def weighted(self, mats):
        """Conjugate matrices into the Euclidean picture of the energy-space norm."""
        R = self.weight
        Rinv = sla.solve_triangular(R, np.eye(R.shape[0]), lower=False)
        return [R @ X @ Rinv for X in mats]

    @property
    def epsilon(self):
        return float(self.deviations.max()) if len(self.deviations) else 0.0


def one_step(model, grid, ell, t0, t1, dt, X=None):
    """Midpoint propagator from ``t0`` to ``t1`` applied to ``X`` (identity by default).

    ``t1 < t0`` with negative ``dt`` steps backwards.
    """
    n = grid.n
    steps = int(round((t1 - t0) / dt))
    if steps < 1 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, t1 - t0):
        raise ConfigError("propagator interval must be a multiple of dt", "dt")
    I = sp.identity(2 * n, format="csc", dtype=complex)
    X = np.eye(2 * n, dtype=complex) if X is None else np.array(X, dtype=complex)
    cached = None
    for m in range(steps):
        t_mid = t0 + (m + 0.5) * dt
        if cached is None or not model.stationary:
            A = generator(assemble_pencil(model, grid, ell, t_mid))
            lu = spla.splu((I - 0.5 * dt * A).tocsc())
            rhs = (I + 0.5 * dt * A).tocsr()
            cached = (lu, rhs)
        lu, rhs = cached
        X = lu.solve(rhs @ X)
    return X


def flow_matrices(model, grid, ell, T_star, N, dt=None, projector_method="eigen"):
    """Propagators on ``t_n = n T_star`` and the projector-corrected reference flow."""
    n = grid.n
    if 2 * n > 512:
        raise PreconditionError("dense propagators need 2n <= 512")
    dt = 0.5 * grid.h if dt is None else dt
    k = max(1, int(math.ceil(T_star / dt - 1e-9)))
    dt = T_star / k
    t_grid = T_star * np.arange(N + 1)
    sym = symmetrized(model)

    def frozen_projectors(t):
        pencil = assemble_pencil(sym, grid, ell, t)
        ham = assemble_hamiltonian(pencil)
        if projector_method == "contour":
            from .disc import energy_form
            from .spectral import trichotomy_static

            tri = trichotomy_static(ham, energy_form(pencil))
            if tri.projectors is None:
                size = 2 * n
                return (np.zeros((size, size)), np.zeros((size, size)), np.eye(size)), 0
            pr = tri.projectors
            return (pr.p_minus, pr.p_plus, pr.p_zero), tri.kappa
        pm, pp, p0, rep = eigen_projectors(ham)
        return (pm, pp, p0), rep.kappa

    phis, psis, projs, kappas, devs = [], [], [], [], []
    cache = None
    for i in range(N + 1):
        if model.stationary and cache is not None:
            projs.append(cache[0])
            kappas.append(cache[1])
            continue
        try:
            pr, kap = frozen_projectors(t_grid[i])
        except Exception as exc:
            raise type(exc)(f"frozen-time trichotomy failed at n = {i}: {exc}") from exc
        projs.append(pr)
        kappas.append(kap)
        cache = (pr, kap)
    step_cache = None
    for i in range(N):
        if model.stationary and step_cache is not None:
            phi = step_cache
        else:
            phi = one_step(model, grid, ell, t_grid[i], t_grid[i + 1], dt)
            step_cache = phi
        psi = sum(projs[i + 1][a] @ phi @ projs[i][a] for a in range(3))
        phis.append(phi)
        psis.append(psi)
        devs.append(np.linalg.norm(phi - psi, 2))
    pos = positive_gram(assemble_pencil(model, grid, ell, 0.0)).toarray()
    weight = sla.cholesky(0.5 * (pos + pos.conj().T), lower=False)
    return FlowSet(t_grid, phis, psis, projs, np.array(devs), weight, kappas)


__all__ = [
    "Trajectory", "DecayReport", "DichotomyVerdict", "FlowSet",
    "evolve", "decay_report", "classify_dichotomy", "flow_matrices", "one_step", "generator",
    "sponge_profile", "eigen_projectors", "symmetrized",
]
