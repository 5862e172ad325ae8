"""Perturbation of exponential trichotomies for sequences of matrices.

A reference sequence of one-step maps ``g_n`` (with ``G_0 = I``) carries
projections ``Q-``, ``Q+`` at step 0.  Given nearby maps ``f_n`` the
projections ``P-``, ``P+`` of the perturbed flow are built as fixed points
of a Lyapunov-Perron type sum over the horizon.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConfigError, DichotomyAbsent, EpsilonTooLarge, HorizonTooShort, PreconditionError

THETA_MAX = 0.5
COND_MAX = 1e12
IDEMPOTENT_TOL = 1e-12
TAIL_TOL = 1e-6
MIN_GAP = 3  # pairs with n - m below this are treated as transient


def _norm(x):
    return float(np.linalg.norm(x, 2))


@dataclass
class DichotomyProblem:
    """Reference and perturbed one-step maps over a horizon of ``N`` steps."""

    g_steps: list
    f_steps: list
    q_minus: np.ndarray
    q_plus: np.ndarray
    C: float | None = None
    gamma: float | None = None
    gamma0: float | None = None
    pushed: list | None = field(default=None, repr=False)  # optional (Q-(n), Q+(n)) for n = 0..N

    def __post_init__(self):
        self.g_steps = [np.asarray(g, dtype=complex) for g in self.g_steps]
        self.f_steps = [np.asarray(f, dtype=complex) for f in self.f_steps]
        self.q_minus = np.asarray(self.q_minus, dtype=complex)
        self.q_plus = np.asarray(self.q_plus, dtype=complex)
        if len(self.g_steps) != len(self.f_steps) or not self.g_steps:
            raise ConfigError("reference and perturbed sequences need the same nonzero length", "steps")
        d = self.dimension
        for name, seq in (("g_steps", self.g_steps), ("f_steps", self.f_steps)):
            for i, m in enumerate(seq):
                if m.shape != (d, d):
                    raise ConfigError(f"map {i} has shape {m.shape}", f"{name}[{i}]")
                if np.linalg.cond(m) > COND_MAX:
                    raise PreconditionError(f"{name}[{i}] is numerically singular")
        for name, q in (("q_minus", self.q_minus), ("q_plus", self.q_plus)):
            if q.shape != (d, d):
                raise ConfigError(f"projection has shape {q.shape}", name)
            if np.abs(q @ q - q).max() > IDEMPOTENT_TOL * max(1.0, np.abs(q).max() ** 2):
                raise PreconditionError(f"{name} is not idempotent")
        scale = max(1.0, _norm(self.q_minus) * _norm(self.q_plus))
        if max(np.abs(self.q_plus @ self.q_minus).max(), np.abs(self.q_minus @ self.q_plus).max()) > 1e-10 * scale:
            raise PreconditionError("q_minus and q_plus must annihilate each other")

    @property
    def dimension(self):
        return self.g_steps[0].shape[0]

    @property
    def horizon(self):
        return len(self.g_steps)

    @property
    def epsilon(self):
        return max(_norm(f - g) for f, g in zip(self.f_steps, self.g_steps))

    @property
    def q_zero(self):
        return np.eye(self.dimension) - self.q_minus - self.q_plus

    def certified(self):
        return self.C is not None and self.gamma is not None and self.gamma0 is not None

    @classmethod
    def from_flow(cls, flow, weighted=True):
        """Problem built from :class:`ledlab.evolve.FlowSet` (projectors at ``t_0``).

        Frozen spectral projectors are labelled by the half-plane of their
        eigenvalues; under ``exp(i omega t)`` the upper half-plane decays, so it
        becomes ``Q-`` here and the lower half-plane becomes ``Q+``.
        """
        g, f = flow.psi, flow.phi
        pushed = [(p[1], p[0]) for p in flow.projectors]
        if weighted:
            g, f = flow.weighted(g), flow.weighted(f)
            pushed = [tuple(flow.weighted(list(p))) for p in pushed]
        return cls(g, f, pushed[0][0], pushed[0][1], pushed=pushed)


# ---------------------------------------------------------------------------
# rate certification


def _thin(P, tol=1e-10):
    """``P = V W^H`` with ``V`` orthonormal, or ``None`` when ``P`` has full rank."""
    if _count(P) > P.shape[0] // 4:
        return None
    u, sv, vh = np.linalg.svd(P)
    k = int(np.sum(sv > tol * max(sv[0], 1e-300))) if sv[0] > 1e-13 else 0
    return u[:, :k], (sv[:k, None] * vh[:k]).conj().T


def _pair_norms(steps, proj_at, backward=False, starts=None):
    """``{(n, m): |G_n Q(m) G_m^{-1}|}`` over ``n >= m``, or ``|G_m Q(m) G_n^{-1}|`` when ``backward``.

    Low-rank projections are carried as thin factors, which keeps every pair
    affordable; full-rank ones are restricted to the given start indices.
    """
    N = len(steps)
    out = {}
    inverses = [np.linalg.inv(s) for s in steps] if backward else None
    for m in range(N + 1):
        P = proj_at(m)
        thin = _thin(P)
        if starts is not None and m not in starts:
            continue
        if thin is not None:
            V, W = thin
            if V.shape[1] == 0:
                for n in range(m, N + 1):
                    out[(n, m)] = 0.0
                continue
            # |X W^H| = |X R^H| with W = Q R
            R = np.linalg.qr(W)[1] if not backward else np.linalg.qr(V)[1]
            X = V if not backward else W.conj().T
        else:
            X, R = P, None
        for n in range(m, N + 1):
            if n > m:
                # re-projecting keeps roundoff off the directions that grow
                X = proj_at(n) @ (steps[n - 1] @ X) if not backward else (X @ inverses[n - 1]) @ proj_at(n)
            if R is None:
                out[(n, m)] = _norm(X)
            elif not backward:
                out[(n, m)] = _norm(X @ R.conj().T)
            else:
                out[(n, m)] = _norm(R @ X)
    return out


def _fit(norms, sign):
    """Log-linear fit of ``|.| ~ C exp(sign * rate * (n - m))``; returns (C, rate) or None."""
    pairs = [(n - m, v) for (n, m), v in norms.items() if n - m >= MIN_GAP and v > 1e-300]
    scale = max(norms.values()) if norms else 0.0
    if not pairs or scale < 1e-13:
        return None
    k = np.array([p[0] for p in pairs], float)
    y = np.log([p[1] for p in pairs])
    slope = np.polyfit(k, y, 1)[0] if len(set(k)) > 1 else y.mean() / k.mean()
    rate = sign * slope
    C = max(v * math.exp(-sign * rate * (n - m)) for (n, m), v in norms.items())
    return float(C), float(rate)


def pushed_projectors(steps, q, given=None):
    """``Q(n) = G_n Q G_n^{-1}`` by recurrence, unless supplied."""
    if given is not None:
        return [np.asarray(x, dtype=complex) for x in given]
    out = [np.asarray(q, dtype=complex)]
    for g in steps:
        out.append(np.linalg.solve(g.T, (g @ out[-1]).T).T)
    return out


@dataclass(frozen=True)
class RateFit:
    C: float
    gamma: float
    gamma0: float
    gamma_minus: float | None
    gamma_plus: float | None

    def to_dict(self):
        return dict(self.__dict__)


def _starts(N, d, full_rank):
    """Start indices ``m`` sampled for the pair fits (``None`` means all)."""
    if full_rank and d > 64 and N > 12:
        return set(np.linspace(0, N // 2, 4).astype(int).tolist())
    if N > 64:
        return set(np.linspace(0, N - MIN_GAP - 1, 32).astype(int).tolist())
    return None


def _rates(steps, qm, qp, given_m=None, given_p=None):
    d = steps[0].shape[0]
    starts, thin_starts = _starts(len(steps), d, True), _starts(len(steps), d, False)
    pm = pushed_projectors(steps, qm, given_m)
    pp = pushed_projectors(steps, qp, given_p)
    p0 = [np.eye(d) - a - b for a, b in zip(pm, pp)]
    fm = _fit(_pair_norms(steps, lambda m: pm[m], starts=thin_starts), -1)
    fp = _fit(_pair_norms(steps, lambda m: pp[m], backward=True, starts=thin_starts), -1)
    f0f = _fit(_pair_norms(steps, lambda m: p0[m], starts=starts), 1)
    f0b = _fit(_pair_norms(steps, lambda m: p0[m], backward=True, starts=starts), 1)
    gammas = [f[1] for f in (fm, fp) if f is not None]
    if not gammas:
        raise DichotomyAbsent("both stable and unstable projections are empty")
    gamma = min(gammas)
    growth = [f[1] for f in (f0f, f0b) if f is not None]
    gamma0 = max(growth + [0.0])
    Cs = [f[0] for f in (fm, fp, f0f, f0b) if f is not None]
    return RateFit(max(Cs), gamma, gamma0, fm[1] if fm else None, fp[1] if fp else None)


def certify_trichotomy(problem):
    """Fit ``(C, gamma, gamma0)`` of the reference flow; fills them into ``problem``."""
    if problem.horizon < 10:
        raise PreconditionError("certification needs a horizon of at least 10 steps")
    pm = pp = None
    if problem.pushed is not None:
        pm = [p[0] for p in problem.pushed]
        pp = [p[1] for p in problem.pushed]
    fit = _rates(problem.g_steps, problem.q_minus, problem.q_plus, pm, pp)
    if fit.gamma <= fit.gamma0:
        raise DichotomyAbsent(f"no exponential separation: gamma = {fit.gamma:.4g}, gamma0 = {fit.gamma0:.4g}")
    problem.C, problem.gamma, problem.gamma0 = fit.C, fit.gamma, fit.gamma0
    return fit.C, fit.gamma, fit.gamma0


# ---------------------------------------------------------------------------
# the fixed point


def contraction_factor(eps, C_fwd, C_bwd, gamma, gamma_w):
    """Operator norm bound of the Perron map in ``sup_n e^{gamma_w n} |J_n|``."""
    if not 0 <= gamma_w < gamma:
        return math.inf
    fwd = C_fwd / (1 - math.exp(-(gamma - gamma_w)))
    bwd = C_bwd / math.expm1(gamma + gamma_w)
    return eps * math.exp(gamma_w) * (fwd + bwd)


def _choose_weight(eps, C_fwd, C_bwd, gamma):
    if eps == 0:
        return gamma * (1 - 1e-9), 0.0, 0.0
    theta = lambda w: contraction_factor(eps, C_fwd, C_bwd, gamma, w)  # noqa: E731
    best = minimize_scalar(theta, bounds=(0.0, gamma * (1 - 1e-12)), method="bounded")
    w0 = min((0.0, best.x), key=theta)
    t0 = theta(w0)
    if t0 >= THETA_MAX:
        raise EpsilonTooLarge(f"contraction factor {t0:.4g} >= {THETA_MAX}", factor=t0)
    hi = gamma * (1 - 1e-12)
    if theta(hi) <= THETA_MAX:
        w = hi
    else:
        w = brentq(lambda x: theta(x) - THETA_MAX, w0, hi)
    return w, theta(w), t0


@dataclass
class ProjectionResult:
    P: np.ndarray
    J: list = field(repr=False)
    gamma_w: float = 0.0
    theta: float = 0.0
    iterations: int = 0
    tail: float = 0.0
    residual: float = 0.0
    checks: dict = field(default_factory=dict)
    theta_min: float = 0.0


def perron_project(g_steps, f_steps, q, C, gamma, tol=1e-10, max_iter=500, pushed=None, C_bwd=None,
                   verify=True, tail_tol=TAIL_TOL):
    """Fixed point ``J_n = F_n P`` of the Perron sum for a two-sided dichotomy of rate ``gamma``.

    ``q`` projects onto the decaying directions of the reference flow; the
    complementary directions are assumed to decay backwards at the same rate.
    Returns the projection ``P = J_0`` with ``QP = Q`` and ``P(I - Q) = 0``.
    """
    N = len(g_steps)
    d = q.shape[0]
    eye = np.eye(d)
    C_bwd = C if C_bwd is None else C_bwd
    B = [f - g for f, g in zip(f_steps, g_steps)]
    eps = max(_norm(b) for b in B)
    w, theta, theta_min = _choose_weight(eps, C, C_bwd, gamma)
    Q = pushed_projectors(g_steps, q, pushed)
    ginv = [np.linalg.inv(g) for g in g_steps]

    base = [Q[0].copy()]
    for n in range(1, N + 1):
        base.append(Q[n] @ (g_steps[n - 1] @ base[-1]))

    def apply(J):
        y = [None] + [B[j - 1] @ J[j - 1] for j in range(1, N + 1)]
        S = [np.zeros((d, d), complex)]
        for n in range(1, N + 1):
            S.append(Q[n] @ (g_steps[n - 1] @ S[-1] + y[n]))
        T = [None] * (N + 1)
        T[N] = np.zeros((d, d), complex)
        for n in range(N - 1, -1, -1):
            T[n] = (eye - Q[n]) @ (ginv[n] @ (T[n + 1] + (eye - Q[n + 1]) @ y[n + 1]))
        return [base[n] + S[n] - T[n] for n in range(N + 1)]

    weights = np.exp(w * np.arange(N + 1))

    def wnorm(J):
        # Frobenius bounds the operator norm and is far cheaper at large d
        return max(weights[n] * np.linalg.norm(J[n]) for n in range(N + 1))

    J = base
    it = 0
    while True:
        it += 1
        nxt = apply(J)
        diff = wnorm([a - b for a, b in zip(nxt, J)])
        J = nxt
        if diff <= tol * max(1.0, wnorm(J)):
            break
        if it >= max_iter:
            raise EpsilonTooLarge(f"no convergence after {max_iter} iterations", factor=theta)
    size = wnorm(J)
    tail = 0.0
    if eps > 0:
        tail = (C_bwd * eps * math.exp(w) * size * math.exp(-(gamma + w) * N)
                / ((-math.expm1(-(gamma + w))) * (1 - theta)))
    if tail > tail_tol:
        raise HorizonTooShort(f"truncation bound {tail:.3g} exceeds {tail_tol:.3g} at N = {N}")
    res = ProjectionResult(P=J[0], J=J, gamma_w=w, theta=theta, iterations=it, tail=tail, theta_min=theta_min)
    res.residual = wnorm([a - b for a, b in zip(apply(J), J)])
    if verify:
        res.checks = _verify_projection(res, f_steps, q)
    return res


def _verify_projection(res, f_steps, q):
    # one-step identity J_n = f_{n-1} J_{n-1} in the weighted norm; recomputing
    # F_n J_0 from scratch would amplify roundoff along the unstable directions
    P, J = res.P, res.J
    w = np.exp(res.gamma_w * np.arange(len(J)))
    size = max(w[n] * np.linalg.norm(J[n]) for n in range(len(J)))
    flow_err = max((w[n] * np.linalg.norm(J[n] - f_steps[n - 1] @ J[n - 1]) for n in range(1, len(J))), default=0.0)
    eye = np.eye(P.shape[0])
    return {
        "flow": float(flow_err / max(size, 1e-300)),
        "qp_eq_q": float(np.abs(q @ P - q).max()),
        "idempotent": float(np.abs(P @ P - P).max()),
        "kernel": float(np.abs(P @ (eye - q)).max()),
    }


def decay_samples(f_steps, P, rate, n_samples=16, seed=0, max_span=None):
    """Largest ``|F_n P x| e^{rate (n - m)} / |F_m P x|`` over random ``x`` and ``0 <= m <= n <= max_span``.

    Plain forward iteration lets roundoff leak into growing directions, so
    the span defaults to what double precision can follow.
    """
    if max_span is None:
        max_span = max(MIN_GAP, int(math.log(1e8) / max(2 * rate, 1e-3)))
    rng = np.random.default_rng(seed)
    d = P.shape[0]
    worst = 0.0
    for _ in range(n_samples):
        x = P @ (rng.standard_normal(d) + 1j * rng.standard_normal(d))
        traj = [x]
        for f in f_steps[:max_span]:
            traj.append(f @ traj[-1])
        norms = np.array([np.linalg.norm(v) for v in traj])
        if norms[0] < 1e-14:
            continue
        for m in range(len(norms)):
            k = np.arange(len(norms) - m)
            worst = max(worst, float(np.max(norms[m:] * np.exp(rate * k) / norms[m])))
    return worst


@dataclass
class PerronResult:
    p_minus: np.ndarray
    p_plus: np.ndarray
    p_zero: np.ndarray
    C: float
    gamma: float
    gamma0: float
    iterations: tuple
    contraction: tuple
    tail: float
    epsilon: float
    checks: dict = field(default_factory=dict)
    # orthonormal bases of F_n range(P-) and of the complement of F_n range(1 - P+)
    minus_ranges: list | None = field(default=None, repr=False)
    plus_cokernels: list | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "C": self.C,
            "gamma": self.gamma,
            "gamma0": self.gamma0,
            "iterations": list(self.iterations),
            "contraction": list(self.contraction),
            "tail": self.tail,
            "epsilon": self.epsilon,
            "checks": self.checks,
        }


def _count(q):
    return int(round(np.trace(q).real))


def perron_trichotomy(problem, tol=1e-10, max_iter=500, parallel=True, tail_tol=TAIL_TOL, keep_bases=False):
    """Projections ``P-``, ``P+``, ``P0`` of the perturbed flow."""
    if not problem.certified():
        certify_trichotomy(problem)
    gamma, gamma0, C = problem.gamma, problem.gamma0, problem.C
    s = 0.5 * (gamma + gamma0)
    reduced = 0.5 * (gamma - gamma0)
    d = problem.dimension
    eye = np.eye(d)
    qm, qp = problem.q_minus, problem.q_plus
    q0 = eye - qm - qp
    pieces = lambda *qs: max(1, sum(1 for x in qs if _count(x) > 0))  # noqa: E731
    pm_given = [p[0] for p in problem.pushed] if problem.pushed is not None else None
    pp_given = [eye - p[1] for p in problem.pushed] if problem.pushed is not None else None

    def branch(sign):
        scale = math.exp(sign * s)
        g = [scale * x for x in problem.g_steps]
        f = [scale * x for x in problem.f_steps]
        if sign > 0:
            q, cf, cb, given = qm, C * pieces(qm), C * pieces(q0, qp), pm_given
        else:
            q, cf, cb, given = eye - qp, C * pieces(qm, q0), C * pieces(qp), pp_given
        if _count(q) == 0:
            return None
        return perron_project(g, f, q, cf, reduced, tol=tol, max_iter=max_iter, pushed=given, C_bwd=cb,
                              tail_tol=tail_tol)

    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            minus, plus = pool.map(branch, (1, -1))
    else:
        minus, plus = branch(1), branch(-1)
    p_minus = minus.P if minus is not None else np.zeros((d, d), complex)
    # the decaying branch is empty only when everything is unstable
    p_plus = eye - plus.P if plus is not None else eye.astype(complex)
    p_zero = eye - p_plus - p_minus
    results = [r for r in (minus, plus) if r is not None]
    loss = max([reduced - r.gamma_w for r in results] + [0.0])
    C_out = C / (1 - max([r.theta for r in results] + [0.0]))
    thetas = tuple(r.theta_min for r in results)
    checks = {
        "commute": float(_norm(p_plus @ p_minus) + _norm(p_minus @ p_plus)),
        "idempotent": float(max(np.abs(p @ p - p).max() for p in (p_minus, p_plus, p_zero))),
        "residual": float(max([r.residual for r in results] + [0.0])),
        "flow": float(max([r.checks.get("flow", 0.0) for r in results] + [0.0])),
        "qp_eq_q": float(max([r.checks.get("qp_eq_q", 0.0) for r in results] + [0.0])),
    }
    return PerronResult(
        p_minus=p_minus,
        p_plus=p_plus,
        p_zero=p_zero,
        C=C_out,
        gamma=gamma - loss,
        gamma0=gamma0 + loss,
        iterations=tuple(r.iterations for r in results),
        contraction=thetas,
        tail=float(sum(r.tail for r in results)),
        epsilon=problem.epsilon,
        checks=checks,
        minus_ranges=_bases(minus, _count(qm), complement=False) if keep_bases else None,
        plus_cokernels=_bases(plus, _count(qp), complement=True) if keep_bases else None,
    )


def _bases(res, k, complement):
    """Per-step range bases of ``J_n`` (or the ``k``-dimensional orthogonal complement)."""
    if res is None:
        return None
    d = res.J[0].shape[0]
    rank = d - k if complement else k
    omega = np.random.default_rng(0).standard_normal((d, rank))
    out = []
    for Jn in res.J:
        basis = np.linalg.qr(Jn @ omega)[0]
        out.append(_perp(basis) if complement else basis)
    return out


def _oblique(A, Y):
    """Projection with range ``span A`` and kernel ``(span Y)^perp``."""
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], A.shape[0]), complex)
    return A @ np.linalg.solve(Y.conj().T @ A, Y.conj().T)


def _push_subspace(f_steps, X):
    out = [np.linalg.qr(X)[0]]
    for f in f_steps:
        out.append(np.linalg.qr(f @ out[-1])[0])
    return out


def _perp(X):
    q = np.linalg.qr(X, mode="complete")[0]
    return q[:, X.shape[1]:]


def flow_projectors(result, f_steps):
    """``(F_n P- F_n^{-1}, F_n P+ F_n^{-1})`` for ``n = 0..N`` built from stable subspaces.

    Ranges of ``P-`` come from the fixed point itself; everything else is
    pushed along dominant directions only.
    """
    d = result.p_minus.shape[0]
    eye = np.eye(d)
    N = len(f_steps)
    km = _count(result.p_minus)
    kp = _count(result.p_plus)
    zeros = np.zeros((d, d), complex)
    if km:
        kern = _push_subspace(f_steps, range_basis(eye - result.p_minus, d - km))
        ranges = result.minus_ranges
        pm = [_oblique(ranges[n], _perp(kern[n])) for n in range(N + 1)]
    else:
        pm = [zeros] * (N + 1)
    if kp:
        rng = _push_subspace(f_steps, range_basis(result.p_plus, kp))
        pp = [_oblique(rng[n], result.plus_cokernels[n]) for n in range(N + 1)]
    else:
        pp = [zeros] * (N + 1)
    return pm, pp


# ---------------------------------------------------------------------------
# measurement on the perturbed flow


@dataclass
class RateTable:
    C: float
    alpha: float
    alpha0: float
    alpha_minus: float | None
    alpha_plus: float | None
    pushed_deviation: float | None
    pushed_ratio: float | None

    def to_dict(self):
        return dict(self.__dict__)


def verify_discrete_trichotomy(f_steps, p_minus, p_plus, t_grid=None, frozen=None, epsilon=None, pushed=None):
    """Fitted constants of the perturbed flow; rates are per unit of ``t_grid``.

    ``frozen`` optionally lists ``(P-(t_n), P+(t_n))`` to compare against the
    pushed-forward projections.  ``pushed`` supplies those pushed projections
    (see :func:`flow_projectors`); otherwise they come from the plain
    recurrence, which is only reliable over short horizons.
    """
    N = len(f_steps)
    dt = 1.0 if t_grid is None else float(np.mean(np.diff(t_grid)))
    if pushed is None:
        pm, pp = pushed_projectors(f_steps, p_minus), pushed_projectors(f_steps, p_plus)
    else:
        pm, pp = pushed
    fit = _rates(list(f_steps), p_minus, p_plus, pm, pp)
    dev = ratio = None
    if frozen is not None:
        dev = 0.0
        for n in range(min(N + 1, len(frozen))):
            dev = max(dev, _norm(frozen[n][0] - pm[n]), _norm(frozen[n][1] - pp[n]))
        ratio = dev / epsilon if epsilon else None
    per = lambda x: None if x is None else x / dt  # noqa: E731
    return RateTable(fit.C, fit.gamma / dt, fit.gamma0 / dt, per(fit.gamma_minus), per(fit.gamma_plus), dev, ratio)


def subspace_distance(A, B):
    """Sine of the largest principal angle between column spaces."""
    qa = np.linalg.qr(A)[0]
    qb = np.linalg.qr(B)[0]
    s = np.linalg.svd(qa.conj().T @ qb, compute_uv=False)
    return float(math.sqrt(max(0.0, 1 - min(s) ** 2))) if len(s) else 0.0


def range_basis(P, rank=None, tol=1e-8):
    u, s, _ = np.linalg.svd(P)
    k = rank if rank is not None else int(np.sum(s > tol * max(s[0], 1e-300)))
    return u[:, :k]


__all__ = [
    "DichotomyProblem", "PerronResult", "ProjectionResult", "RateTable", "RateFit",
    "certify_trichotomy", "perron_project", "perron_trichotomy", "verify_discrete_trichotomy",
    "contraction_factor", "pushed_projectors", "flow_projectors", "decay_samples", "subspace_distance", "range_basis",
]
