"""Resolvents, eigenvalues, the zero-resonance constant and Riesz projectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .disc import Hamiltonian, NormFunctional, Pencil, RadialGrid, assemble_pencil, difference, norm_est
from .errors import ConfigError, ContourError, ConstructionError, NumericError, PreconditionError, ResolutionError
from .model import AFModel, annulus_weight, dyadic_intervals

DENSE_BUDGET = 4096
SEPARATION = 1e-3


# ---------------------------------------------------------------------------
# resolvent


@dataclass(frozen=True)
class ResolventSolve:
    omega: complex
    u: np.ndarray
    residual: float
    condition_estimate: float
    bc: str
    near_singular: bool = False

    def to_dict(self):
        return {
            "omega": [self.omega.real, self.omega.imag],
            "residual": self.residual,
            "condition_estimate": self.condition_estimate,
            "bc": self.bc,
            "near_singular": self.near_singular,
        }


def outgoing_factor(omega, h):
    """Ratio ``v_{n+1} / v_n`` imposed by ``(d/dr + i omega) v = 0`` at the outer half point."""
    return (1 - 0.5j * omega * h) / (1 + 0.5j * omega * h)


def closed_operator(pencil, omega, bc="outgoing"):
    """Sparse ``P(omega)`` with the requested outer closure."""
    if bc not in ("outgoing", "dirichlet"):
        raise ConfigError(f"unknown boundary condition {bc!r}", "bc")
    A = pencil.at(omega).tolil()
    if bc == "outgoing":
        h = pencil.grid.h
        A[-1, -1] -= pencil.outer_a * outgoing_factor(omega, h) / h**2
    return A.tocsc()


def _check_frequency(pencil, omega, bc):
    omega = complex(omega)
    if not np.isfinite(omega):
        raise ConfigError("frequency must be finite", "omega")
    if abs(omega) * pencil.grid.h > 0.5:
        raise ResolutionError(f"|omega| h = {abs(omega) * pencil.grid.h:.3g} exceeds 0.5")
    if bc == "outgoing" and omega.imag > 0:
        raise PreconditionError("outgoing resolvent is defined for Im omega <= 0")
    return omega


def _rcond(A, lu):
    """Reciprocal 1-norm condition estimate ``1 / (|A|_1 |A^-1|_1)``."""
    n = A.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"), dtype=complex)
    a1 = abs(A).sum(axis=0).max()
    try:
        ainv = spla.onenormest(inv)
    except Exception:  # pragma: no cover - onenormest is robust for square operators
        ainv = np.inf
    return float(1.0 / (a1 * ainv)) if ainv > 0 else math.inf


def _factor(A):
    try:
        with np.errstate(all="ignore"):
            return spla.splu(A)
    except RuntimeError:
        return None


def resolve(pencil, omega, f, bc="outgoing"):
    """Solve ``P(omega) u = f`` with an outgoing or Dirichlet outer closure."""
    omega = _check_frequency(pencil, omega, bc)
    f = np.asarray(f, dtype=complex)
    if f.shape != (pencil.n,):
        raise ValueError(f"right-hand side has shape {f.shape}, expected ({pencil.n},)")
    if not np.all(np.isfinite(f)):
        raise ConfigError("right-hand side is not finite", "f")
    A = closed_operator(pencil, omega, bc)
    lu = _factor(A)
    if lu is None:
        return ResolventSolve(omega, np.full(pencil.n, np.nan + 0j), math.inf, 0.0, bc, True)
    u = lu.solve(f)
    fn = np.linalg.norm(f)
    residual = float(np.linalg.norm(A @ u - f) / fn) if fn else 0.0
    rc = _rcond(A, lu)
    near = rc < 1e-12 or not np.all(np.isfinite(u))
    return ResolventSolve(omega, u, residual, rc, bc, near)


def refine_eigenvalue(pencil, omega, bc="outgoing", iters=30, tol=1e-14):
    """Newton refinement of an eigenvalue of the closed pencil from a nearby guess."""
    omega = complex(omega)
    h = pencil.grid.h
    n = pencil.n
    rng = np.random.default_rng(0)
    x = rng.normal(size=n) + 0j
    for _ in range(iters):
        A = closed_operator(pencil, omega, bc)
        lu = _factor(A)
        if lu is None:
            return omega
        x = lu.solve(x)
        x /= np.linalg.norm(x)
        y = lu.solve(x, trans="H")
        y /= np.linalg.norm(y)
        dA = pencil.B + 2 * omega * pencil.M
        if bc == "outgoing":
            # derivative of the closure term in omega
            c = 1 + 0.5j * omega * h
            drho = (-0.5j * h * c - (1 - 0.5j * omega * h) * 0.5j * h) / c**2
            dA = dA.tolil()
            dA[-1, -1] -= pencil.outer_a * drho / h**2
        step = np.vdot(y, A @ x) / np.vdot(y, dA @ x)
        omega -= step
        if abs(step) <= tol * max(1.0, abs(omega)):
            break
    return omega


# ---------------------------------------------------------------------------
# zero-resonance constant


@dataclass(frozen=True)
class ZeroResonance:
    """``K0`` together with a null-mode diagnostic when ``P0`` is singular."""

    value: float
    diagnostic: np.ndarray | None = None

    def __float__(self):
        return float(self.value)

    @property
    def finite(self):
        return math.isfinite(self.value)


def _flat_cholesky(pencil):
    """Upper Cholesky factor ``R`` of the flat stiffness ``G1 = R^H R``."""
    flat = pencil.flat().K.toarray().real
    return sla.cholesky(flat, lower=False)


def zero_resonance_constant(pencil, frozen=False, singular_tol=1e-13):
    """Smallest ``K0`` with ``|u|_{H1} <= K0 |P0 u|_{H^-1}`` on the grid.

    ``K0 = |R P0^-1 R^H|_2`` where ``R^H R`` is the flat stiffness matrix.
    A time-dependent model is only accepted with ``frozen=True``.
    """
    if pencil.model is not None and not pencil.model.stationary and not frozen:
        raise PreconditionError("zero-resonance constant needs a stationary model (pass frozen=True)")
    K = pencil.K.toarray()
    R = _flat_cholesky(pencil)
    s = sla.svdvals(K)
    if s[-1] <= singular_tol * s[0]:
        _, _, vh = sla.svd(K)
        return ZeroResonance(math.inf, vh[-1].conj())
    try:
        X = sla.solve(K, R.conj().T)
    except sla.LinAlgError:
        _, _, vh = sla.svd(K)
        return ZeroResonance(math.inf, vh[-1].conj())
    T = R @ X
    return ZeroResonance(float(sla.svdvals(T)[0]))


def form_bound(pencil):
    """``lambda_0 = max (-Q(u,u)) / |D_A u|^2`` for the lower-order part of ``K``."""
    flat = pencil.flat().K.toarray().real
    lower = pencil.K.toarray() - flat
    lower = 0.5 * (lower + lower.conj().T)
    return float(sla.eigh(-lower, flat, eigvals_only=True)[-1])


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    partners: np.ndarray
    kappa: int
    k0: float
    alpha: float | None
    beta: float | None
    alpha_floor: float

    def to_dict(self):
        return {
            "eigenvalues": [[w.real, w.imag] for w in self.eigenvalues],
            "partners": [[w.real, w.imag] for w in self.partners],
            "kappa": self.kappa,
            "k0": self.k0 if math.isfinite(self.k0) else None,
            "alpha": self.alpha,
            "beta": self.beta,
            "alpha_floor": self.alpha_floor,
        }


def exterior_fraction(grid, v, radius):
    mass = np.abs(v) ** 2
    total = mass.sum()
    return float(mass[grid.r > radius].sum() / total) if total else 0.0


def _dense_eig(mat, budget=DENSE_BUDGET):
    if mat.shape[0] > budget:
        raise PreconditionError(f"dense eigensolve of size {mat.shape[0]} exceeds the budget {budget}")
    try:
        return sla.eig(mat)
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc


def eig_lower_half(ham, alpha_floor=None, exterior_max=0.1, budget=DENSE_BUDGET):
    """Localized eigenvalues of ``H`` in the lower half-plane (growing modes)."""
    pencil = ham.pencil
    grid = pencil.grid
    n = pencil.n
    if alpha_floor is None:
        alpha_floor = 10.0 * grid.h**2
    w, V = _dense_eig(ham.dense(), budget)
    r0 = pencil.model.r0 if pencil.model is not None else grid.r_max / 4
    lower, vecs = [], []
    for k in np.argsort(w.imag):
        if not w[k].imag < -alpha_floor:
            continue
        if exterior_fraction(grid, V[:n, k], 2 * r0) >= exterior_max:
            continue
        lower.append(w[k])
        vecs.append(V[:, k] / np.linalg.norm(V[:, k]))
    lower = np.array(lower, dtype=complex)
    partners = []
    for z in lower:
        d = np.abs(w - np.conj(z))
        k = int(np.argmin(d))
        if d[k] <= 1e-6 * max(1.0, abs(z)):
            partners.append(w[k])
    k0 = float(zero_resonance_constant(pencil, frozen=True))
    im = np.abs(lower.imag)
    return SpectralReport(
        eigenvalues=lower,
        eigenvectors=np.array(vecs).T if vecs else np.zeros((2 * n, 0), complex),
        partners=np.array(partners, dtype=complex),
        kappa=len(lower),
        k0=k0,
        alpha=float(im.min()) if len(im) else None,
        beta=float(im.max()) if len(im) else None,
        alpha_floor=alpha_floor,
    )


# ---------------------------------------------------------------------------
# limiting absorption scans


def _le1_weight(pencil, omega):
    """Operator ``W`` with ``|W u|^2`` the Hilbert version of the LE1_omega norm squared."""
    g = pencil.grid
    r, rh = g.r, g.r_half
    n = g.n
    k_of = lambda x: np.floor(np.log2(np.maximum(x, 1.0))).astype(int)  # noqa: E731
    wn = np.sqrt(g.h * 2.0 ** (-k_of(r)))
    wh = np.sqrt(g.h * 2.0 ** (-k_of(rh)))
    d = difference(g)
    avg_over_r = sp.diags(1.0 / rh) @ sp.diags([np.full(n, 0.5), np.full(n, 0.5)], [0, -1], shape=(n + 1, n))
    grad = sp.diags(wh) @ (d - avg_over_r)
    blocks = [grad]
    if pencil.ell:
        blocks.append(sp.diags(wn * math.sqrt(pencil.ell * (pencil.ell + 1)) / r))
    blocks.append(sp.diags(wn / np.sqrt(1 + r * r)))
    blocks.append(sp.diags(wn * max(abs(omega), g.h)))
    return sp.vstack(blocks, format="csr")


def _le_star_inverse_weight(grid):
    k = np.floor(np.log2(np.maximum(grid.r, 1.0)))
    return 1.0 / np.sqrt(grid.h * 2.0**k)


def resolvent_norm(pencil, omega, iters=20, bc="outgoing", seed=0, start=None):
    """Power-iteration estimate of the weighted resolvent norm and the last residual."""
    omega = _check_frequency(pencil, omega, bc)
    A = closed_operator(pencil, omega, bc)
    lu = _factor(A)
    if lu is None:
        return math.inf, math.inf
    W = _le1_weight(pencil, omega)
    win = _le_star_inverse_weight(pencil.grid)
    if start is None:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=pencil.n) + 1j * rng.normal(size=pencil.n)
    else:
        x = np.asarray(start, dtype=complex)
    x = x / np.linalg.norm(x)
    lam = 0.0
    residual = 0.0
    for _ in range(iters):
        f = win * x
        u = lu.solve(f)
        residual = float(np.linalg.norm(A @ u - f) / np.linalg.norm(f))
        y = W @ u
        z = win * lu.solve(W.getH() @ y, trans="H")
        lam = float(np.linalg.norm(z))
        if lam == 0:
            return 0.0, residual
        x = z / lam
    return math.sqrt(lam), residual


@dataclass(frozen=True)
class ScanRow:
    re_omega: float
    im_omega: float
    norm: float
    residual: float


def lap_scan(pencil, omegas, iters=20, bc="outgoing", start=None):
    """Weighted resolvent norms over a set of frequencies (input order preserved)."""
    rows = []
    for w in np.ravel(np.asarray(omegas, dtype=complex)):
        if w.imag >= 0 and bc == "outgoing":
            raise PreconditionError("scan frequencies must lie in the open lower half-plane")
        nrm, res = resolvent_norm(pencil, w, iters=iters, bc=bc, start=start)
        rows.append(ScanRow(float(w.real), float(w.imag), nrm, res))
    return rows


# ---------------------------------------------------------------------------
# radiation condition


@dataclass(frozen=True)
class RadiationVerdict:
    residuals: tuple
    annuli: tuple
    outgoing: bool

    def to_dict(self):
        return {"residuals": list(self.residuals), "annuli": [list(a) for a in self.annuli], "outgoing": self.outgoing}


def radiation_check(v, omega, grid, decay=0.8):
    """Weighted residuals of ``(d/dr + i omega) u`` for ``u = v / r`` on the full annuli.

    The verdict is outgoing when each of the last three residuals is at most
    ``decay`` times its predecessor.
    """
    omega = complex(omega)
    if omega == 0:
        raise PreconditionError("radiation check needs a nonzero frequency")
    v = np.asarray(v, dtype=complex)
    if v.shape != (grid.n,):
        raise ValueError("field does not match grid")
    r = grid.r
    u = v / r
    du = np.gradient(u, grid.h)
    res = (du + 1j * omega * u) * r  # r^2 dr measure folded in
    annuli = [(k, lo, hi) for k, lo, hi in dyadic_intervals(grid.r_max) if k >= 0 and hi == 2.0 ** (k + 1)
              and hi <= r[-1] - grid.h]
    if len(annuli) < 4:
        raise ResolutionError("radiation check needs at least four full dyadic annuli")
    vals = []
    for k, lo, hi in annuli:
        mask = (r >= lo) & (r < hi)
        vals.append(float(annulus_weight(k) ** -0.5 * np.sqrt(grid.h * np.sum(np.abs(res[mask]) ** 2))))
    tail = vals[-4:]
    ok = all(b <= decay * a for a, b in zip(tail, tail[1:]))
    return RadiationVerdict(tuple(vals), tuple((lo, hi) for _, lo, hi in annuli), ok)


# ---------------------------------------------------------------------------
# contours and Riesz projectors


@dataclass(frozen=True)
class Contour:
    """Closed positively oriented contour: a rectangle or a circle."""

    kind: str = "rectangle"
    re_min: float = -1.0
    re_max: float = 1.0
    im_min: float = -1.0
    im_max: float = -0.1
    center: complex = 0j
    radius: float = 1.0
    nodes: int = 32
    max_nodes: int = 4096

    def __post_init__(self):
        if self.kind not in ("rectangle", "circle"):
            raise ConfigError(f"unknown contour kind {self.kind!r}", "contour.kind")
        if self.kind == "rectangle" and not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ConfigError("degenerate rectangle", "contour")
        if self.kind == "circle" and not self.radius > 0:
            raise ConfigError("circle radius must be positive", "contour.radius")

    @classmethod
    def rectangle(cls, m_c, alpha_c, beta_c, nodes=32):
        """``[-m_c, m_c] x [-beta_c, -alpha_c]``."""
        return cls("rectangle", -m_c, m_c, -beta_c, -alpha_c, nodes=nodes)

    @classmethod
    def circle(cls, center, radius, nodes=32):
        return cls("circle", center=complex(center), radius=radius, nodes=nodes)

    def mirrored(self):
        if self.kind == "circle":
            return Contour.circle(np.conj(self.center), self.radius, self.nodes)
        return Contour("rectangle", self.re_min, self.re_max, -self.im_max, -self.im_min, nodes=self.nodes,
                       max_nodes=self.max_nodes)

    def quadrature(self, nodes):
        """Nodes ``z_j`` and weights ``w_j`` approximating the contour integral ``dz``."""
        if self.kind == "circle":
            theta = 2 * np.pi * np.arange(nodes) / nodes
            z = self.center + self.radius * np.exp(1j * theta)
            return z, 1j * (z - self.center) * (2 * np.pi / nodes)
        corners = [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                   complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]
        # sin^4 sigmoidal substitution makes the trapezoid rule high order at the corners
        s = np.arange(1, nodes) / nodes
        psi = (3 * np.pi * s / 8 - np.sin(2 * np.pi * s) / 4 + np.sin(4 * np.pi * s) / 32) / (3 * np.pi / 8)
        dpsi = (8.0 / 3.0) * np.sin(np.pi * s) ** 4 / nodes
        zs, ws = [], []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            zs.append(a + (b - a) * psi)
            ws.append((b - a) * dpsi)
        return np.concatenate(zs), np.concatenate(ws)

    def distance(self, points):
        """Distance from each point to the contour."""
        p = np.asarray(points, dtype=complex)
        if self.kind == "circle":
            return np.abs(np.abs(p - self.center) - self.radius)
        x = np.clip(p.real, self.re_min, self.re_max)
        y = np.clip(p.imag, self.im_min, self.im_max)
        inside = (p.real > self.re_min) & (p.real < self.re_max) & (p.imag > self.im_min) & (p.imag < self.im_max)
        dx = np.minimum(p.real - self.re_min, self.re_max - p.real)
        dy = np.minimum(p.imag - self.im_min, self.im_max - p.imag)
        return np.where(inside, np.minimum(dx, dy), np.abs(p - (x + 1j * y)))

    def encloses(self, points):
        p = np.asarray(points, dtype=complex)
        if self.kind == "circle":
            return np.abs(p - self.center) < self.radius
        return (p.real > self.re_min) & (p.real < self.re_max) & (p.imag > self.im_min) & (p.imag < self.im_max)

    def to_dict(self):
        if self.kind == "circle":
            return {"kind": "circle", "center": [self.center.real, self.center.imag], "radius": self.radius}
        return {"kind": "rectangle", "re": [self.re_min, self.re_max], "im": [self.im_min, self.im_max]}


class _ResolventApplier:
    """``(z - H)^{-1}`` applied to the identity, via the pencil when available."""

    def __init__(self, ham):
        if isinstance(ham, Hamiltonian) and ham.pencil.grid is not None:
            self.pencil = ham.pencil
            self.size = 2 * ham.pencil.n
            self.dense = None
        else:
            mat = ham.dense() if isinstance(ham, Hamiltonian) else np.asarray(ham, dtype=complex)
            self.pencil = None
            self.dense = mat
            self.size = mat.shape[0]

    def __call__(self, z):
        if self.pencil is None:
            return sla.solve(z * np.eye(self.size) - self.dense, np.eye(self.size))
        p = self.pencil
        n = p.n
        A = p.at(z)
        lu = _factor(A)
        if lu is None:
            raise ContourError(f"pencil singular at quadrature node {z}")
        M = p.M
        rhs = np.hstack([(z * M + p.B).toarray(), (-1j * M).toarray()])
        a = lu.solve(rhs)
        b = 1j * (z * a - np.hstack([np.eye(n), np.zeros((n, n))]))
        return np.vstack([a, b])


def _spectrum(ham, budget=DENSE_BUDGET):
    mat = ham.dense() if isinstance(ham, Hamiltonian) else np.asarray(ham, dtype=complex)
    if mat.shape[0] > budget:
        raise PreconditionError("spectrum check exceeds the dense budget")
    return sla.eigvals(mat)


def riesz_projector(ham, contour, tol=1e-8, spectrum=None):
    """``(1/2 pi i) \\oint (z - H)^{-1} dz`` with node doubling until the change is below ``tol``."""
    spectrum = _spectrum(ham) if spectrum is None else spectrum
    d = contour.distance(spectrum)
    if len(d) and d.min() < SEPARATION:
        k = int(np.argmin(d))
        raise ContourError(f"contour passes within {d[k]:.2e} of the eigenvalue {spectrum[k]:.6g}", spectrum[k])
    apply = _ResolventApplier(ham)
    cache = {}

    def node_sum(nodes):
        z, w = contour.quadrature(nodes)
        total = np.zeros((apply.size, apply.size), dtype=complex)
        for zj, wj in zip(z, w):
            key = complex(round(zj.real, 15), round(zj.imag, 15))
            if key not in cache:
                cache[key] = apply(zj)
            total += wj * cache[key]
        return total / (2j * np.pi)

    nodes = contour.nodes
    prev = node_sum(nodes)
    while True:
        nodes *= 2
        cur = node_sum(nodes)
        change = np.abs(cur - prev).max()
        if change <= tol * max(1.0, np.abs(cur).max()):
            return cur, nodes
        if nodes >= contour.max_nodes:
            raise NumericError(f"contour quadrature did not converge (change {change:.2e} at {nodes} nodes)")
        prev = cur


@dataclass(frozen=True)
class ProjectorPair:
    p_minus: np.ndarray
    p_plus: np.ndarray
    p_zero: np.ndarray
    contour: Contour
    nodes: int
    rank_minus: int
    rank_plus: int
    defects: dict = field(default_factory=dict)

    def to_dict(self):
        return {"contour": self.contour.to_dict(), "nodes": self.nodes, "rank_minus": self.rank_minus,
                "rank_plus": self.rank_plus, "defects": self.defects}


def numerical_rank(P, tol=1e-6):
    s = sla.svdvals(P)
    return int(np.sum(s > tol * max(1.0, s[0] if len(s) else 1.0)))


def projector_defects(pm, pp, H=None):
    scale = max(1.0, np.linalg.norm(pm, 2), np.linalg.norm(pp, 2))
    out = {
        "idempotent_minus": float(np.linalg.norm(pm @ pm - pm, 2) / scale**2),
        "idempotent_plus": float(np.linalg.norm(pp @ pp - pp, 2) / scale**2),
        "product_pm": float(np.linalg.norm(pp @ pm, 2) / scale**2),
        "product_mp": float(np.linalg.norm(pm @ pp, 2) / scale**2),
    }
    if H is not None:
        hn = max(np.linalg.norm(H, 2), 1e-300)
        out["commute_minus"] = float(np.linalg.norm(H @ pm - pm @ H, 2) / (hn * scale))
        out["commute_plus"] = float(np.linalg.norm(H @ pp - pp @ H, 2) / (hn * scale))
    return out


def contour_projector(ham, contour, tol=1e-8, check=1e-8, kappa=None):
    """Riesz projectors for ``contour`` (lower) and its mirror image (upper)."""
    spectrum = _spectrum(ham)
    pm, n1 = riesz_projector(ham, contour, tol, spectrum)
    pp, n2 = riesz_projector(ham, contour.mirrored(), tol, spectrum)
    size = pm.shape[0]
    p0 = np.eye(size) - pm - pp
    H = ham.dense() if isinstance(ham, Hamiltonian) else np.asarray(ham, dtype=complex)
    defects = projector_defects(pm, pp, H)
    bad = {k: v for k, v in defects.items() if v > check}
    if bad:
        raise ConstructionError(f"projector invariants violated: {bad}")
    rm, rp = numerical_rank(pm), numerical_rank(pp)
    expected_m = int(np.sum(contour.encloses(spectrum)))
    expected_p = int(np.sum(contour.mirrored().encloses(spectrum)))
    if kappa is not None:
        expected_m = expected_p = kappa
    if rm != expected_m or rp != expected_p:
        raise ConstructionError(f"projector ranks ({rm}, {rp}) differ from enclosed counts ({expected_m}, {expected_p})")
    return ProjectorPair(pm, pp, p0, contour, max(n1, n2), rm, rp, defects)


def default_contour(report, ham=None, margin=1.0):
    """Rectangle around the detected lower-half eigenvalues, clear of the real axis."""
    if report.kappa == 0:
        raise PreconditionError("no lower-half eigenvalues to enclose")
    m_c = float(np.max(np.abs(report.eigenvalues.real))) + margin
    alpha_c = 0.5 * report.alpha
    beta_c = report.beta + margin
    return Contour.rectangle(m_c, alpha_c, beta_c)


# ---------------------------------------------------------------------------
# static trichotomy


@dataclass(frozen=True)
class StaticTrichotomy:
    projectors: ProjectorPair | None
    kappa: int
    alpha: float | None
    coercivity: float
    isotropy_defect: float
    symmetric_ok: bool
    dims: tuple

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "alpha": self.alpha,
            "coercivity": self.coercivity,
            "isotropy_defect": self.isotropy_defect,
            "symmetric_ok": self.symmetric_ok,
            "dims": list(self.dims),
            "projectors": self.projectors.to_dict() if self.projectors else None,
        }


def _range_basis(P, rank, pos):
    """Basis of ``range(P)`` orthonormal with respect to the Gram ``pos``."""
    if rank == 0:
        return np.zeros((P.shape[0], 0), dtype=complex)
    u, _, _ = sla.svd(P)
    X = u[:, :rank]
    L = sla.cholesky(X.conj().T @ pos @ X, lower=True)
    return X @ np.linalg.inv(L).conj().T


def trichotomy_static(ham, eform, report=None, tol=1e-6):
    """Split the energy space into growing, decaying and coercive parts."""
    pencil = ham.pencil
    if pencil.model is not None and not pencil.model.symmetric:
        raise PreconditionError("static trichotomy needs a symmetric model")
    report = eig_lower_half(ham) if report is None else report
    if not math.isfinite(report.k0):
        raise PreconditionError("zero resonance present (K0 is infinite)")
    G, pos = eform.gram, eform.positive
    size = G.shape[0]
    if report.kappa == 0:
        pair, p0 = None, np.eye(size)
        iso = 0.0
        dims = (0, 0, size)
    else:
        pair = contour_projector(ham, default_contour(report), kappa=report.kappa)
        p0 = pair.p_zero
        iso = 0.0
        for P, rank in ((pair.p_minus, pair.rank_minus), (pair.p_plus, pair.rank_plus)):
            X = _range_basis(P, rank, pos)
            iso = max(iso, float(np.abs(X.conj().T @ G @ X).max()))
        dims = (pair.rank_minus, pair.rank_plus, size - pair.rank_minus - pair.rank_plus)
    Q = _range_basis(p0, dims[2], pos)
    herm = Q.conj().T @ G @ Q
    c = float(np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))[0])
    return StaticTrichotomy(pair, report.kappa, report.alpha, c, iso, iso <= tol, dims)


__all__ = [
    "ResolventSolve", "resolve", "refine_eigenvalue", "closed_operator", "outgoing_factor",
    "ZeroResonance", "zero_resonance_constant", "form_bound",
    "SpectralReport", "eig_lower_half", "exterior_fraction",
    "ScanRow", "lap_scan", "resolvent_norm",
    "RadiationVerdict", "radiation_check",
    "Contour", "ProjectorPair", "riesz_projector", "contour_projector", "default_contour",
    "projector_defects", "numerical_rank",
    "StaticTrichotomy", "trichotomy_static",
]
