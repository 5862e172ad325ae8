"""Finite-difference discretization of one angular mode.

The unknown is ``v = r u`` on the interior nodes ``r_i = i h`` (``i = 1..n``)
with ``v_0 = v_{n+1} = 0``.  First-order quantities (``D v``, ``g^rr``,
``g^0r``, ``A_r``) live on the half points ``(j + 1/2) h`` for ``j = 0..n``.
Writing ``D = -i d/dr`` and ``L = D + A_r``, the stationary part is

    K = L^T a L + a'/r + l(l+1)/r^2 + g00 A0^2 + V + (A0 b L + L A0 b)

and the coefficient of the frequency is ``B = b L + L b + 2 A0 g00``, both
in divergence (staggered) form so that real coefficients give Hermitian
matrices.  The mass term is ``M = diag(g00)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from .errors import ConfigError, PreconditionError, ResolutionError
from .model import AFModel, Kind, annulus_weight, dyadic_intervals

MIN_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    h: float
    n: int

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("grid spacing must be positive", "grid.h")
        if self.n < MIN_NODES:
            raise ConfigError(f"need at least {MIN_NODES} interior nodes", "grid.n")

    @classmethod
    def covering(cls, r_max, n):
        """Grid with ``n`` interior nodes and outer radius ``r_max``."""
        return cls(h=r_max / (n + 1), n=int(n))

    @property
    def r_max(self):
        return (self.n + 1) * self.h

    @property
    def r(self):
        return self.h * np.arange(1, self.n + 1)

    @property
    def r_half(self):
        return self.h * (np.arange(self.n + 1) + 0.5)

    def check_pairing(self, model):
        if self.r_max < 4.0 * model.r0 - 1e-12:
            raise PreconditionError(f"grid radius {self.r_max:.4g} is below 4 R0 = {4 * model.r0:.4g}")
        width = model.feature_width
        if self.h > width / 4:
            raise ResolutionError(f"h = {self.h:.4g} exceeds a quarter of the feature width {width:.4g}")


def difference(grid):
    """``(n+1) x n`` forward difference from nodes to half points (Dirichlet)."""
    n, h = grid.n, grid.h
    return sp.diags([np.ones(n), -np.ones(n)], [0, -1], shape=(n + 1, n), format="csr") / h


def averaging(grid):
    """``(n+1) x n`` node-to-half-point average (Dirichlet)."""
    n = grid.n
    return sp.diags([np.full(n, 0.5), np.full(n, 0.5)], [0, -1], shape=(n + 1, n), format="csr")


@dataclass(frozen=True)
class Pencil:
    """Matrices of ``P(w) = K + w B + w^2 M`` (``M`` stored as its diagonal)."""

    K: sp.csr_matrix
    B: sp.csr_matrix
    m: np.ndarray
    grid: RadialGrid
    ell: int = 0
    t: float = 0.0
    model: AFModel | None = field(default=None, compare=False, repr=False)
    outer_a: float = 1.0

    @property
    def n(self):
        return len(self.m)

    @property
    def M(self):
        return sp.diags(self.m, format="csr")

    def at(self, omega):
        """Sparse ``P(omega)`` with the Dirichlet closure."""
        return (self.K + omega * self.B + omega * omega * self.M).tocsc()

    def residual(self, omega, u):
        """Relative pencil residual ``|P(w) u| / ((|K| + |w||B| + |w|^2|M|) |u|)``."""
        scale = norm_est(self.K) + abs(omega) * norm_est(self.B) + abs(omega) ** 2 * np.max(np.abs(self.m))
        return float(np.linalg.norm(self.at(omega) @ u) / (scale * np.linalg.norm(u)))

    def hermiticity_defect(self):
        k = norm_est(self.K - self.K.getH()) / max(norm_est(self.K), 1e-300)
        b = norm_est(self.B - self.B.getH()) / max(norm_est(self.B), 1e-300)
        return max(k, b if self.B.nnz else 0.0)

    def flat(self):
        """Minkowski pencil of the same mode on the same grid."""
        return assemble_pencil(AFModel(r0=self.grid.r_max / 4), self.grid, self.ell)

    def dense(self):
        return self.K.toarray(), self.B.toarray(), np.diag(self.m).astype(complex)


def toy_pencil(K, B, m):
    """Pencil from explicit matrices, detached from any grid (for small examples)."""
    K = sp.csr_matrix(np.atleast_2d(np.asarray(K, dtype=complex)))
    B = sp.csr_matrix(np.atleast_2d(np.asarray(B, dtype=complex)))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if K.shape != B.shape or K.shape != (len(m), len(m)):
        raise ConfigError("pencil blocks have inconsistent shapes", "pencil")
    return Pencil(K=K, B=B, m=m, grid=None)


def norm_est(a):
    """Frobenius-free spectral norm bound for a sparse matrix: sqrt(|A|_1 |A|_inf)."""
    if sp.issparse(a):
        a = abs(a)
        return float(np.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max())) if a.nnz else 0.0
    return float(np.linalg.norm(a, 2))


def assemble_pencil(model, grid, ell=0, t=0.0):
    """Assemble ``(K, B, M)`` for angular mode ``ell`` at time ``t``."""
    if ell < 0 or int(ell) != ell:
        raise ConfigError("angular mode must be a nonnegative integer", "ell")
    grid.check_pairing(model)
    r, rh = grid.r, grid.r_half
    fs = model.field_sum
    g00 = model.g00(r, t)
    a = 1.0 + fs(Kind.METRIC_RR, rh, t).real
    a_r = fs(Kind.METRIC_RR, r, t, 1).real
    b = fs(Kind.METRIC_TR, rh, t).real
    a0 = fs(Kind.MAGNETIC_T, r, t)
    a0h = fs(Kind.MAGNETIC_T, rh, t)
    ar = fs(Kind.MAGNETIC_R, rh, t)

    d = difference(grid) / 1j
    avg = averaging(grid)
    right = d + sp.diags(ar) @ avg            # L: nodes -> half points
    left = d.getH() + avg.T @ sp.diags(ar)    # L acting half points -> nodes

    diag = a_r / r + ell * (ell + 1) / r**2 + g00 * a0**2 + fs(Kind.POTENTIAL, r, t)
    K = left @ sp.diags(a) @ right + sp.diags(diag)
    if np.any(b):
        cross = avg.T @ sp.diags(a0h * b) @ right + left @ sp.diags(a0h * b) @ avg
        K = K + cross
        B = avg.T @ sp.diags(b) @ right + left @ sp.diags(b) @ avg + sp.diags(2 * a0 * g00)
    else:
        B = sp.diags(2 * a0 * g00)
    B = sp.csr_matrix(B, dtype=complex)
    B.eliminate_zeros()
    return Pencil(K=sp.csr_matrix(K, dtype=complex), B=B, m=np.asarray(g00, float), grid=grid,
                  ell=int(ell), t=float(t), model=model, outer_a=float(a[-1]))


@dataclass(frozen=True)
class Hamiltonian:
    """First-order system ``D_t U = H U`` for ``U = (u, D_t u)`` style data.

    ``H = [[0, -i], [-i M^-1 K, -M^-1 B]]``; an eigenvector of ``H`` with
    eigenvalue ``w`` has the form ``(u, i w u)``.
    """

    mat: sp.csr_matrix
    pencil: Pencil

    def dense(self):
        return self.mat.toarray()

    def eigenvalues(self):
        return np.linalg.eigvals(self.dense())


def assemble_hamiltonian(pencil):
    if np.any(pencil.m >= 0):
        raise PreconditionError("mass diagonal must be negative")
    n = pencil.n
    minv = sp.diags(1.0 / pencil.m)
    mat = sp.bmat([[None, -1j * sp.identity(n)], [-1j * minv @ pencil.K, -minv @ pencil.B]], format="csr")
    return Hamiltonian(mat=mat.astype(complex), pencil=pencil)


@dataclass(frozen=True)
class EnergyForm:
    """Quadrature Gram matrix of the (possibly indefinite) energy form."""

    gram: np.ndarray
    positive: np.ndarray
    pencil: Pencil

    def inner(self, U, W):
        return complex(np.vdot(W, self.gram @ U))

    def energy(self, U):
        return float(self.inner(U, U).real)

    def positive_norm(self, U):
        return float(np.sqrt(max(np.vdot(U, self.positive @ U).real, 0.0)))

    def negative_count(self):
        return int(np.sum(np.linalg.eigvalsh(self.gram) < 0))

    def exterior_coercivity(self, radius):
        """Least ratio ``E[U] / |U|^2`` over ``U`` supported in ``r >= radius``."""
        from scipy.linalg import eigh

        keep = self.pencil.grid.r >= radius
        idx = np.concatenate([np.flatnonzero(keep), self.pencil.n + np.flatnonzero(keep)])
        g = self.gram[np.ix_(idx, idx)]
        p = self.positive[np.ix_(idx, idx)]
        return float(eigh(g, p, eigvals_only=True)[0])


def _energy_blocks(pencil, flat_k):
    h = pencil.grid.h
    n = pencil.n
    K = pencil.K.toarray()
    gram = np.zeros((2 * n, 2 * n), dtype=complex)
    gram[:n, :n] = h * K
    gram[n:, n:] = -h * np.diag(pencil.m)
    pos = np.zeros_like(gram)
    pos[:n, :n] = h * flat_k
    pos[n:, n:] = h * np.eye(n)
    return gram, pos


def energy_form(pencil):
    flat = pencil.flat().K.toarray()
    gram, pos = _energy_blocks(pencil, flat)
    return EnergyForm(gram=gram, positive=pos, pencil=pencil)


def positive_gram(pencil):
    """``h blockdiag(K_flat, I)``: the Hilbert norm the energy space carries."""
    n = pencil.n
    flat = pencil.flat().K
    return sp.block_diag([pencil.grid.h * flat, pencil.grid.h * sp.identity(n)], format="csc")


# ---------------------------------------------------------------------------
# dyadic norms

NORM_KINDS = ("LE", "LE1", "LEstar", "H1dot", "L2", "energy")


@dataclass(frozen=True)
class AnnulusValue:
    k: int
    lo: float
    hi: float
    value: float


@dataclass(frozen=True)
class NormReport:
    kind: str
    value: float
    annuli: tuple

    def to_dict(self):
        return {
            "kind": self.kind,
            "value": self.value,
            "annuli": [{"k": a.k, "r_lo": a.lo, "r_hi": a.hi, "value": a.value} for a in self.annuli],
        }


@dataclass(frozen=True)
class NormFunctional:
    """A dyadic norm on the grid for data of angular mode ``ell``.

    ``omega`` switches ``LE1`` to its frequency version, which adds
    ``max(|omega|, h) u`` to the components.
    """

    kind: str
    grid: RadialGrid
    ell: int = 0
    omega: complex | None = None

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ConfigError(f"unknown norm kind {self.kind!r}", "kind")

    @property
    def partition(self):
        return dyadic_intervals(self.grid.r_max)

    def weights(self):
        sign = {"LE": -0.5, "LE1": -0.5, "LEstar": 0.5}.get(self.kind, 0.0)
        return [annulus_weight(k) ** sign for k, _, _ in self.partition]

    # ---- pointwise densities --------------------------------------------
    def _node_masks(self, r):
        return [(r >= lo) & (r < hi) for _, lo, hi in self.partition]

    def _gradient_density(self, v):
        """|grad u|^2 r^2 split into half-point and node contributions."""
        g = self.grid
        v = np.asarray(v)
        pad = np.zeros(v.shape[:-1] + (g.n + 2,), dtype=v.dtype)
        pad[..., 1:-1] = v
        dv = np.diff(pad, axis=-1) / g.h
        vh = 0.5 * (pad[..., 1:] + pad[..., :-1]) / g.r_half
        radial = np.abs(dv - vh) ** 2
        angular = self.ell * (self.ell + 1) * np.abs(v) ** 2 / g.r**2
        return radial, angular

    def _annulus_squares(self, v, w=None):
        """Squared L^2 mass per annulus for each time slice (shape (..., K))."""
        g = self.grid
        v = np.asarray(v)
        r, rh = g.r, g.r_half
        node_m = self._node_masks(r)
        half_m = self._node_masks(rh)
        parts = []
        kind = self.kind
        for nm, hm in zip(node_m, half_m):
            if kind in ("LE", "LEstar", "L2"):
                s = np.sum(np.abs(v[..., nm]) ** 2, axis=-1)
            else:
                radial, angular = self._gradient_density(v)
                s = np.sum(radial[..., hm], axis=-1) + np.sum(angular[..., nm], axis=-1)
                if w is not None:
                    s = s + np.sum(np.abs(np.asarray(w)[..., nm]) ** 2, axis=-1)
                if kind == "LE1":
                    s = s + np.sum(np.abs(v[..., nm]) ** 2 / (1 + r[nm] ** 2), axis=-1)
                    if self.omega is not None:
                        wt = max(abs(self.omega), g.h)
                        s = s + wt**2 * np.sum(np.abs(v[..., nm]) ** 2, axis=-1)
            parts.append(g.h * s)
        return np.stack(parts, axis=-1)

    def _exact_squares(self, v, w):
        g = self.grid
        v = np.atleast_2d(v)
        dv = (difference(g) @ v.T).T
        s = np.sum(np.abs(dv) ** 2, axis=-1) + self.ell * (self.ell + 1) * np.sum(np.abs(v) ** 2 / g.r**2, axis=-1)
        if self.kind == "energy" and w is not None:
            s = s + np.sum(np.abs(np.atleast_2d(w)) ** 2, axis=-1)
        return g.h * s

    def report(self, v, w=None, dt=None):
        """Evaluate on a spatial sample (1D) or a time series (2D, uniform ``dt``)."""
        v = np.asarray(v)
        if v.shape[-1] != self.grid.n:
            raise ValueError(f"field has {v.shape[-1]} samples, grid has {self.grid.n}")
        if w is not None and np.shape(w) != v.shape:
            raise ValueError("velocity shape does not match field")
        sq = self._annulus_squares(v, w)
        exact = None
        if self.kind in ("H1dot", "energy"):
            # totals use the exact quadratic form; annuli use pointwise densities
            total = np.atleast_1d(self._exact_squares(v, w))
        if v.ndim == 2:
            if dt is None:
                raise ValueError("spacetime samples need a time step")
            if self.kind in ("H1dot", "energy"):
                i = int(np.argmax(total))
                sq, exact = sq[i], total[i]
            else:
                sq = trapezoid(sq, dx=dt, axis=0) if len(sq) > 1 else sq[0] * 0.0
        elif v.ndim != 1:
            raise ValueError("field must be 1D or 2D")
        elif self.kind in ("H1dot", "energy"):
            exact = total[0]
        per = np.sqrt(np.maximum(sq, 0.0))
        wts = self.weights()
        vals = [float(x * wt) for x, wt in zip(per, wts)]
        if self.kind in ("LE", "LE1"):
            value = max(vals)
        elif self.kind == "LEstar":
            value = sum(vals)
        elif exact is not None:
            value = float(np.sqrt(exact))
        else:
            value = float(np.sqrt(np.sum(sq)))
        annuli = tuple(AnnulusValue(k, lo, hi, val) for (k, lo, hi), val in zip(self.partition, vals))
        return NormReport(kind=self.kind, value=float(value), annuli=annuli)


def norm(functional, v, w=None, dt=None):
    """Value of ``functional`` on the sampled field (see ``NormFunctional.report``)."""
    return functional.report(v, w=w, dt=dt).value


def l1_l2(grid, v, dt, r_min=0.0, r_max=np.inf):
    """``L^1_t L^2_x`` norm restricted to ``r_min <= r < r_max``."""
    mask = (grid.r >= r_min) & (grid.r < r_max)
    per_t = np.sqrt(grid.h * np.sum(np.abs(np.asarray(v)[..., mask]) ** 2, axis=-1))
    return float(trapezoid(per_t, dx=dt)) if per_t.size > 1 else 0.0


def h1dot(pencil_or_grid, v, ell=0):
    """``sqrt(h v^* K_flat v)``, the homogeneous Sobolev norm of ``u = v / r``."""
    grid = pencil_or_grid.grid if isinstance(pencil_or_grid, Pencil) else pencil_or_grid
    d = difference(grid)
    r = grid.r
    v = np.asarray(v)
    val = np.sum(np.abs(d @ v) ** 2) + ell * (ell + 1) * np.sum(np.abs(v) ** 2 / r**2)
    return float(np.sqrt(grid.h * val))


def inner(grid, a, b):
    return complex(grid.h * np.vdot(b, a))


__all__ = [
    "RadialGrid", "Pencil", "Hamiltonian", "EnergyForm", "NormFunctional", "NormReport",
    "assemble_pencil", "assemble_hamiltonian", "energy_form", "positive_gram", "norm", "l1_l2",
    "h1dot", "inner", "toy_pencil", "difference", "averaging", "norm_est", "NORM_KINDS",
]
