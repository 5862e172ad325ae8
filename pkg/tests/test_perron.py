import math
import time

import numpy as np
import pytest

from ledlab import DichotomyAbsent, EpsilonTooLarge, HorizonTooShort, PreconditionError
from ledlab.perron import (
    DichotomyProblem,
    certify_trichotomy,
    contraction_factor,
    decay_samples,
    perron_project,
    perron_trichotomy,
    range_basis,
    subspace_distance,
    verify_discrete_trichotomy,
)

ROT = np.array([[math.cos(1.0), -math.sin(1.0)], [math.sin(1.0), math.cos(1.0)]])
G2 = np.diag([0.5, 1.0])
Q2 = np.diag([1.0, 0.0])


def toy2(eps, N=200):
    return DichotomyProblem([G2] * N, [G2 @ (np.eye(2) + eps * ROT)] * N, Q2, np.zeros((2, 2)))


def dominant_subspace(A, k, iters=200, seed=0):
    """Brute-force QR iteration for the ``k`` dominant directions of ``A``."""
    X = np.random.default_rng(seed).standard_normal((A.shape[0], k))
    for _ in range(iters):
        X = np.linalg.qr(A @ X)[0]
    return X


def test_certify_diagonal():
    steps = [np.diag([math.exp(-1), math.exp(0.1)])] * 12
    prob = DichotomyProblem(steps, steps, np.diag([1.0, 0.0]), np.zeros((2, 2)))
    C, gamma, gamma0 = certify_trichotomy(prob)
    assert gamma == pytest.approx(1.0, abs=1e-10)
    assert gamma0 == pytest.approx(0.1, abs=1e-10)
    assert C == pytest.approx(1.0, abs=1e-10)


def test_certify_conjugated():
    S = np.array([[1.0, 2.0], [0.5, 3.0]])
    Si = np.linalg.inv(S)
    step = S @ np.diag([math.exp(-1), math.exp(0.1)]) @ Si
    prob = DichotomyProblem([step] * 20, [step] * 20, S @ np.diag([1.0, 0]) @ Si, np.zeros((2, 2)))
    C, gamma, gamma0 = certify_trichotomy(prob)
    assert gamma == pytest.approx(1.0, abs=1e-8)
    assert gamma0 == pytest.approx(0.1, abs=1e-8)
    assert C <= np.linalg.cond(S)


def test_certify_rejects_short_or_flat():
    steps = [np.eye(2)] * 12
    with pytest.raises(DichotomyAbsent):
        certify_trichotomy(DichotomyProblem(steps, steps, np.diag([1.0, 0]), np.zeros((2, 2))))
    with pytest.raises(PreconditionError):
        certify_trichotomy(toy2(0.0, N=5))


def test_problem_validation():
    with pytest.raises(PreconditionError):
        DichotomyProblem([np.zeros((2, 2))], [np.eye(2)], Q2, np.zeros((2, 2)))
    with pytest.raises(PreconditionError):
        DichotomyProblem([G2], [G2], np.array([[1.0, 1.0], [0.0, 0.5]]), np.zeros((2, 2)))
    with pytest.raises(PreconditionError):
        DichotomyProblem([G2], [G2], Q2, Q2)


def test_unperturbed_is_fixed_at_once():
    prob = toy2(0.0)
    certify_trichotomy(prob)
    res = perron_project(prob.g_steps, prob.f_steps, Q2, 1.0, math.log(2))
    assert res.iterations == 1
    assert np.array_equal(res.P, Q2.astype(complex))
    tri = perron_trichotomy(toy2(0.0))
    assert np.array_equal(tri.p_minus, Q2.astype(complex))
    assert np.abs(tri.p_plus).max() == 0
    assert np.array_equal(tri.p_zero, np.diag([0.0, 1.0]).astype(complex))


def test_toy_matches_qr_oracle():
    eps = 0.01
    res = perron_trichotomy(toy2(eps))
    F = G2 @ (np.eye(2) + eps * ROT)
    v = dominant_subspace(np.linalg.inv(F), 1)[:, 0]
    oracle = np.outer(v, [1.0, 0.0]) / v[0]  # range: stable line, kernel: e2
    assert np.abs(res.p_minus - oracle).max() <= 1e-6


def test_epsilon_too_large():
    with pytest.raises(EpsilonTooLarge) as info:
        perron_trichotomy(toy2(0.4))
    assert info.value.factor >= 0.5


def test_contraction_factor_formula():
    # geometric sums written out term by term
    eps, C, Cb, g, w = 0.02, 1.5, 2.0, 0.7, 0.3
    fwd = sum(C * math.exp(-(g - w) * k) for k in range(2000))
    bwd = sum(Cb * math.exp(-(g + w) * k) for k in range(1, 2000))
    assert contraction_factor(eps, C, Cb, g, w) == pytest.approx(eps * math.exp(w) * (fwd + bwd), rel=1e-12)
    assert contraction_factor(eps, C, Cb, g, g) == math.inf


def test_identities_and_lipschitz():
    ratios = []
    for eps in (0.001, 0.005, 0.01, 0.02):
        prob = toy2(eps)
        res = perron_trichotomy(prob)
        P = res.p_minus
        assert np.abs(Q2 @ P - Q2).max() <= 1e-10
        assert np.abs(P @ P - P).max() <= 1e-10
        assert np.abs(P @ (np.eye(2) - Q2)).max() <= 1e-10
        assert res.checks["residual"] <= 1e-9
        assert res.checks["flow"] <= 1e-8
        assert res.checks["commute"] <= 1e-6
        ratios.append(np.linalg.norm(P - Q2, 2) / eps)
        assert abs(res.gamma - math.log(2)) + abs(res.gamma0) <= 10 * eps
    assert max(ratios) / min(ratios) < 2.0


def test_three_way_split_against_invariant_subspaces():
    rng = np.random.default_rng(3)
    g = np.diag([math.exp(-1), 1.0, math.exp(1)])
    eps = 0.02
    E = rng.standard_normal((3, 3))
    E *= eps / np.linalg.norm(E, 2)
    f = g + E
    N = 80
    prob = DichotomyProblem([g] * N, [f] * N, np.diag([1.0, 0, 0]), np.diag([0, 0, 1.0]))
    res = perron_trichotomy(prob)
    ranks = [int(round(np.trace(p).real)) for p in (res.p_minus, res.p_zero, res.p_plus)]
    assert ranks == [1, 1, 1]
    stable = dominant_subspace(np.linalg.inv(f), 1)
    center_stable = dominant_subspace(np.linalg.inv(f), 2)
    assert subspace_distance(range_basis(res.p_minus, 1), stable) <= 10 * eps
    assert subspace_distance(range_basis(np.eye(3) - res.p_plus, 2), center_stable) <= 10 * eps
    assert res.checks["commute"] <= 1e-6


def test_horizon_too_short():
    prob = toy2(0.02, N=12)
    with pytest.raises(HorizonTooShort):
        perron_trichotomy(prob, tail_tol=1e-12)


def test_decay_of_stable_solutions():
    res = perron_trichotomy(toy2(0.01))
    F = [G2 @ (np.eye(2) + 0.01 * ROT)] * 60
    assert decay_samples(F, res.p_minus, res.gamma) <= res.C * (1 + 1e-9)


def test_verify_diagonal_exact():
    steps = [np.diag([math.exp(-1), 1.0, math.exp(1)])] * 15
    table = verify_discrete_trichotomy(steps, np.diag([1.0, 0, 0]), np.diag([0, 0, 1.0]), np.arange(16) * 0.5)
    assert table.alpha == pytest.approx(2.0, abs=1e-10)
    assert table.alpha0 == pytest.approx(0.0, abs=1e-10)
    assert table.C == pytest.approx(1.0, abs=1e-10)


def test_runtime_small_problem():
    rng = np.random.default_rng(1)
    lam = np.exp(np.repeat([-1.0, 0.0, 1.0], [5, 6, 5]))
    g = np.diag(lam)
    E = rng.standard_normal((16, 16))
    E *= 0.01 / np.linalg.norm(E, 2)
    prob = DichotomyProblem([g] * 400, [g + E] * 400, np.diag((lam < 0.9) * 1.0), np.diag((lam > 1.1) * 1.0))
    start = time.perf_counter()
    res = perron_trichotomy(prob)
    assert time.perf_counter() - start < 1.0 * 3  # generous on shared machines
    assert res.checks["commute"] <= 1e-6


@pytest.mark.slow
def test_stationary_wave_flow_matches_contour_projectors():
    from ledlab.disc import RadialGrid, assemble_hamiltonian, assemble_pencil, energy_form
    from ledlab.evolve import flow_matrices
    from ledlab.model import AFModel, CoefficientField, Kind
    from ledlab.spectral import trichotomy_static

    model = AFModel(fields=(CoefficientField(kind=Kind.POTENTIAL, profile="bump", amplitude=-8.0, center=0.0,
                                             width=1 / 3),), r0=2.0)
    grid = RadialGrid.covering(12.0, 191)
    flow = flow_matrices(model, grid, 0, 1.0, 12)
    prob = DichotomyProblem.from_flow(flow)
    pencil = assemble_pencil(model, grid)
    static = trichotomy_static(assemble_hamiltonian(pencil), energy_form(pencil))
    _, gamma, _ = certify_trichotomy(prob)
    assert gamma == pytest.approx(static.alpha, rel=0.1)
    res = perron_trichotomy(prob)
    R = flow.weight
    back = lambda P: np.linalg.solve(R, P @ R)  # noqa: E731
    # growing modes sit in the lower half-plane, decaying ones in the upper
    assert np.abs(back(res.p_minus) - static.projectors.p_plus).max() <= 1e-6
    assert np.abs(back(res.p_plus) - static.projectors.p_minus).max() <= 1e-6
