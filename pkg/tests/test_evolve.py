import math

import numpy as np
import pytest

from ledlab import ConfigError, NumericError, PreconditionError
from ledlab.disc import RadialGrid, assemble_hamiltonian, assemble_pencil
from ledlab.evolve import classify_dichotomy, decay_report, evolve, flow_matrices, one_step
from ledlab.model import MINKOWSKI, AFModel, CoefficientField, Kind
from ledlab.spectral import eig_lower_half


def well(rate=0.0):
    mod = "sinusoidal" if rate else "none"
    field = CoefficientField(kind=Kind.POTENTIAL, profile="bump", amplitude=-8.0, center=0.0, width=1 / 3,
                             modulation=mod, rate=rate)
    return AFModel(fields=(field,), r0=2.0)


def metric_bump(amplitude=0.05, rate=0.0):
    mod = "sinusoidal" if rate else "none"
    field = CoefficientField(kind=Kind.METRIC_TT, profile="bump", amplitude=amplitude, center=2.0, width=1.0,
                             modulation=mod, rate=rate)
    return AFModel(fields=(field,), r0=4.0)


def gaussian_state(grid, center, width=1.0, carrier=0.0, outgoing=False):
    r = grid.r
    v = np.exp(-(((r - center) / width) ** 2)) * (np.cos(carrier * r) if carrier else 1.0)
    w = -np.gradient(v, grid.h) if outgoing else np.zeros_like(v)
    return np.concatenate([v, w]).astype(complex)


def test_flat_matches_dalembert():
    # v = r u solves the 1d wave equation; the pulse stays away from r = 0
    errs = []
    for n in (799, 1599):
        g = RadialGrid.covering(40.0, n)
        tr = evolve(MINKOWSKI, g, 0, gaussian_state(g, 20.0), T=5.0, store_every=10**6)
        exact = 0.5 * (np.exp(-((g.r - 25.0) ** 2)) + np.exp(-((g.r - 15.0) ** 2)))
        errs.append(np.abs(tr.final_state()[: g.n] - exact).max())
    assert errs[1] < 5e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


def magnetic_bump():
    fields = metric_bump(0.2).fields + (
        CoefficientField(kind=Kind.MAGNETIC_T, profile="bump", amplitude=0.3, center=3.0, width=1.0),
    )
    return AFModel(fields=fields, r0=4.0)


@pytest.mark.parametrize("model", [MINKOWSKI, magnetic_bump()], ids=["flat", "magnetic"])
def test_energy_drift(model):
    g = RadialGrid.covering(20.0, 319)
    tr = evolve(model, g, 0, gaussian_state(g, 3.0), T=1000 * 0.5 * g.h)
    assert len(tr.times) == 1001
    assert abs(tr.energy[-1] - tr.energy[0]) <= 1e-6 * abs(tr.energy[0])


def test_energy_drift_growing_mode_is_roundoff():
    # the form is indefinite here; drift is measured against the largest state
    g = RadialGrid.covering(20.0, 319)
    tr = evolve(well(), g, 0, gaussian_state(g, 3.0), T=1000 * 0.5 * g.h)
    assert tr.du_series()[-1] > 1e4 * tr.du_series()[0]
    assert np.abs(tr.energy - tr.energy[0]).max() <= 1e-6 * tr.du_series().max() ** 2


def test_eigenmode_growth_rate():
    g = RadialGrid.covering(12.0, 191)
    rep = eig_lower_half(assemble_hamiltonian(assemble_pencil(well(), g)))
    mu = -rep.eigenvalues[0].imag
    tr = evolve(well(), g, 0, rep.eigenvectors[:, 0], T=20.0)
    rate = np.polyfit(tr.times, np.log(tr.du_series()), 1)[0]
    assert rate == pytest.approx(mu, rel=0.02)


def test_generic_data_grows_at_mode_rate():
    g = RadialGrid.covering(60.0, 959)
    tr = evolve(well(), g, 0, gaussian_state(g, 1.0), T=60.0)
    verdict = classify_dichotomy(tr, alpha_hint=0.417)
    assert verdict.kind == "exponential_growth"
    assert verdict.rate == pytest.approx(0.41715, rel=0.05)


def test_slow_energy_drift_is_linear_in_rate():
    g = RadialGrid.covering(40.0, 399)
    U0 = gaussian_state(g, 3.0)
    ratios = []
    for eps in (0.01, 0.02, 0.04):
        tr = evolve(metric_bump(0.2, eps), g, 0, U0, T=20.0)
        drift = abs(tr.energy[-1] - tr.energy[0])
        ratios.append(drift / (eps * tr.le1(20.0) ** 2))
    assert max(ratios) / min(ratios) < 1.5
    assert max(ratios) < 10.0


def test_forward_backward_roundtrip():
    g = RadialGrid.covering(20.0, 159)
    model = metric_bump(0.2, 0.05)
    U0 = gaussian_state(g, 4.0)
    dt = 0.5 * g.h
    U1 = one_step(model, g, 0, 0.0, 5.0, dt, X=U0[:, None])
    U2 = one_step(model, g, 0, 5.0, 0.0, -dt, X=U1)[:, 0]
    assert np.abs(U2 - U0).max() <= 1e-6


def test_propagator_composition():
    g = RadialGrid.covering(16.0, 127)
    model = metric_bump(0.2, 0.05)
    dt = 0.5 * g.h
    a = one_step(model, g, 0, 0.0, 1.0, dt)
    b = one_step(model, g, 0, 1.0, 2.0, dt)
    ab = one_step(model, g, 0, 0.0, 2.0, dt)
    assert np.abs(b @ a - ab).max() <= 1e-8


def test_evolve_agrees_with_propagator():
    g = RadialGrid.covering(16.0, 127)
    model = metric_bump(0.2, 0.05)
    U0 = gaussian_state(g, 3.0)
    dt = 0.5 * g.h
    tr = evolve(model, g, 0, U0, T=2.0, dt=dt)
    ref = one_step(model, g, 0, 0.0, 2.0, dt) @ U0
    assert np.abs(tr.final_state() - ref).max() <= 1e-10


def test_forcing_superposes():
    g = RadialGrid.covering(20.0, 159)
    model = metric_bump(0.1)
    U0 = gaussian_state(g, 3.0)
    bump = np.exp(-((g.r - 5.0) ** 2))

    def f(t):
        return math.sin(2 * t) * bump

    full = evolve(model, g, 0, U0, f=f, T=4.0)
    free = evolve(model, g, 0, U0, T=4.0)
    driven = evolve(model, g, 0, np.zeros(2 * g.n), f=f, T=4.0)
    assert np.abs(full.final_state() - free.final_state() - driven.final_state()).max() < 1e-12
    assert full.forcing_norm(4.0) > 0
    assert free.forcing_norm(4.0) == 0


def test_forced_energy_balance():
    # midpoint forcing gives E_{m+1} - E_m = -2 dt Re<f, w_mid> with w_mid the mean velocity
    g = RadialGrid.covering(20.0, 159)
    bump = np.exp(-((g.r - 5.0) ** 2))
    dt = 0.5 * g.h
    tr = evolve(MINKOWSKI, g, 0, np.zeros(2 * g.n), f=lambda t: math.cos(t) * bump, T=200 * dt, store_every=1)
    n = g.n
    for m in (10, 100, 199):
        w_mid = 0.5 * (tr.states[m][n:] + tr.states[m + 1][n:])
        f_mid = math.cos((m + 0.5) * dt) * bump
        predicted = 2 * dt * g.h * np.vdot(f_mid, w_mid).real
        assert tr.energy[m + 1] - tr.energy[m] == pytest.approx(predicted, rel=1e-8, abs=1e-14)


def test_sponge_reflection_below_one_percent():
    g = RadialGrid.covering(40.0, 399)
    U0 = gaussian_state(g, 10.0, width=2.0, carrier=3.0, outgoing=True)
    tr = evolve(MINKOWSKI, g, 0, U0, T=80.0, sponge=True)
    late = max(tr.du_norm(t) for t in (60.0, 70.0, 80.0))
    assert late / tr.du_norm(0.0) < 0.01


def test_two_point_ratio_stable_over_horizons():
    g = RadialGrid.covering(100.0, 999)
    tr = evolve(metric_bump(0.05), g, 0, gaussian_state(g, 3.0), T=80.0)
    rep = decay_report(tr, (10, 20, 40, 80), classify=False)
    vals = list(rep.two_point_ratio.values())
    assert max(vals) / min(vals) < 2.0
    assert rep.annuli >= 6
    assert set(rep.to_dict()) >= {"le_ratio", "high_mourre_ratio", "classification"}


def test_flat_classified_bounded():
    g = RadialGrid.covering(60.0, 479)
    tr = evolve(MINKOWSKI, g, 0, gaussian_state(g, 3.0), T=100.0)
    verdict = classify_dichotomy(tr)
    assert verdict.kind == "bounded_dispersive"
    assert verdict.le_last_ratio is not None and verdict.le_last_ratio < 10


def test_classify_needs_long_run():
    g = RadialGrid.covering(20.0, 159)
    tr = evolve(MINKOWSKI, g, 0, gaussian_state(g, 3.0), T=10.0)
    with pytest.raises(PreconditionError):
        classify_dichotomy(tr)
    with pytest.raises(PreconditionError):
        decay_report(tr, (20.0,))


def test_step_constraints():
    g = RadialGrid.covering(20.0, 159)
    U0 = gaussian_state(g, 3.0)
    with pytest.raises(ConfigError):
        evolve(MINKOWSKI, g, 0, U0, T=1.0, dt=g.h)
    with pytest.raises(ConfigError):
        evolve(metric_bump(0.1, rate=20.0), g, 0, U0, T=1.0, dt=0.4 * g.h)
    bad = U0.copy()
    bad[5] = np.nan
    with pytest.raises(NumericError) as info:
        evolve(MINKOWSKI, g, 0, bad, T=1.0)
    assert info.value.step == 1


def test_flow_stationary_reference_matches():
    fs = flow_matrices(well(), RadialGrid.covering(12.0, 191), 0, 1.0, 3)
    assert fs.epsilon <= 1e-8
    assert fs.kappas == [1, 1, 1, 1]
    F, G = fs.cumulative("F"), fs.cumulative("G")
    assert np.array_equal(F[0], np.eye(382)) and np.array_equal(G[0], np.eye(382))


def test_flow_deviation_linear_in_rate():
    g = RadialGrid.covering(12.0, 191)
    eps = [0.02, 0.04]
    dev = [flow_matrices(well(e), g, 0, 1.0, 1).epsilon for e in eps]
    assert dev[1] / dev[0] == pytest.approx(2.0, rel=0.1)


def test_flow_size_limit():
    with pytest.raises(PreconditionError):
        flow_matrices(well(), RadialGrid.covering(12.0, 300), 0, 1.0, 1)


def test_energy_weighting_is_isometric():
    g = RadialGrid.covering(12.0, 191)
    fs = flow_matrices(well(), g, 0, 1.0, 1)
    from ledlab.disc import positive_gram

    pos = positive_gram(assemble_pencil(well(), g)).toarray()
    x = np.random.default_rng(0).standard_normal(2 * g.n)
    assert np.linalg.norm(fs.weight @ x) ** 2 == pytest.approx(np.vdot(x, pos @ x).real, rel=1e-10)


def test_norm_rows_track_partial_le1():
    g = RadialGrid.covering(20.0, 159)
    tr = evolve(MINKOWSKI, g, 0, gaussian_state(g, 3.0), T=10.0)
    rows = tr.norm_rows()
    assert len(rows) == len(tr.times) and list(rows[0]) == ["t", "E", "LE1_partial", "max_abs_U"]
    for T in (2.0, 6.0, 10.0):
        assert rows[tr.step_index(T)]["LE1_partial"] == pytest.approx(tr.le1(T), rel=1e-12)
    assert rows[0]["max_abs_U"] == pytest.approx(1.0, abs=1e-3)
