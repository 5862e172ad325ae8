import math

import numpy as np
import pytest

from ledlab.errors import ConfigError
from ledlab.model import (
    MINKOWSKI,
    AFModel,
    CoefficientField,
    FrequencyEnvelope,
    af_norm,
    slow_variation,
    symmetry_defect,
    trapping_time,
)

# Frozen from a 200001-point-per-annulus sampling of <r>^2 (1+r^2)^{-3/2}
# over the ball and annuli k = 0..40.
TAIL_ORACLE = 2.6457513110645907


def tail_potential(amp=1.0, imag=0.0):
    return CoefficientField("potential", "tail", amplitude=amp, power=3.0, imaginary_amplitude=imag)


def bump(kind, amp, center=1.0, width=0.25, **kw):
    return CoefficientField(kind, "bump", amplitude=amp, center=center, width=width, **kw)


def test_minkowski_norm_is_zero():
    assert af_norm(MINKOWSKI) == 0.0


def test_tail_potential_matches_dense_oracle():
    model = AFModel(fields=[tail_potential()], r0=2.0, m0=10.0)
    assert af_norm(model) == pytest.approx(TAIL_ORACLE, rel=1e-3)


def test_independent_oracle_recomputed():
    total = 0.0
    edges = [(0.0, 1.0)] + [(2.0**k, 2.0 ** (k + 1)) for k in range(41)]
    for lo, hi in edges:
        r = np.linspace(lo, hi, 20001)
        total += np.max((1 + r * r) ** -0.5)
    assert total == pytest.approx(TAIL_ORACLE, rel=1e-6)


def test_region_beyond_support_vanishes():
    model = AFModel(fields=[bump("potential", 3.0), bump("metric_rr", 0.2, center=2.0)], r0=4.0, m0=100)
    assert af_norm(model, 2.0 + 0.75 + 1e-9) == 0.0
    assert af_norm(model, 1.0) > 0


def test_region_monotone():
    model = AFModel(fields=[tail_potential(), bump("metric_tt", 0.5, center=3.0, width=1.0)], r0=2.0, m0=100)
    values = [af_norm(model, R) for R in np.linspace(0.0, 12.0, 25)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_profile_derivatives_match_finite_differences():
    for f in [bump("potential", 1.0, center=2.0, width=0.5), tail_potential()]:
        r = np.linspace(0.2, 3.4, 50)
        h = 1e-5
        f0, f1, f2 = f.shape(r)
        assert np.allclose(f1, (f.shape(r + h)[0] - f.shape(r - h)[0]) / (2 * h), atol=1e-6)
        assert np.allclose(f2, (f.shape(r + h)[1] - f.shape(r - h)[1]) / (2 * h), atol=1e-5)


def test_bump_compact_support():
    f = bump("potential", 1.0, center=2.0, width=0.5)
    r = np.linspace(3.5, 50, 1000)
    assert not np.any(np.concatenate(f.shape(r)))


def test_bad_profile_is_config_error():
    with pytest.raises(ConfigError):
        CoefficientField("potential", "gaussian")
    with pytest.raises(ConfigError):
        CoefficientField("metric_rr", "bump", amplitude=1.0, imaginary_amplitude=0.1)
    with pytest.raises(ValueError):
        CoefficientField("curvature", "bump")


def test_minkowski_sojourn_at_most_diameter():
    rep = trapping_time(AFModel(r0=2.0), n_rays=32)
    assert rep.t0 <= 4.0 + 1e-8
    assert rep.max_sojourn <= 4.0 + 1e-8
    assert not rep.possibly_trapping
    assert rep.t0 >= rep.max_sojourn - 1e-12


def test_small_bump_close_to_diameter():
    model = AFModel(fields=[bump("metric_tt", 0.01)], r0=2.0, m0=10)
    rep = trapping_time(model, n_rays=32)
    assert abs(rep.t0 - 4.0) <= 0.4


@pytest.mark.slow
def test_strong_bump_flagged():
    model = AFModel(fields=[bump("metric_tt", 5.0)], r0=2.0, m0=100)
    rep = trapping_time(model, n_rays=32, cap=20.0)
    assert rep.possibly_trapping
    assert not rep.escaped.all()


def test_slow_variation_stationary_zero():
    model = AFModel(fields=[bump("potential", 2.0)], r0=2.0, m0=10)
    assert slow_variation(model) == 0.0


def _fd_slow(field, dt=1e-5):
    """Dense-sampling AF norm of a centered time difference of a potential field."""
    total = 0.0
    edges = [(0.0, 1.0)] + [(2.0**k, 2.0 ** (k + 1)) for k in range(41)]
    for lo, hi in edges:
        r = np.linspace(lo, hi, 4001)
        dv = (field.value(r, dt) - field.value(r, -dt)) / (2 * dt)
        total += np.max(np.abs((1 + r * r) * dv))
    return total


def test_slow_variation_finite_difference():
    f = bump("potential", 2.0, center=0.0, width=1.0, rate=0.05, modulation="sinusoidal")
    model = AFModel(fields=[f], r0=2.0, m0=100)
    got = slow_variation(model)
    assert got == pytest.approx(_fd_slow(f), rel=1e-3)
    assert got == pytest.approx(0.5 * 0.05 * af_norm(AFModel(fields=[bump("potential", 2.0, center=0.0, width=1.0)])), rel=1e-9)


def test_slow_variation_subadditive_and_homogeneous():
    f = bump("potential", 2.0, rate=0.05, modulation="sinusoidal")
    g = bump("metric_rr", 0.3, center=2.0, rate=0.02, modulation="sinusoidal")
    both = slow_variation(AFModel(fields=[f, g], r0=4.0, m0=100))
    assert both <= slow_variation(AFModel(fields=[f], r0=4)) + slow_variation(AFModel(fields=[g], r0=4)) + 1e-12
    double = slow_variation(AFModel(fields=[f.scaled(2.0)], r0=4))
    assert double == pytest.approx(2 * slow_variation(AFModel(fields=[f], r0=4)), rel=1e-12)


def test_symmetry_defect():
    assert symmetry_defect(AFModel(fields=[tail_potential()])) == 0.0
    model = AFModel(fields=[tail_potential(amp=1.0, imag=0.2)], r0=2, m0=10)
    assert symmetry_defect(model) == pytest.approx(0.2 * TAIL_ORACLE, rel=1e-3)
    doubled = AFModel(fields=[tail_potential(amp=1.0, imag=0.4)], r0=2, m0=10)
    assert symmetry_defect(doubled) == pytest.approx(2 * symmetry_defect(model), rel=1e-12)


def test_magnetic_norm_weight():
    # <r> A_r for a tail of power 3 decays like <r>^-2, so the norm is finite
    model = AFModel(fields=[CoefficientField("magnetic_r", "tail", amplitude=0.1, power=3.0)])
    assert 0 < af_norm(model) < 1.0


def test_envelope_from_model_is_admissible():
    model = AFModel(fields=[bump("potential", 0.0002, center=3.0, width=0.5),
                            CoefficientField("potential", "tail", amplitude=0.0001, power=3.0)], r0=2.0, m0=10)
    env = FrequencyEnvelope.from_model(model)
    assert env.k_start == 1
    assert env.violations() == []
    assert sum(env.values) >= af_norm(model, 2.0) - 1e-12


def test_envelope_detects_fast_variation():
    env = FrequencyEnvelope(k_start=1, values=(0.01, 0.001, 0.01))
    assert any("slow variation" in v for v in env.violations())
    env = FrequencyEnvelope(k_start=1, values=(0.1, 0.1))
    assert any("summability" in v for v in env.violations())


def test_invariants_flag_bad_models():
    bad = AFModel(fields=[bump("metric_tt", -1.5)], r0=2, m0=100)
    assert any("time-like" in v for v in bad.check_invariants())
    bad = AFModel(fields=[bump("metric_rr", -1.5)], r0=2, m0=100)
    assert any("space-like" in v for v in bad.check_invariants())
    bad = AFModel(fields=[tail_potential()], r0=2, m0=0.5)
    assert any("exceeds m0" in v for v in bad.check_invariants())
    assert AFModel(fields=[bump("potential", -8.0, center=0.0, width=1.0 / 3)], r0=2.0, m0=200).check_invariants() == []


def test_nonpositive_radius_rejected():
    with pytest.raises(ConfigError):
        AFModel(r0=0.0)
    assert math.isinf(CoefficientField("potential", "tail", power=2).support)
