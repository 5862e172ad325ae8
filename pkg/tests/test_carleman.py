import math

import numpy as np
import pytest

from ledlab import ConfigError, ConstructionError, PreconditionError
from ledlab.carleman import (
    CarlemanWeight,
    Family,
    HarmonicTest,
    SpacetimeTest,
    build_weight,
    bump,
    bump_tests,
    carleman_ratio,
    medium_band_check,
    packet_tests,
)
from ledlab.disc import RadialGrid
from ledlab.model import MINKOWSKI, AFModel

FLAT = AFModel(r0=3.0)


def test_interior_weight_at_origin():
    w = build_weight("interior", 4, sigma=4)
    d = w.derivs(0.0)
    assert d[1][0] == 0.0
    assert d[2][0] == 4.0


def test_convex_weight_ratio():
    w = build_weight("exterior_convex", 8)
    s = np.linspace(1, 10, 200)
    d = w.derivs(s)
    assert np.allclose(d[2] / d[1], 1 / (1 + s), rtol=1e-14)
    assert np.all(d[2] / d[1] <= 0.5)


def test_cut_weight_flat_beyond_transition():
    w = build_weight("exterior_cut", 8, R=32.0)
    s = np.linspace(math.log(32) + 1 + 1e-9, 12, 100)
    d = w.derivs(s)
    assert np.all(d[1] == 0)
    assert np.all(d[0] == d[0][0])
    inside = w.derivs(np.linspace(1, math.log(32), 50))
    assert np.array_equal(inside, build_weight("exterior_convex", 8).derivs(np.linspace(1, math.log(32), 50)))


@pytest.mark.parametrize("family,kw,span", [
    ("exterior_convex", {}, (0.2, 6.0)),
    ("exterior_cut", {"R": 20.0}, (0.2, 6.0)),
    ("interior", {"sigma": 4.0}, (0.05, 1.5)),
    ("medium", {"R": 64.0}, (0.2, 5.0)),
])
def test_first_derivative_matches_finite_differences(family, kw, span):
    w = build_weight(family, 8, **kw)
    x = np.linspace(*span, 97)
    h = 1e-4
    # fourth-order centered differences of phi
    fd = (8 * (w.phi(x + h) - w.phi(x - h)) - (w.phi(x + 2 * h) - w.phi(x - 2 * h))) / (12 * h)
    d1 = w.derivs(x)[1]
    assert np.max(np.abs(fd - d1) / np.maximum(np.abs(d1), 1.0)) <= 1e-6


def test_higher_derivatives_consistent():
    for w in (build_weight("exterior_cut", 8, R=20.0), build_weight("interior", 4, sigma=5)):
        x = np.linspace(0.1, 1.4, 50) if w.family is Family.INTERIOR else np.linspace(2.5, 4.5, 50)
        h = 1e-5
        d = w.derivs(x)
        for k in (2, 3, 4):
            fd = (w.derivs(x + h)[k - 1] - w.derivs(x - h)[k - 1]) / (2 * h)
            assert np.allclose(fd, d[k], rtol=1e-5, atol=1e-6 * np.abs(d[1]).max())


def test_medium_weight_shape():
    w = build_weight("medium", 16, R=100.0)
    s = np.linspace(1, math.log(100), 300)
    r = np.expm1(s)
    ratio = w.derivs(s)[1] / np.minimum(16 * r, 16 * np.log(r + 10))
    assert ratio.min() >= 0.8 and ratio.max() <= 1.0
    assert w.phi(np.array([20.0]))[0] == w.phi(np.array([math.log(100) + 1.5]))[0]


def test_construction_errors():
    with pytest.raises(PreconditionError):
        build_weight("exterior_convex", 2)
    with pytest.raises(PreconditionError):
        build_weight("interior", 8, sigma=1)
    with pytest.raises(PreconditionError):
        build_weight("exterior_cut", 8, R=0.5)
    with pytest.raises(ConstructionError, match="phi' >= lam"):
        CarlemanWeight(Family.EXTERIOR_CONVEX, -4.0).check()


def test_profile_rows():
    rows = build_weight("exterior_cut", 8, R=16.0).profile(n=11)
    assert len(rows) == 11 and set(rows[0]) == {"x", "r", "phi", "dphi", "ddphi"}
    assert rows[-1]["dphi"] == 0.0


@pytest.fixture(scope="module")
def flat_tests():
    out = {}
    for n in (399, 799):
        g = RadialGrid.covering(20.0, n)
        out[n] = (g, bump_tests(g, 20, (3.2, 18.0), seed=1))
    return out


def test_exterior_ratio_grid_stable_and_decaying_like_inverse_root_lambda(flat_tests):
    maxima = {}
    for n, (g, tests) in flat_tests.items():
        maxima[n] = [carleman_ratio(FLAT, build_weight("exterior_convex", lam), tests, "exterior", grid=g).max_ratio
                     for lam in (4, 8, 16, 32)]
    coarse, fine = np.array(maxima[399]), np.array(maxima[799])
    assert np.max(np.abs(coarse / fine - 1)) < 0.1
    assert fine.max() < 1.0
    # bounded in lambda; on flat space the random-test maximum falls off roughly like lambda^(-1/2)
    scaled = fine * np.sqrt([4, 8, 16, 32])
    assert scaled.max() / scaled.min() < 1.5


def test_exterior_support_precondition(flat_tests):
    g, _ = flat_tests[399]
    inner = bump_tests(g, 1, (0.5, 2.5))
    with pytest.raises(PreconditionError):
        carleman_ratio(FLAT, build_weight("exterior_convex", 4), inner, "exterior", grid=g)


def test_ratio_is_homogeneous_and_skips_zero(flat_tests):
    g, tests = flat_tests[399]
    w = build_weight("exterior_convex", 8)
    base = carleman_ratio(FLAT, w, tests[:3], "exterior", grid=g)
    scaled = carleman_ratio(FLAT, w, [t.scaled(3.7 - 2j) for t in tests[:3]], "exterior", grid=g)
    assert np.allclose(base.ratios, scaled.ratios, rtol=1e-12)
    zero = SpacetimeTest(np.zeros_like(tests[0].v), tests[0].dt)
    with_zero = carleman_ratio(FLAT, w, tests[:3] + [zero], "exterior", grid=g)
    assert with_zero.skipped == 1 and with_zero.n_tests == 3
    assert with_zero.ratios == base.ratios


def test_parallel_matches_serial(flat_tests):
    g, tests = flat_tests[399]
    w = build_weight("exterior_convex", 16)
    a = carleman_ratio(FLAT, w, tests, "exterior", grid=g)
    b = carleman_ratio(FLAT, w, tests, "exterior", grid=g, workers=4)
    assert a.ratios == b.ratios


def test_cut_estimate_uniform():
    maxima = {}
    for n in (399, 799):
        g = RadialGrid.covering(40.0, n)
        tests = bump_tests(g, 20, (3.2, 38.0), seed=2)
        maxima[n] = np.array([carleman_ratio(FLAT, build_weight("exterior_cut", lam, R=8.0, r0=3.0), tests,
                                             "cut", grid=g).max_ratio for lam in (4, 8, 16, 32)])
    assert np.max(np.abs(maxima[399] / maxima[799] - 1)) < 0.1
    assert maxima[799].max() / maxima[799].min() < 1.5
    with pytest.raises(ConfigError):
        carleman_ratio(FLAT, build_weight("exterior_convex", 4), tests, "cut", grid=g)


def test_interior_packet_through_origin():
    model = AFModel(r0=0.5)
    maxima = {}
    for n in (799, 1599):
        g = RadialGrid.covering(2.0, n)
        tests = packet_tests(g, (0.1, 0.15, 0.2), T=1.0)
        maxima[n] = [carleman_ratio(model, build_weight("interior", lam, sigma=4, R=1.0), tests, "interior",
                                    grid=g).max_ratio for lam in (4, 8, 16)]
    fine = np.array(maxima[1599])
    assert np.all(np.isfinite(fine)) and np.all(fine > 0)
    assert np.max(np.abs(np.array(maxima[799]) / fine - 1)) < 0.1
    assert np.all(fine[1:] / fine[:-1] > 0.5) and np.all(fine[1:] / fine[:-1] < 2)


def test_medium_band_passes_with_large_cut_radius():
    w = build_weight("medium", 64, R=1024.0)
    verdict = medium_band_check(MINKOWSKI, w, (0.5, 4.0), grid=RadialGrid.covering(2100.0, 104999))
    assert verdict.passed
    assert verdict.absorption <= 0.5
    assert verdict.band_spread < 1.1
    assert verdict.n_tests == 24
    assert set(verdict.to_dict()) >= {"passed", "constant", "per_tau"}


def test_medium_band_side_conditions():
    grid = RadialGrid.covering(400.0, 3999)
    with pytest.raises(ConfigError) as info:
        medium_band_check(MINKOWSKI, build_weight("medium", 64, R=64.0), (0.5, 4.0), grid=grid)
    assert info.value.path == "band.tau0"
    with pytest.raises(ConfigError) as info:
        medium_band_check(MINKOWSKI, build_weight("medium", 64, R=1024.0), (1.0, 64.0), grid=grid)
    assert info.value.path == "band.tau1"
    with pytest.raises(ConfigError):
        medium_band_check(MINKOWSKI, build_weight("exterior_convex", 64), (1.0, 2.0), grid=grid)


def test_harmonic_tests_use_pencil():
    g = RadialGrid.covering(20.0, 399)
    t = HarmonicTest(1.0, g.r * bump((g.r - 10) / 3) * np.exp(1j * g.r))
    stats = carleman_ratio(FLAT, build_weight("exterior_convex", 4), [t], "exterior", grid=g)
    assert stats.n_tests == 1 and np.isfinite(stats.max_ratio)
