import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from oracles import circle_abs_cos_power, one_dim_levy_integral
from stableharnack.spectral import (SpectralMeasure, StableModel, angular_exponent, char_exponent,
                                    circle_cos_power, counterexample_measure, levy_density,
                                    levy_integral_constant, nondegeneracy_constant, sample_directions,
                                    sample_jump, sample_radii)

TWO_ARCS = SpectralMeasure.from_arcs([0.3, 1.9], [0.2, 0.4], [1.0, 0.5])


@pytest.fixture(scope="module")
def cex(seq_c2):
    return counterexample_measure(seq_c2, 6)


def test_isotropic_alpha_one_is_4u():
    m = StableModel.isotropic(1.0)
    u = np.array([[1.0, 0.0], [0.3, -0.4], [-2.0, 5.0]])
    assert np.allclose(char_exponent(m, u), 4 * np.hypot(u[:, 0], u[:, 1]), rtol=1e-12)


def test_quadratic_sanity_case():
    assert circle_cos_power(2.0) == pytest.approx(math.pi, rel=1e-12)
    for a in (0.3, 0.5, 1.0, 1.5):
        assert circle_cos_power(a) == pytest.approx(circle_abs_cos_power(a), rel=1e-12)


@given(a=st.floats(0.1, 1.9), lam=st.floats(0.01, 100), phi=st.floats(0, 2 * math.pi))
def test_homogeneous_and_symmetric(a, lam, phi):
    m = StableModel(a, TWO_ARCS)
    u = np.array([math.cos(phi), math.sin(phi)])
    base = char_exponent(m, u)
    assert char_exponent(m, lam * u) == pytest.approx(lam ** a * base, rel=1e-10)
    assert char_exponent(m, -u) == pytest.approx(base, rel=1e-10)
    assert base >= 0


def test_arc_exponent_against_midpoint_refinement(cex):
    m = StableModel(0.5, cex)
    phi = np.array([0.0, 0.7, 2.0, math.pi / 2])
    got = angular_exponent(m, phi)
    prev = None
    for k in (14, 16, 18):
        t = (np.arange(2 ** k) + 0.5) * 2 * math.pi / 2 ** k
        f = cex.density(t)
        mid = np.array([np.sum(np.abs(np.cos(t - p)) ** 0.5 * f) * 2 * math.pi / 2 ** k for p in phi])
        if prev is not None:
            assert np.max(np.abs(mid - got)) <= np.max(np.abs(prev - got)) + 1e-12
        prev = mid
    assert np.allclose(prev, got, rtol=1e-4)


def test_callback_density_matches_arcs():
    f = lambda t: np.where(np.cos(2 * t) > 0, 1.0, 0.0)  # noqa: E731
    cb = SpectralMeasure.from_density(f, 1.0)
    arcs = SpectralMeasure.from_arcs([0.0, 0.5 * math.pi], [math.pi / 4, math.pi / 4], [1.0, 0.0])
    a = angular_exponent(StableModel(0.7, cb), np.array([0.2, 1.3]))
    b = angular_exponent(StableModel(0.7, arcs), np.array([0.2, 1.3]))
    assert np.allclose(a, b, rtol=1e-7)
    assert cb.total_mass == pytest.approx(math.pi, rel=1e-9)


def test_measure_validation():
    with pytest.raises(ValueError):
        SpectralMeasure.from_density(lambda t: np.cos(t) ** 2 + np.sin(t), 2.0)  # not symmetric
    with pytest.raises(ValueError):
        SpectralMeasure.from_density(lambda t: 2 + 0 * t, 1.0)  # above bound
    with pytest.raises(ValueError):
        SpectralMeasure.from_arcs([0.0, 0.1], [0.2, 0.2])  # overlapping


@given(theta=st.floats(0, 2 * math.pi))
def test_symmetric_density(theta):
    assert TWO_ARCS.density(theta) == TWO_ARCS.density(theta + math.pi)


def test_measure_json_round_trip(cex):
    back = SpectralMeasure.from_dict(json.loads(json.dumps(cex.to_dict())))
    assert np.allclose(back.arc_lo, cex.arc_lo) and np.allclose(back.arc_width, cex.arc_width)
    iso = SpectralMeasure.from_dict(SpectralMeasure.isotropic().to_dict())
    assert iso.is_isotropic


# counterexample measure ---------------------------------------------------------


def test_counterexample_arcs_fill_bands(seq_c2, cex):
    assert cex.bound == 1.0
    assert cex.total_mass == pytest.approx(2 * sum(seq_c2.alpha[:6]), rel=1e-12)
    assert cex.total_mass < math.pi
    for n in range(1, 7):
        lo, hi = seq_c2.band(n)
        mid = 0.5 * (lo + hi)
        assert cex.density(mid) == 1.0 and cex.density(mid + math.pi) == 1.0


def test_counterexample_chord_radius(seq_c2, cex):
    # arc endpoints are at chord distance 2 sin(alpha_n/4) from the centre xi_n
    for n in range(1, 4):
        lo, _ = seq_c2.band(n)
        a = seq_c2.alpha[n - 1]
        xi = lo + a / 2
        chord = abs(2 * math.sin((xi - lo) / 2))
        assert chord == pytest.approx(2 * math.sin(a / 4), rel=1e-12)


def test_counterexample_nondegenerate(cex):
    res = nondegeneracy_constant(StableModel(0.5, cex))
    assert res.c > 0


# Levy density -------------------------------------------------------------------


@pytest.mark.parametrize("a", [0.3, 0.5, 1.0, 1.5])
def test_kappa_matches_closed_form(a):
    assert levy_integral_constant(a) == pytest.approx(one_dim_levy_integral(a), rel=1e-9)
    assert StableModel.isotropic(a).kappa == pytest.approx(1 / one_dim_levy_integral(a), rel=1e-9)


@given(x=st.floats(-5, 5), y=st.floats(-5, 5), lam=st.floats(0.1, 10))
def test_levy_density_scaling(x, y, lam):
    z = np.array([x, y])
    if np.hypot(x, y) < 1e-3:
        return
    m = StableModel(0.5, TWO_ARCS)
    f = levy_density(m, z)
    assert levy_density(m, lam * z) == pytest.approx(lam ** -2.5 * f, rel=1e-12)
    assert levy_density(m, -z) == pytest.approx(f, rel=1e-12)


def test_levy_density_origin_rejected():
    with pytest.raises(ValueError):
        levy_density(StableModel.isotropic(0.5), np.zeros(2))


def _radial_constant(a):
    # int_0^inf (1 - cos r) r^(-1-a) dr, numerically, split at 1
    head = integrate.quad(lambda r: (1 - math.cos(r)) * r ** (-1 - a), 0, 1, epsabs=1e-14)[0]
    tail = integrate.quad(lambda r: r ** (-1 - a), 1, np.inf, weight="cos", wvar=1.0, limit=400)[0]
    return head + 1 / a - tail


def _compatibility_integral(model, u):
    """int (1 - cos(u.y)) f_nu(y) dy in polar coordinates.

    The radial integral along direction e scales as |u.e|^a times the 1-D constant.
    """
    a = model.alpha
    L = _radial_constant(a)

    def ang(t):
        e = np.array([math.cos(t), math.sin(t)])
        return float(levy_density(model, e)) * L * abs(float(e @ u)) ** a

    pts = [] if model.measure.is_isotropic else sorted(set((model.measure.arc_lo % (2 * math.pi)).tolist()))
    return integrate.quad(ang, 0, 2 * math.pi, points=pts or None, limit=200, epsrel=1e-9)[0]


def test_compatibility_isotropic():
    m = StableModel.isotropic(0.5)
    u = np.array([1.0, 0.0])
    assert _compatibility_integral(m, u) == pytest.approx(char_exponent(m, u), rel=1e-4)


def test_compatibility_eight_directions():
    m = StableModel(0.5, TWO_ARCS)
    for k in range(8):
        p = math.pi * k / 8 + 0.05
        u = 1.3 * np.array([math.cos(p), math.sin(p)])
        assert _compatibility_integral(m, u) == pytest.approx(char_exponent(m, u), rel=1e-4)


# non-degeneracy -----------------------------------------------------------------


def test_isotropic_nondegeneracy():
    assert nondegeneracy_constant(StableModel.isotropic(1.0)).c == pytest.approx(4.0, rel=1e-12)


def test_single_arc_pair_is_nearly_degenerate():
    mu = SpectralMeasure.from_arcs([0.0], [0.01])
    res = nondegeneracy_constant(StableModel(0.5, mu))
    # orthogonal to the arc pair: 4 int_0^h sin(t)^alpha dt
    ref = 4 * integrate.quad(lambda t: math.sin(t) ** 0.5, 0, 0.01)[0]
    assert res.c == pytest.approx(ref, rel=1e-6)
    assert res.c < 0.1 * angular_exponent(StableModel(0.5, mu), np.array([0.0]))[0]
    # the minimizing direction is orthogonal to the arc
    assert abs(res.angle - math.pi / 2) < 1e-3


def test_grid_too_small():
    with pytest.raises(ValueError):
        nondegeneracy_constant(StableModel.isotropic(0.5), grid=10)


# sampling -----------------------------------------------------------------------


@pytest.mark.parametrize("a", [0.3, 0.5, 1.5])
def test_radius_median(a):
    r = sample_radii(a, 1e-3, 200_000, np.random.default_rng(1))
    assert np.median(r) == pytest.approx(1e-3 * 2 ** (1 / a), rel=0.02)
    assert r.min() >= 1e-3


def test_radius_tail_law():
    r = sample_radii(0.5, 1e-2, 50_000, np.random.default_rng(2))
    res = stats.kstest(r, lambda x: 1 - (1e-2 / np.maximum(x, 1e-2)) ** 0.5)
    assert res.pvalue > 0.01


def test_direction_histogram_matches_arc_masses():
    n = 100_000
    th = sample_directions(TWO_ARCS, n, np.random.default_rng(3)) % (2 * math.pi)
    lo, w = TWO_ARCS.arc_lo, TWO_ARCS.arc_width
    idx = np.full(n, -1)
    for k in range(len(lo)):
        inside = np.mod(th - lo[k], 2 * math.pi) < w[k]
        idx[inside] = k
    assert np.all(idx >= 0)
    counts = np.bincount(idx, minlength=len(lo))
    expected = n * TWO_ARCS.arc_masses() / TWO_ARCS.total_mass
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_direction_histogram_callback():
    f = lambda t: 0.5 * (1 + np.cos(2 * t))  # noqa: E731
    mu = SpectralMeasure.from_density(f, 1.0)
    th = sample_directions(mu, 50_000, np.random.default_rng(4)) % math.pi
    edges = np.linspace(0, math.pi, 9)
    counts = np.histogram(th, edges)[0]
    mass = [integrate.quad(f, a, b)[0] for a, b in zip(edges, edges[1:])]
    expected = 50_000 * np.array(mass) / sum(mass)
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_jump_replay():
    m = StableModel(0.5, TWO_ARCS)
    a = sample_jump(m, 1e-3, np.random.default_rng(9), size=100)
    b = sample_jump(m, 1e-3, np.random.default_rng(9), size=100)
    assert np.array_equal(a, b)
    assert np.all(np.hypot(a[:, 0], a[:, 1]) >= 1e-3)
    assert sample_jump(m, 1e-3, np.random.default_rng(9)).shape == (2,)
    with pytest.raises(ValueError):
        sample_jump(m, 0.0, np.random.default_rng(9))


def test_model_validation():
    with pytest.raises(ValueError):
        StableModel(2.0, TWO_ARCS)
    m = StableModel(0.5, TWO_ARCS)
    # jump rate nu(|z| > eps) = kappa * mass * eps^-alpha / alpha
    assert m.jump_rate(1e-2) == pytest.approx(m.kappa * TWO_ARCS.total_mass * 10 / 0.5)
