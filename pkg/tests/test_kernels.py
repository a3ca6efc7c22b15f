import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (cauchy_density, circle_abs_cos_power, isotropic_density_at_origin, isotropic_mean_exit_time,
                     riesz_green)
from stableharnack.kernels import (KernelGrid, build_kernel_grid, delta1_witness, expected_exit_time,
                                   frequency_cutoff, green_ball, green_ball_many, green_evaluator, green_function,
                                   green_time_integral, heat_kernel, heat_kernel_direct, heat_kernel_evaluator,
                                   occupation_integral, radial_profile, riesz_constant)
from stableharnack.spectral import SpectralMeasure, StableModel

ARCS = SpectralMeasure.from_arcs([0.3, 1.9], [0.5, 0.6], [1.0, 0.5])


@pytest.fixture(scope="module")
def aniso():
    return StableModel(0.8, ARCS)


# heat kernel --------------------------------------------------------------------


def test_cauchy_closed_form():
    m = StableModel.isotropic(1.0)
    r = np.linspace(0.0, 2.0, 41)
    x = np.stack([r * np.cos(0.4), r * np.sin(0.4)], axis=1)
    for t in (1.0, 0.5):
        got = heat_kernel(m, t, x)
        ref = cauchy_density(4 * t, x)
        assert np.max(np.abs(got / ref - 1)) < 1e-6


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_origin_value(a):
    m = StableModel.isotropic(a)
    ev = heat_kernel_evaluator(m)
    ref = isotropic_density_at_origin(a, circle_abs_cos_power(a))
    assert ev.p0 == pytest.approx(ref, rel=1e-10)
    assert ev.p1(np.zeros(2)) == ev.p0 > 0


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_scaling_against_direct_inversion(a):
    m = StableModel.isotropic(a)
    for x in ([0.3, 0.1], [1.2, -0.7]):
        assert heat_kernel(m, 2.0, x) == pytest.approx(heat_kernel_direct(m, 2.0, x), rel=1e-4)


def test_anisotropic_scaling_against_direct(aniso):
    x = [0.4, 0.25]
    assert heat_kernel(aniso, 2.0, x) == pytest.approx(heat_kernel_direct(aniso, 2.0, x, angles=2048), rel=1e-4)


@settings(max_examples=25)
@given(x1=st.floats(-3, 3), x2=st.floats(-3, 3))
def test_kernel_symmetric_and_positive(aniso, x1, x2):
    ev = heat_kernel_evaluator(aniso)
    p = ev.p1(np.array([x1, x2]))
    assert p == pytest.approx(ev.p1(np.array([-x1, -x2])), rel=1e-12)
    assert p > 0


def test_time_must_be_positive():
    with pytest.raises(ValueError):
        heat_kernel(StableModel.isotropic(0.5), 0.0, [0.0, 0.0])


def test_radial_profile_cauchy_closed_form():
    # int_0^inf r exp(-r) cos(r w) dr = (1 - w^2) / (1 + w^2)^2
    prof = radial_profile(1.0)
    w = np.concatenate([np.linspace(0, 3, 31), np.geomspace(3, 5 * prof.w_switch, 20)])
    ref = (1 - w * w) / (1 + w * w) ** 2
    assert np.max(np.abs(prof(w) - ref)) < 1e-12
    assert prof.g0 == 1.0


def test_radial_profile_continuous_at_switch():
    prof = radial_profile(0.5)
    w = prof.w_switch
    assert prof(np.array([w * (1 - 1e-9)]))[0] == pytest.approx(prof.series(np.array([w * (1 + 1e-9)]))[0],
                                                                 rel=1e-7)
    assert prof.g0 == pytest.approx(math.gamma(4.0) / 0.5, rel=1e-14)


# plane grid ---------------------------------------------------------------------


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_grid_normalization(a):
    g = build_kernel_grid(StableModel.isotropic(a), 512)
    assert abs(g.normalization() - 1) < 1e-3
    assert g.min_relative() > 0
    assert g.tail_bound <= 1e-8


def test_grid_matches_pointwise_for_fast_tail():
    m = StableModel.isotropic(1.5)
    g = build_kernel_grid(m, 512)
    c = g.n // 2
    ev = heat_kernel_evaluator(m)
    for k in (0, 3, 10):
        assert g.values[c + k, c] == pytest.approx(ev.p1(np.array([g.x[c + k], 0.0])), rel=1e-3)


def test_grid_symmetry(aniso):
    g = build_kernel_grid(aniso, 256)
    v = g.values[1:, 1:]
    assert np.allclose(v, v[::-1, ::-1], rtol=1e-10, atol=1e-14 * v.max())


def test_grid_round_trip(tmp_path):
    g = build_kernel_grid(StableModel.isotropic(1.0), 64)
    g.save(tmp_path / "k", {"note": "t"})
    back = KernelGrid.load(tmp_path / "k")
    assert np.array_equal(back.values, g.values)
    assert back.dx == g.dx and back.cutoff == g.cutoff
    xs, vs = g.scaled(2.0)
    assert vs.sum() * (xs[1] - xs[0]) ** 2 == pytest.approx(g.normalization(), rel=1e-12)


def test_frequency_cutoff_bound():
    for a in (0.5, 1.0, 1.5):
        U, b = frequency_cutoff(a, 2.0, 1e-8)
        assert b <= 1e-8
        assert frequency_cutoff(a, 2.0, 1e-10)[0] > U


def test_odd_grid_rejected():
    with pytest.raises(ValueError):
        build_kernel_grid(StableModel.isotropic(1.0), 63)


# Green function -----------------------------------------------------------------


@pytest.mark.parametrize("a", [0.3, 0.5, 1.0, 1.5])
def test_isotropic_riesz(a):
    m = StableModel.isotropic(a)
    scale = circle_abs_cos_power(a)
    assert riesz_constant(a) * scale == pytest.approx(riesz_green(a, 1.0, 1.0), rel=1e-12)
    for r in (0.3, 1.0, 2.5):
        assert green_function(m, [0, 0], [r, 0]) == pytest.approx(riesz_green(a, scale, r), rel=1e-10)


@pytest.mark.parametrize("a", [0.5, 1.5])
def test_isotropic_time_integral(a):
    m = StableModel.isotropic(a)
    x = np.array([0.6, 0.2])
    assert green_time_integral(m, x) == pytest.approx(green_function(m, [0, 0], x), rel=1e-6)


@pytest.mark.parametrize("lam", [0.5, 2.0, 4.0])
def test_homogeneity(aniso, lam):
    e = np.array([math.cos(0.7), math.sin(0.7)])
    g1 = green_function(aniso, [0, 0], e)
    assert green_function(aniso, [0, 0], lam * e) == pytest.approx(lam ** (aniso.alpha - 2) * g1, rel=1e-12)
    # the time integral knows nothing about the angular profile
    ti = green_time_integral(aniso, lam * e)
    assert ti == pytest.approx(lam ** (aniso.alpha - 2) * green_time_integral(aniso, e), rel=1e-6)
    assert ti == pytest.approx(green_function(aniso, [0, 0], lam * e), rel=1e-5)


@given(x1=st.floats(-1, 1), x2=st.floats(-1, 1), y1=st.floats(-1, 1), y2=st.floats(-1, 1))
def test_green_symmetric(aniso, x1, x2, y1, y2):
    if math.hypot(x1 - y1, x2 - y2) < 1e-6:
        return
    g = green_function(aniso, [x1, x2], [y1, y2])
    assert g == pytest.approx(green_function(aniso, [y1, y2], [x1, x2]), rel=1e-12)
    assert g > 0


def test_green_pole():
    with pytest.raises(ValueError):
        green_function(StableModel.isotropic(0.5), [0.1, 0.1], [0.1, 0.1])


def test_angular_profile_periodic(aniso):
    gf = green_evaluator(aniso)
    th = np.linspace(0, 2 * math.pi, 17)
    assert np.allclose(gf.angular(th), gf.angular(th + math.pi), rtol=1e-12)


# ball functionals ---------------------------------------------------------------


def test_green_ball_below_free(iso05):
    x, y = (0.1, 0.0), (-0.3, 0.4)
    est = green_ball(iso05, x, y, samples=4000, seed=1)
    assert est.value <= green_function(iso05, x, y) + 3 * est.stderr
    assert est.value > 0


def test_green_ball_symmetry(iso05):
    x, y = (0.2, 0.1), (-0.4, 0.3)
    a = green_ball(iso05, x, y, samples=20_000, seed=2, stream=0)
    b = green_ball(iso05, y, x, samples=20_000, seed=2, stream=1)
    assert abs(a.value - b.value) < 3 * math.hypot(a.stderr, b.stderr)


def test_green_ball_vanishes_at_boundary(iso05):
    ys = [(r, 0.0) for r in (0.3, 0.6, 0.9, 0.99)]
    est = green_ball_many(iso05, (-0.2, 0.0), ys, samples=20_000, seed=3)
    vals = [e.value for e in est]
    assert all(u > v for u, v in zip(vals, vals[1:]))
    assert vals[-1] < 0.4 * vals[0]


def test_green_ball_rejects_outside(iso05):
    with pytest.raises(ValueError):
        green_ball(iso05, (0.0, 0.0), (1.2, 0.0))


def test_exit_time_profile(iso05):
    scale = circle_abs_cos_power(0.5)
    ratios = []
    for r in (0.0, 0.3, 0.6, 0.9):
        s = expected_exit_time(iso05, (r, 0.0), samples=20_000, seed=4)
        ratios.append(s.value / (1 - r * r) ** 0.25)
        assert s.value == pytest.approx(float(isotropic_mean_exit_time(0.5, r, scale)), abs=4 * s.stderr)
    assert max(ratios) / min(ratios) < 1.1


def test_exit_time_maximal_at_centre(iso05):
    s = [expected_exit_time(iso05, (r, 0.0), samples=10_000, seed=5).value for r in (0.0, 0.5, 0.95)]
    assert s[0] > s[1] > s[2]


def test_occupation_integral_finite(iso05):
    for w in ((0.0, 0.0), (0.6, 0.0)):
        est = occupation_integral(iso05, w, samples=5000, seed=6)
        assert 0 < est.value < math.inf
        assert not est.flagged


def test_delta1_witness(iso05):
    wit = delta1_witness(iso05, samples=5000, seed=7)
    assert wit.delta1 is not None
    row = next(r for r in wit.rows if r["delta"] == wit.delta1)
    assert row["holds"] and row["lower_bound"] > 2 * row["max_subtracted"]
