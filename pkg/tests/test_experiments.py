import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import isotropic_exit_survival
from stableharnack.experiments import (MODEST, BallTarget, Complement, SectorTarget, analytic_bounds,
                                       estimate_exit_probability, exit_probability_from_batch,
                                       green_estimate_survey, harnack_ratio_experiment, inf_grid,
                                       modest_sequence, random_indicator_data, weak_harnack_experiment,
                                       weak_harnack_survey)
from stableharnack.geometry import geometry_record, records_from_triple
from stableharnack.simulate import simulate_exits

SYN = (1.0, 10.0, 1000.0)


@pytest.fixture(scope="module")
def modest():
    return modest_sequence(6)


@pytest.fixture(scope="module")
def batch(iso05):
    return simulate_exits(iso05, (0.0, 0.0), 1.0, 20_000, seed=8)


# exit probabilities -------------------------------------------------------------


def test_complement_is_certain(batch):
    est = exit_probability_from_batch(batch, Complement())
    assert est.value == 1.0 and est.stderr == 0.0


def test_sector_partition_sums_to_one(batch):
    parts = [SectorTarget(1.0, 2.0, 2 * math.pi * k / 5, 2 * math.pi / 5) for k in range(5)]
    parts.append(SectorTarget(2.0))
    total = sum(exit_probability_from_batch(batch, t).value for t in parts)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_far_annulus_against_closed_form(iso05):
    est = estimate_exit_probability(iso05, (0.0, 0.0), SectorTarget(2.0), samples=20_000, seed=9)
    ref = float(isotropic_exit_survival(0.5, 2.0))
    assert abs(est.value - ref) < 3 * est.stderr


def test_shifted_domain(iso05):
    # translating the ball and the start point together leaves the law unchanged
    a = estimate_exit_probability(iso05, (0.0, 0.0), SectorTarget(2.0), samples=5000, seed=3)
    b = estimate_exit_probability(iso05, (3.0, -1.0), lambda p: np.hypot(p[:, 0] - 3, p[:, 1] + 1) >= 2.0,
                                  domain=((3.0, -1.0), 1.0), samples=5000, seed=3)
    assert a.value == b.value


def test_zero_hits_flagged(batch):
    est = exit_probability_from_batch(batch, BallTarget((100.0, 100.0), 1e-3))
    assert est.value == 0.0 and est.flagged
    assert "3/n" not in est.note and f"{3 / len(batch):.3g}" in est.note


# analytic bounds ----------------------------------------------------------------


def test_bound_ratio_is_product():
    b = analytic_bounds(records_from_triple(*SYN), 0.5)
    assert b.residual < 1e-9
    assert b.upper / b.lower == pytest.approx(b.a_n * b.b_n, rel=1e-9)


@given(n=st.integers(1, 12), a=st.floats(0.05, 0.95))
def test_bound_ratio_is_product_on_sequence(seq_c2, n, a):
    assert analytic_bounds(geometry_record(seq_c2, n), a).residual < 1e-9


def test_small_alpha_limit():
    rec = records_from_triple(*SYN)
    b = analytic_bounds(rec, 1e-12)
    assert b.b_n == pytest.approx(rec.delta + rec.x, rel=1e-9)


def test_constructed_product_decays(seq_c2):
    prod = [analytic_bounds(geometry_record(seq_c2, n), 0.5).product for n in range(2, 13)]
    assert all(p > q for p, q in zip(prod, prod[1:]))


# Harnack ratio experiment -------------------------------------------------------


def test_modest_sequence_parameters(modest):
    assert modest.c == MODEST["c"]
    assert modest.alpha[0] == pytest.approx(MODEST["alpha1"])
    assert modest.beta[0] == pytest.approx(MODEST["beta1"])


def test_harnack_rows(modest):
    rows = harnack_ratio_experiment(modest, MODEST["alpha"], samples=20_000, seed=1)
    assert [r.n for r in rows] == list(range(1, 7))
    assert rows[0].mode == "mc"
    assert all(r.mode == "analytic" for r in rows[1:])
    assert abs(rows[-1].a_n - 1) < 1e-2
    assert rows[-1].b_n < rows[0].b_n
    for r in rows:
        assert r.upper_factor / r.lower_factor == pytest.approx(r.product, rel=1e-9)
        assert r.predicted_hit == r.lower_factor
    first = rows[0]
    assert first.u0 >= first.lower_factor - 3 * first.u0_se
    assert first.hits0 == round(first.u0 * 20_000)


def test_harnack_analytic_only(modest):
    rows = harnack_ratio_experiment(modest, MODEST["alpha"], samples=100, seed=1)
    assert all(r.mode == "analytic" and math.isnan(r.u0) for r in rows)


def test_harnack_reproducible(modest):
    a = harnack_ratio_experiment(modest, MODEST["alpha"], n_range=[1], samples=10_000, seed=4)
    b = harnack_ratio_experiment(modest, MODEST["alpha"], n_range=[1], samples=10_000, seed=4)
    assert a == b


def test_harnack_argument_errors(modest):
    with pytest.raises(ValueError):
        harnack_ratio_experiment(modest, 1.0, samples=10)
    with pytest.raises(ValueError):
        harnack_ratio_experiment(modest, 0.3, n_range=[0], samples=10)
    with pytest.raises(ValueError):
        harnack_ratio_experiment(modest, 0.3, n_range=[7], samples=10)


# weak Harnack -------------------------------------------------------------------


def test_inf_grid_layout():
    g = inf_grid()
    assert g.shape == (25, 2)
    assert np.all(np.hypot(g[:, 0], g[:, 1]) <= 0.25 + 1e-15)
    assert len({(round(p[0], 12), round(p[1], 12)) for p in g}) == 25


def test_constant_data(iso05):
    res = weak_harnack_experiment(iso05, lambda p: np.ones(len(p)), samples=500, seed=1)
    assert res.l1 == pytest.approx(math.pi / 4, abs=1e-12)
    assert res.inf == 1.0 and res.inf_se == 0.0
    assert res.ratio == pytest.approx(math.pi / 4, abs=1e-12)
    assert not res.flagged


def test_ratio_is_scale_invariant(iso05):
    g = SectorTarget(1.0, 3.0, 0.5, 2.0)
    one, two = weak_harnack_survey(iso05, [g, lambda p: 2.0 * g(p)], samples=2000, seed=2)
    assert two.l1 == pytest.approx(2 * one.l1, rel=1e-12)
    assert two.ratio == pytest.approx(one.ratio, rel=1e-12)


def test_random_data_reproducible():
    a = random_indicator_data(5, 3)
    assert a == random_indicator_data(5, 3)
    assert a != random_indicator_data(5, 4)
    assert all(t.r_lo >= 0.75 for t in a)


def test_negative_data_rejected(iso05):
    with pytest.raises(ValueError):
        weak_harnack_experiment(iso05, lambda p: -np.ones(len(p)), samples=100)


def test_unreachable_data_flagged(iso05):
    res = weak_harnack_experiment(iso05, BallTarget((50.0, 0.0), 1e-3), samples=200, seed=1)
    assert res.flagged and math.isinf(res.ratio)


# Green survey -------------------------------------------------------------------


def test_green_survey_small(iso05):
    sv = green_estimate_survey(iso05, 4, samples=2000, seed=5)
    assert len(sv.rows) == 4
    kept = [r for r in sv.rows if r.ok]
    assert sv.dropped == 4 - len(kept) and kept
    assert all(r.ratio > 0 for r in kept)
    # rows are dropped only when the Monte Carlo error is too large to trust
    for r in sv.rows:
        if not r.ok:
            assert r.green_ball_se > 0.1 * r.green_ball and math.isnan(r.ratio)
        assert math.hypot(*r.x) < 0.5 and math.hypot(*r.y) < 1
    assert sv.ratio_min <= sv.ratio_median <= sv.ratio_max
    assert sv.c_hat == pytest.approx(max(sv.ratio_max, 1 / sv.ratio_min))


def test_green_survey_explicit_pairs(iso05):
    pairs = [((0.0, 0.0), (0.3, 0.0)), ((0.1, 0.2), (-0.2, 0.4))]
    sv = green_estimate_survey(iso05, pairs, samples=4000, seed=6)
    assert [r.x for r in sv.rows] == [p[0] for p in pairs]
    assert sv.dropped == 0
    assert all(r.green_ball < r.green for r in sv.rows)
