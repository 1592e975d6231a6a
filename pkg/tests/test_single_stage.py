import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loyaltygame.errors import ThresholdOutsideSupport, UnsupportedDistribution
from loyaltygame.loyalty import Family, LoyaltyModel, MarketParams, ShockDistribution
from loyaltygame.single_stage import (LL_TO_ML, ML_TO_LL, PriceProfile, best_response_gap, classify_region,
                                      closed_form_equilibrium, foc_residual, region_from_canonical,
                                      region_prices, solve_interior_foc)

import oracles
from conftest import fig2_params, linear_params

SYM = MarketParams(0.0, 0.0, LoyaltyModel.linear(1, 0, 1, 0), 0.5)


def br_gap(params, prices, step=1e-3):
    m = params.loyalty
    hi = params.c_A + max(m.s_alpha, m.s_beta) + 2 * max(m.l_alpha, m.l_beta) + 1
    return best_response_gap(params, prices, step, params.c_B, hi)


# --- examples ---------------------------------------------------------------

@pytest.mark.parametrize("gap, label", [(0.0, "IV"), (1.5, "I"), (3.0, "II"), (6.0, "III")])
def test_fig2_classification(gap, label):
    region = classify_region(fig2_params(gap))
    assert region.label == label and region.family is Family.LINEAR


def test_symmetric_region_v_prices():
    out = closed_form_equilibrium(SYM)
    assert out.region.label == "V"
    assert out.prices.as_tuple() == pytest.approx((2 / 3, 1 / 3, 2 / 3, 1 / 3), abs=1e-15)
    assert out.xi_alpha == pytest.approx(1 / 3, abs=1e-15)
    assert out.xi_beta == pytest.approx(1 / 3, abs=1e-15)
    assert out.prob_stay_alpha == pytest.approx(2 / 3, abs=1e-15)
    assert out.prob_stay_beta == pytest.approx(2 / 3, abs=1e-15)


def test_fig2_region_ii_prices_and_profit():
    out = closed_form_equilibrium(fig2_params(3.0))
    assert out.region.label == "II"
    assert out.prices.as_tuple() == pytest.approx((12.2 / 3, 3.4, 6.4, 2.2 / 3), abs=1e-12)
    assert out.profit_A == pytest.approx((2 / 3) * 0.8 * (2 / 3), abs=1e-12)
    assert br_gap(fig2_params(3.0), out.prices) <= 2e-3


def test_fig2_region_i_prices():
    out = closed_form_equilibrium(fig2_params(1.5))
    assert out.region.label == "I"
    assert out.prices.as_tuple() == pytest.approx((3.4, 1.9, 4.9, 0.4), abs=1e-12)
    assert out.prob_stay_alpha == 1.0
    assert out.xi_alpha == 0.0


def test_classify_rejects_non_uniform():
    shock = ShockDistribution.truncated_normal(0.5, 0.2, 0.0, 1.0)
    params = MarketParams(0.5, 0.0, LoyaltyModel.linear(1, 0, 1, 0), shock=shock)
    with pytest.raises(UnsupportedDistribution):
        classify_region(params)
    with pytest.raises(UnsupportedDistribution):
        closed_form_equilibrium(params)


# --- agreement with the written-out region tables ---------------------------

@settings(max_examples=300)
@given(linear_params("linear"))
def test_ll_prices_match_tables(params):
    m = params.loyalty
    out = closed_form_equilibrium(params)
    d = oracles.exact(params.c_A) - oracles.exact(params.c_B)
    holds = oracles.ll_regions(d, m.l_alpha, m.s_alpha, m.l_beta, m.s_beta)
    assert out.region.label == min(holds, key=["I", "II", "III", "IV", "V", "VI"].index)
    expected = oracles.ll_prices(out.region.label, params.c_A, params.c_B, m.l_alpha, m.s_alpha, m.l_beta, m.s_beta)
    assert out.prices.as_tuple() == pytest.approx(expected, abs=1e-12, rel=1e-12)


@settings(max_examples=300)
@given(linear_params("multiplicative"))
def test_ml_prices_match_tables(params):
    m = params.loyalty
    out = closed_form_equilibrium(params)
    d = oracles.exact(params.c_A) - oracles.exact(params.c_B)
    holds = oracles.ml_regions(d, m.l_alpha, m.l_beta)
    assert out.region.family is Family.MULTIPLICATIVE
    assert out.region.label in ("I", "II", "III", "IV")
    # the ML labels map onto LL labels whose order differs, so the tie-break
    # is in LL order
    assert out.region.canonical == min((ML_TO_LL[h] for h in holds), key=["I", "II", "III", "IV", "V", "VI"].index)
    expected = oracles.ml_prices(out.region.label, params.c_A, params.c_B, m.l_alpha, m.l_beta)
    assert out.prices.as_tuple() == pytest.approx(expected, abs=1e-12, rel=1e-12)


@settings(max_examples=300)
@given(linear_params("additive"))
def test_al_prices_match_tables(params):
    m = params.loyalty
    out = closed_form_equilibrium(params)
    assert out.region.label != "VI"
    expected = oracles.al_prices(out.region.label, params.c_A, params.c_B, m.s_alpha, m.s_beta)
    assert out.prices.as_tuple() == pytest.approx(expected, abs=1e-12, rel=1e-12)


def test_label_maps_are_inverse():
    assert {LL_TO_ML[v]: v for v in LL_TO_ML} == {k: ML_TO_LL[k] for k in ML_TO_LL}
    assert region_from_canonical("V", Family.MULTIPLICATIVE).label == "III"
    with pytest.raises(ValueError):
        region_from_canonical("VI", Family.ADDITIVE)
    with pytest.raises(ValueError):
        region_from_canonical("I", Family.MULTIPLICATIVE)


# --- foc residual --------------------------------------------------------------

def test_foc_zero_at_interior_closed_form():
    assert foc_residual(SYM, closed_form_equilibrium(SYM).prices) == pytest.approx((0, 0, 0, 0), abs=1e-12)


def test_foc_perturbation():
    p = closed_form_equilibrium(SYM).prices
    bumped = PriceProfile(p.p_A_alpha + 0.1, p.p_A_beta, p.p_B_beta, p.p_B_alpha)
    r = foc_residual(SYM, bumped)
    # own price up 0.1 and switching probability up 0.1: residual +0.2; the
    # rival's alpha-market residual moves by -0.1; beta market untouched
    assert r == pytest.approx((0.2, 0.0, 0.0, -0.1), abs=1e-12)


def test_foc_rejects_corner_thresholds():
    with pytest.raises(ThresholdOutsideSupport):
        foc_residual(fig2_params(1.5), closed_form_equilibrium(fig2_params(1.5)).prices)


@settings(max_examples=100)
@given(linear_params("linear"))
def test_foc_vanishes_in_region_v(params):
    out = closed_form_equilibrium(params)
    if out.region.canonical != "V" or not (0 < out.xi_alpha < 1 and 0 < out.xi_beta < 1):
        return
    scale = max(1.0, *map(abs, out.prices.as_tuple()))
    assert max(map(abs, foc_residual(params, out.prices))) <= 1e-10 * scale


def test_solve_interior_foc_uniform_matches_closed_form():
    out = solve_interior_foc(SYM)
    assert out.prices.as_tuple() == pytest.approx(closed_form_equilibrium(SYM).prices.as_tuple(), abs=1e-12)


def test_solve_interior_foc_truncated_normal():
    shock = ShockDistribution.truncated_normal(0.5, 0.3, 0.0, 1.0)
    params = MarketParams(0.2, 0.0, LoyaltyModel.linear(1, 0, 1, 0), 0.5, shock=shock)
    out = solve_interior_foc(params)
    assert max(map(abs, foc_residual(params, out.prices))) <= 1e-10
    with pytest.raises(ThresholdOutsideSupport):
        solve_interior_foc(params.with_cost_gap(5.0))


# --- best response gap ------------------------------------------------------

def test_best_response_gap_examples():
    prices = closed_form_equilibrium(SYM).prices
    assert best_response_gap(SYM, prices, 1e-3, 0.0, 2.0) <= 1e-3
    assert best_response_gap(SYM, PriceProfile(0.0, 0.0, 0.0, 0.0), 1e-3, 0.0, 2.0) >= 0.05
    fig = fig2_params(1.5)
    assert best_response_gap(fig, closed_form_equilibrium(fig).prices, 1e-3, 0.0, 12.0) <= 1e-3
    with pytest.raises(ValueError):
        best_response_gap(SYM, prices, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        best_response_gap(SYM, prices, 1e-3, 1.0, 0.0)


@pytest.mark.parametrize("gap", [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.5, 5.0, 6.0])
def test_fig2_sweep_is_pne(gap):
    params = fig2_params(gap)
    assert br_gap(params, closed_form_equilibrium(params).prices) <= 2e-3


@pytest.mark.parametrize("step", [1e-2, 1e-3, 1e-4])
def test_pne_gap_shrinks_with_grid(step):
    assert best_response_gap(SYM, closed_form_equilibrium(SYM).prices, step, 0.0, 2.0) <= 2 * step


# --- invariants ---------------------------------------------------------------

def test_exclusive_and_exhaustive(rng):
    n = 100_000
    vals = rng.uniform(0, 6, size=(n, 5))
    vals[:, 0:2] = rng.uniform(0.01, 5, size=(n, 2))
    for la, lb, sa, sb, d in vals:
        holds = oracles.ll_regions(d, la, sa, lb, sb)
        assert holds, (la, lb, sa, sb, d)
    # sample of the full classifier: one label, always matches the oracle
    for la, lb, sa, sb, d in vals[:5000]:
        params = MarketParams(d, 0.0, LoyaltyModel.linear(la, sa, lb, sb))
        assert classify_region(params).label == oracles.ll_regions(d, la, sa, lb, sb)[0]


@settings(max_examples=300)
@given(st.sampled_from(["linear", "multiplicative", "additive"]).flatmap(linear_params))
def test_covered_market_and_feasibility(params):
    out = closed_form_equilibrium(params)
    theta = params.theta0
    assert out.demand_A_strong + out.demand_B_weak == pytest.approx(theta, abs=1e-14)
    assert out.demand_B_strong + out.demand_A_weak == pytest.approx(1 - theta, abs=1e-14)
    p = out.prices
    tol = 1e-12 * max(1.0, params.c_A)
    assert p.p_A_alpha >= params.c_A - tol and p.p_A_beta >= params.c_A - tol
    assert p.p_B_beta >= params.c_B - tol and p.p_B_alpha >= params.c_B - tol
    assert out.profit_A >= -tol and out.profit_B >= -tol
    assert 0 <= out.prob_stay_alpha <= 1 and 0 <= out.prob_stay_beta <= 1


@settings(max_examples=100)
@given(linear_params("linear"), st.floats(0, 1))
def test_prices_do_not_depend_on_theta(params, theta):
    a = closed_form_equilibrium(params)
    b = closed_form_equilibrium(params.replace(theta0=theta))
    assert a.prices == b.prices and a.region == b.region


def test_fig2_exit_at_five():
    for gap in np.linspace(0, 6, 241):
        out = closed_form_equilibrium(fig2_params(float(gap)))
        if gap >= 5:
            assert out.demand_A_strong <= 1e-12
        else:
            assert out.demand_A_strong > 0


@settings(max_examples=200)
@given(linear_params("linear"))
def test_boundary_price_continuity_property(params):
    m = params.loyalty
    la, sa, lb, sb = m.l_alpha, m.s_alpha, m.l_beta, m.s_beta
    for (r1, r2), d in {("IV", "I"): lb - sb, ("I", "II"): sa - la, ("II", "III"): sa + 2 * la,
                        ("V", "VI"): sa + 2 * la, ("IV", "V"): sa - la, ("VI", "III"): lb - sb,
                        ("V", "II"): lb - sb}.items():
        if d < 0:
            continue
        p = params.with_cost_gap(d)
        a, b = region_prices(p, r1), region_prices(p, r2)
        if (r1, r2) in {("IV", "I"), ("VI", "III"), ("V", "II")}:
            pair = (1, 2)  # beta-market boundary
        else:
            pair = (0, 3)
        for i in pair:
            assert a.as_tuple()[i] == pytest.approx(b.as_tuple()[i], abs=1e-12 * max(1, abs(d), params.c_A))
