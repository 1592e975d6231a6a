import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loyaltygame.loyalty import LoyaltyModel, MarketParams
from loyaltygame.myopic import (MAX_HORIZON, per_region_steady_state, profit_series, share_path,
                                share_path_recursive, trajectory_closed_form, trajectory_recursion)
from loyaltygame.single_stage import classify_region, closed_form_equilibrium

import oracles
from conftest import fig2_params, linear_params, symmetric_ml

FAMILIES = st.sampled_from(["linear", "multiplicative", "additive"]).flatmap(linear_params)


def test_one_and_two_step_examples():
    path = share_path(0.8, 1 / 3, 1 / 3, 5)
    assert path.theta_series[1] == pytest.approx(0.6, abs=1e-15)
    assert path.theta_series[2] == pytest.approx(0.6 * 2 / 3 + 0.4 / 3, abs=1e-15)
    assert path.theta_infinity == pytest.approx(0.5, abs=1e-15)
    assert path.geometric_rate == pytest.approx(1 / 3, abs=1e-15)


def test_no_switching_is_constant():
    for build in (share_path, share_path_recursive):
        path = build(0.3, 0.0, 0.0, 10)
        assert np.all(path.theta_series == 0.3)
        assert path.theta_infinity == 0.3 and path.regime == "no_switching"


def test_full_switching_oscillates():
    a, b = share_path(0.8, 1.0, 1.0, 7), share_path_recursive(0.8, 1.0, 1.0, 7)
    np.testing.assert_allclose(a.theta_series, [0.8, 0.2] * 4, atol=1e-15)
    np.testing.assert_allclose(a.theta_series, b.theta_series, atol=1e-15)
    assert math.isnan(a.theta_infinity) and a.regime == "oscillating"
    # the general closed form with rate -1 gives the same alternation
    t = np.arange(8)
    np.testing.assert_allclose(0.8 * (-1.0) ** t + 0.5 * (1 - (-1.0) ** t), a.theta_series, atol=1e-15)


def test_symmetric_firms_split_the_market():
    for params in (symmetric_ml(l=2.0, c=0.3), MarketParams(1, 1, LoyaltyModel.linear(1, 0.5, 1, 0.5), 0.9),
                   MarketParams(1, 1, LoyaltyModel.additive(0.4, 0.4), 0.1)):
        assert trajectory_closed_form(params, 10).theta_infinity == 0.5
        assert per_region_steady_state(params) == 0.5


def test_fig2_region_i_share_frozen():
    traj = trajectory_closed_form(fig2_params(1.5), 50)
    assert np.all(traj.theta_series == 0.8)
    assert per_region_steady_state(fig2_params(1.5)) == 0.8


def test_steady_state_examples():
    assert per_region_steady_state(fig2_params(6.0)) == 0.0
    ml = MarketParams(1.0, 1.0, LoyaltyModel.multiplicative(1.0, 2.0))
    assert per_region_steady_state(ml, "IV") == pytest.approx(0.25, abs=1e-15)
    for d in (0.0, 0.3, 0.9):
        ml = MarketParams(0.2 + d, 0.2, LoyaltyModel.multiplicative(1.5, 1.5))
        assert classify_region(ml).label == "III"
        assert per_region_steady_state(ml) == pytest.approx(0.5 * (1 - d / 1.5), abs=1e-14)


def test_additive_has_no_region_vi():
    with pytest.raises(ValueError):
        per_region_steady_state(MarketParams(1, 0, LoyaltyModel.additive(0.1, 0.1)), "VI")


# --- reference trajectories as oracles --------------------------------------

def _ll_reference_path(region, params, horizon):
    m = params.loyalty
    la, sa, lb, sb = m.l_alpha, m.s_alpha, m.l_beta, m.s_beta
    d, theta = params.cost_gap, params.theta0
    t = np.arange(horizon + 1)
    if region == "I":
        return np.full(horizon + 1, theta)
    if region == "II":
        return theta * ((2 * la - d + sa) / (3 * la)) ** t
    if region == "III":
        return np.where(t == 0, theta, 0.0)
    if region == "IV":
        return 1 - (1 - theta) * ((d + sb + 2 * lb) / (3 * lb)) ** t
    if region == "V":
        rate = 1 / 3 - (d - sa) / (3 * la) + (d + sb) / (3 * lb)
    else:
        rate = (d - lb + sb) / (3 * lb)
    inf = oracles.ll_steady_state(region, d, la, sa, lb, sb, theta)
    return theta * rate**t + inf * (1 - rate**t)


@settings(max_examples=300)
@given(linear_params("linear"))
def test_ll_trajectory_matches_reference_formula(params):
    region = classify_region(params).label
    got = trajectory_closed_form(params, 40).theta_series
    np.testing.assert_allclose(got, _ll_reference_path(region, params, 40), atol=1e-12)
    m = params.loyalty
    expected = oracles.ll_steady_state(region, params.cost_gap, m.l_alpha, m.s_alpha, m.l_beta, m.s_beta,
                                       params.theta0)
    assert per_region_steady_state(params) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=300)
@given(linear_params("multiplicative"))
def test_ml_steady_state_matches_reference_formula(params):
    region = classify_region(params).label
    m = params.loyalty
    expected = oracles.ml_steady_state(region, params.cost_gap, m.l_alpha, m.l_beta, params.theta0)
    assert per_region_steady_state(params) == pytest.approx(expected, abs=1e-12)
    traj = trajectory_closed_form(params, 10)
    if traj.regime == "contracting":
        assert traj.theta_infinity == pytest.approx(expected, abs=1e-12)


@settings(max_examples=300)
@given(linear_params("additive"))
def test_al_steady_state_matches_reference_formula(params):
    region = classify_region(params).label
    m = params.loyalty
    expected = oracles.al_steady_state(region, params.cost_gap, m.s_alpha, m.s_beta, params.theta0)
    assert per_region_steady_state(params) == pytest.approx(expected, abs=1e-12)


def test_al_region_v_uses_general_rate():
    # the general contraction factor in this region is (1 + s_a + s_b) / 3
    params = MarketParams(0.7, 0.6, LoyaltyModel.additive(0.1, 0.05), 0.8)
    assert classify_region(params).label == "V"
    traj = trajectory_closed_form(params, 5)
    assert traj.geometric_rate == pytest.approx((1 + 0.1 + 0.05) / 3, abs=1e-14)
    np.testing.assert_allclose(traj.theta_series, trajectory_recursion(params, 5).theta_series, atol=1e-15)


# --- invariants -----------------------------------------------------------

@settings(max_examples=200)
@given(FAMILIES)
def test_closed_form_matches_recursion(params):
    a = trajectory_closed_form(params, 2000)
    b = trajectory_recursion(params, 2000)
    assert np.max(np.abs(a.theta_series - b.theta_series)) <= 1e-12
    assert np.all((a.theta_series >= 0) & (a.theta_series <= 1))
    np.testing.assert_array_equal(a.share_B, 1.0 - a.theta_series)
    if a.regime == "contracting":
        assert per_region_steady_state(params) == pytest.approx(a.theta_infinity, abs=1e-12)
        assert abs(b.theta_series[-1] - a.theta_infinity) <= 1e-12 or abs(a.geometric_rate) > 0.98


@settings(max_examples=100)
@given(FAMILIES, st.floats(0, 1))
def test_steady_state_independent_of_theta(params, theta):
    traj = trajectory_closed_form(params, 3)
    if traj.regime != "contracting":
        return
    assert trajectory_closed_form(params.replace(theta0=theta), 3).theta_infinity == traj.theta_infinity


@settings(max_examples=100)
@given(FAMILIES)
def test_profit_series_from_trajectory(params):
    traj = trajectory_closed_form(params, 20)
    pa, pb = profit_series(params, traj)
    eq = closed_form_equilibrium(params)
    for t in (0, 7, 19):
        stage = closed_form_equilibrium(params.replace(theta0=float(np.clip(traj.theta_series[t], 0, 1))))
        assert pa[t] == pytest.approx(stage.profit_A, abs=1e-12)
        assert pb[t] == pytest.approx(stage.profit_B, abs=1e-12)
    assert pa[0] == pytest.approx(eq.profit_A, abs=1e-12)


def test_horizon_validation():
    with pytest.raises(ValueError):
        share_path(0.5, 0.2, 0.2, 0)
    with pytest.raises(ValueError):
        share_path_recursive(0.5, 0.2, 0.2, MAX_HORIZON + 1)
    assert share_path_recursive(0.5, 0.2, 0.3, MAX_HORIZON).theta_series[-1] == pytest.approx(0.6, abs=1e-15)


def test_shares_stay_in_unit_interval_at_the_edges():
    params = MarketParams(1.0, 1.0, LoyaltyModel.linear(1.0, 1.0, 1.0, 0.0), 1.0)
    for build in (trajectory_closed_form, trajectory_recursion):
        series = build(params, 500).theta_series
        assert np.all((series >= 0) & (series <= 1))
