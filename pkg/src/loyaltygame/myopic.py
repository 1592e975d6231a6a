"""Market-share dynamics when both firms reprice myopically every period.

Prices repeat the one-shot equilibrium each period, so only the share of
firm A's strong sub-market moves::

    theta_{t+1} = theta_t * (1 - F_a) + (1 - theta_t) * F_b

with ``F_a``, ``F_b`` the equilibrium switching probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loyalty import Family, MarketParams
from .single_stage import ML_TO_LL, EquilibriumOutcome, classify_region, closed_form_equilibrium

MAX_HORIZON = 10**6
EARLY_EXIT_TOL = 1e-15


@dataclass(frozen=True)
class ShareTrajectory:
    """Share of firm A for t = 0..horizon (firm B holds the complement).

    ``regime`` is ``"contracting"`` in the generic case, ``"no_switching"``
    when nobody ever switches (constant share) and ``"oscillating"`` when
    everybody switches every period (no limit; ``theta_infinity`` is nan).
    """

    theta_series: np.ndarray
    theta_infinity: float
    geometric_rate: float
    fixed_point: float
    regime: str

    @property
    def share_B(self) -> np.ndarray:
        return 1.0 - self.theta_series


def _check_horizon(horizon: int) -> int:
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be a positive integer")
    if horizon > MAX_HORIZON:
        raise ValueError(f"horizon is capped at {MAX_HORIZON}")
    return horizon


def _regime(F_a: float, F_b: float) -> tuple[str, float, float]:
    total = F_a + F_b
    rate = 1.0 - F_a - F_b
    if total == 0.0:
        return "no_switching", rate, math.nan
    if total == 2.0:
        return "oscillating", rate, math.nan
    return "contracting", rate, F_b / total


def share_path(theta0: float, F_a: float, F_b: float, horizon: int) -> ShareTrajectory:
    """Closed-form share trajectory for given switching probabilities."""
    horizon = _check_horizon(horizon)
    regime, rate, fixed = _regime(F_a, F_b)
    t = np.arange(horizon + 1, dtype=float)
    if regime == "no_switching":
        return ShareTrajectory(np.full(horizon + 1, theta0), theta0, rate, theta0, regime)
    if regime == "oscillating":
        series = np.where(t % 2 == 0, theta0, 1.0 - theta0)
        return ShareTrajectory(series, math.nan, rate, math.nan, regime)
    decay = rate**t
    # a convex combination of shares, but rounding can step an ulp outside
    series = np.clip(theta0 * decay + F_b * (1.0 - decay) / (F_a + F_b), 0.0, 1.0)
    return ShareTrajectory(series, fixed, rate, fixed, regime)


def share_path_recursive(theta0: float, F_a: float, F_b: float, horizon: int) -> ShareTrajectory:
    """Same trajectory built by iterating the one-period share update."""
    horizon = _check_horizon(horizon)
    regime, rate, fixed = _regime(F_a, F_b)
    series = np.empty(horizon + 1)
    theta = theta0
    series[0] = theta
    stay_a = 1.0 - F_a
    for t in range(1, horizon + 1):
        theta = min(max(theta * stay_a + (1.0 - theta) * F_b, 0.0), 1.0)
        series[t] = theta
        if regime == "contracting" and abs(theta - fixed) < EARLY_EXIT_TOL:
            series[t + 1:] = theta
            break
    theta_inf = theta0 if regime == "no_switching" else fixed
    return ShareTrajectory(series, theta_inf, rate, theta_inf, regime)


def _switching(outcome: EquilibriumOutcome) -> tuple[float, float]:
    return outcome.switch_alpha, outcome.switch_beta


def trajectory_closed_form(params: MarketParams, horizon: int) -> ShareTrajectory:
    F_a, F_b = _switching(closed_form_equilibrium(params))
    return share_path(params.theta0, F_a, F_b, horizon)


def trajectory_recursion(params: MarketParams, horizon: int) -> ShareTrajectory:
    F_a, F_b = _switching(closed_form_equilibrium(params))
    return share_path_recursive(params.theta0, F_a, F_b, horizon)


def profit_series(params: MarketParams, trajectory: ShareTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-period profits for t = 1..horizon, using the previous period's share."""
    outcome = closed_form_equilibrium(params)
    p = outcome.prices
    F_a, F_b = _switching(outcome)
    prev = trajectory.theta_series[:-1]
    profit_A = (p.p_A_alpha - params.c_A) * prev * (1.0 - F_a) + (p.p_A_beta - params.c_A) * (1.0 - prev) * F_b
    profit_B = (p.p_B_beta - params.c_B) * (1.0 - prev) * (1.0 - F_b) + (p.p_B_alpha - params.c_B) * prev * F_a
    return profit_A, profit_B


def per_region_steady_state(params: MarketParams, region: str | None = None) -> float:
    """Steady-state share of firm A from the per-region closed forms.

    ``region`` is a label in the model's own family (e.g. ``"IV"`` for the
    multiplicative model is its fourth region); by default it is classified
    from ``params``.  The formulas are evaluated as written even when
    ``params`` lies outside the named region.
    """
    if region is None:
        canonical = classify_region(params).canonical
    elif params.loyalty.family is Family.MULTIPLICATIVE:
        if region not in ML_TO_LL:
            raise ValueError(f"unknown multiplicative region {region!r}")
        canonical = ML_TO_LL[region]
    else:
        canonical = region
    m = params.loyalty
    d = params.cost_gap
    la, sa, lb, sb = m.l_alpha, m.s_alpha, m.l_beta, m.s_beta

    if canonical == "I":
        return params.theta0
    if canonical in ("II", "III"):
        return 0.0
    if canonical == "IV":
        return 1.0
    if canonical == "V":
        return (1 - (d + sb) / lb) / ((d - sa) / la - (d + sb) / lb + 2)
    if canonical == "VI":
        if m.family is Family.ADDITIVE:
            raise ValueError("region VI is empty under additive loyalty")
        q = (lb - sb - d) / (3 * lb)
        return q / (1 + q)
    raise ValueError(f"unknown region {region!r}")
