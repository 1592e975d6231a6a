"""One-shot price-discrimination game: regions, closed forms and checks.

Under a uniform shock each sub-market sits in one of a few regimes:

* alpha: A keeps every loyal customer (``retain``), both firms share it
  (``interior``) or A is priced out (``exit``);
* beta: both firms share it (``interior``) or B keeps every loyal customer
  (``corner``).

The six linear-loyalty regions are the product of these regimes.  The
multiplicative model only reaches four of them and relabels them, the
additive model never reaches region VI.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import ThresholdOutsideSupport, UnsupportedDistribution
from .loyalty import Family, MarketParams, Side

LABELS = ("I", "II", "III", "IV", "V", "VI")

# Multiplicative-loyalty labels -> linear-loyalty labels with the same prices.
ML_TO_LL = {"I": "II", "II": "III", "III": "V", "IV": "VI"}
LL_TO_ML = {v: k for k, v in ML_TO_LL.items()}

ALPHA_REGIME = {"I": "retain", "IV": "retain", "II": "interior", "V": "interior", "III": "exit", "VI": "exit"}
BETA_REGIME = {"I": "corner", "II": "corner", "III": "corner", "IV": "interior", "V": "interior", "VI": "interior"}


@dataclass(frozen=True)
class Region:
    label: str
    family: Family
    canonical: str  # the linear-loyalty label carrying the same price formulas

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class PriceProfile:
    p_A_alpha: float
    p_A_beta: float
    p_B_beta: float
    p_B_alpha: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_A_alpha, self.p_A_beta, self.p_B_beta, self.p_B_alpha)


@dataclass(frozen=True)
class EquilibriumOutcome:
    prices: PriceProfile
    region: Region | None
    xi_alpha: float
    xi_beta: float
    prob_stay_alpha: float
    prob_stay_beta: float
    demand_A_strong: float
    demand_A_weak: float
    demand_B_strong: float
    demand_B_weak: float
    profit_A: float
    profit_B: float

    @property
    def switch_alpha(self) -> float:
        return 1.0 - self.prob_stay_alpha

    @property
    def switch_beta(self) -> float:
        return 1.0 - self.prob_stay_beta

    @property
    def share_A(self) -> float:
        """Ex post share of firm A (both sub-markets)."""
        return self.demand_A_strong + self.demand_A_weak


def _require_uniform(params: MarketParams) -> None:
    if not params.shock.is_uniform01:
        raise UnsupportedDistribution("closed-form regions need a uniform [0, 1] loyalty shock")


def _decimal(x: float) -> Fraction:
    # Read a float as the shortest decimal that round-trips to it, so that
    # c_A=1.4, c_B=0.4 is a gap of exactly 1 rather than 1 - 2**-53.
    return Fraction(repr(float(x)))


def _exact(params: MarketParams):
    m = params.loyalty
    d = _decimal(params.c_A) - _decimal(params.c_B)
    return d, _decimal(m.l_alpha), _decimal(m.s_alpha), _decimal(m.l_beta), _decimal(m.s_beta)


def _ll_conditions(d, la, sa, lb, sb) -> dict[str, bool]:
    return {
        "I": lb - sb <= d <= sa - la,
        "II": max(lb - sb, sa - la) <= d <= sa + 2 * la,
        "III": max(lb - sb, sa + 2 * la) <= d,
        "IV": d <= min(sa - la, lb - sb),
        "V": sa - la <= d <= min(sa + 2 * la, lb - sb),
        "VI": sa + 2 * la <= d <= lb - sb,
    }


def _ml_conditions(d, la, lb) -> dict[str, bool]:
    return {
        "I": lb <= d <= 2 * la,
        "II": d >= max(2 * la, lb),
        "III": d <= min(2 * la, lb),
        "IV": 2 * la <= d <= lb,
    }


def classify_region(params: MarketParams) -> Region:
    """Region of the one-shot game; on a shared boundary the lowest label wins.

    The inequalities are evaluated in exact rational arithmetic on the
    decimal reading of each input (``repr`` of the float).
    """
    _require_uniform(params)
    d, la, sa, lb, sb = _exact(params)
    family = params.loyalty.family
    if family is Family.MULTIPLICATIVE:
        conditions = _ml_conditions(d, la, lb)
    else:
        conditions = _ll_conditions(d, la, sa, lb, sb)
    for label, holds in conditions.items():
        if holds:
            canonical = ML_TO_LL[label] if family is Family.MULTIPLICATIVE else label
            return Region(label, family, canonical)
    raise AssertionError(f"no region matched {params!r}")  # regions are exhaustive


def region_from_canonical(canonical: str, family: Family) -> Region:
    family = Family(family)
    if family is Family.MULTIPLICATIVE:
        if canonical not in LL_TO_ML:
            raise ValueError(f"multiplicative loyalty has no region matching {canonical}")
        return Region(LL_TO_ML[canonical], family, canonical)
    if family is Family.ADDITIVE and canonical == "VI":
        raise ValueError("region VI is empty under additive loyalty")
    return Region(canonical, family, canonical)


def region_prices(params: MarketParams, canonical: str) -> PriceProfile:
    """Closed-form prices of one (linear-loyalty labelled) region.

    Evaluated regardless of whether ``params`` actually lies in the region,
    which is what boundary-continuity checks need.
    """
    m = params.loyalty
    c_A, c_B = params.c_A, params.c_B
    la, sa, lb, sb = m.l_alpha, m.s_alpha, m.l_beta, m.s_beta

    alpha = ALPHA_REGIME[canonical]
    if alpha == "retain":
        p_A_alpha, p_B_alpha = c_B + sa, c_B
    elif alpha == "interior":
        p_A_alpha = (2 * c_A + c_B + sa + 2 * la) / 3
        p_B_alpha = (c_A + 2 * c_B - sa + la) / 3
    else:
        p_A_alpha, p_B_alpha = c_A, c_A - sa - la

    if BETA_REGIME[canonical] == "corner":
        p_A_beta, p_B_beta = c_A, c_A + sb
    else:
        p_A_beta = (c_B + 2 * c_A - sb + lb) / 3
        p_B_beta = (2 * c_B + c_A + sb + 2 * lb) / 3
    return PriceProfile(p_A_alpha, p_A_beta, p_B_beta, p_B_alpha)


def outcome_from_prices(params: MarketParams, prices: PriceProfile, region: Region | None = None,
                        xi_alpha: float | None = None, xi_beta: float | None = None) -> EquilibriumOutcome:
    """Thresholds, demands and profits implied by a price profile."""
    m, F = params.loyalty, params.shock.cdf
    if xi_alpha is None:
        xi_alpha = m.inverse(Side.ALPHA, prices.p_A_alpha - prices.p_B_alpha)
    if xi_beta is None:
        xi_beta = m.inverse(Side.BETA, prices.p_B_beta - prices.p_A_beta)
    F_a, F_b = F(xi_alpha), F(xi_beta)
    theta = params.theta0
    d_A_strong = theta * (1.0 - F_a)
    d_B_weak = theta * F_a
    d_B_strong = (1.0 - theta) * (1.0 - F_b)
    d_A_weak = (1.0 - theta) * F_b
    profit_A = (prices.p_A_alpha - params.c_A) * d_A_strong + (prices.p_A_beta - params.c_A) * d_A_weak
    profit_B = (prices.p_B_beta - params.c_B) * d_B_strong + (prices.p_B_alpha - params.c_B) * d_B_weak
    return EquilibriumOutcome(
        prices=prices, region=region, xi_alpha=xi_alpha, xi_beta=xi_beta,
        prob_stay_alpha=1.0 - F_a, prob_stay_beta=1.0 - F_b,
        demand_A_strong=d_A_strong, demand_A_weak=d_A_weak,
        demand_B_strong=d_B_strong, demand_B_weak=d_B_weak,
        profit_A=profit_A, profit_B=profit_B,
    )


def closed_form_equilibrium(params: MarketParams) -> EquilibriumOutcome:
    """Unique pure Nash equilibrium of the one-shot game (uniform shock)."""
    region = classify_region(params)
    prices = region_prices(params, region.canonical)
    m = params.loyalty
    # Corner regimes pin the thresholds exactly; computing them from the
    # prices would only add round-off.
    alpha = ALPHA_REGIME[region.canonical]
    if alpha == "retain":
        xi_alpha = 0.0
    elif alpha == "exit":
        xi_alpha = 1.0
    else:
        xi_alpha = m.inverse(Side.ALPHA, prices.p_A_alpha - prices.p_B_alpha)
    if BETA_REGIME[region.canonical] == "corner":
        xi_beta = 0.0
    else:
        xi_beta = m.inverse(Side.BETA, prices.p_B_beta - prices.p_A_beta)
    return outcome_from_prices(params, prices, region, xi_alpha, xi_beta)


def foc_residual(params: MarketParams, prices: PriceProfile) -> tuple[float, float, float, float]:
    """Residuals ``price - cost - markup`` of the unconstrained first-order conditions.

    Order follows :class:`PriceProfile`.  All four vanish at an interior
    equilibrium.
    """
    m, shock = params.loyalty, params.shock
    xi_a = m.inverse(Side.ALPHA, prices.p_A_alpha - prices.p_B_alpha)
    xi_b = m.inverse(Side.BETA, prices.p_B_beta - prices.p_A_beta)
    for name, xi in (("xi_alpha", xi_a), ("xi_beta", xi_b)):
        if not shock.inside(xi):
            raise ThresholdOutsideSupport(f"{name}={xi!r} is outside the shock support {shock.support}")
    F_a, f_a = shock.cdf(xi_a), shock.pdf(xi_a)
    F_b, f_b = shock.cdf(xi_b), shock.pdf(xi_b)
    la, lb = m.l_alpha, m.l_beta
    return (
        prices.p_A_alpha - params.c_A - (1.0 - F_a) * la / f_a,
        prices.p_A_beta - params.c_A - F_b * lb / f_b,
        prices.p_B_beta - params.c_B - (1.0 - F_b) * lb / f_b,
        prices.p_B_alpha - params.c_B - F_a * la / f_a,
    )


def solve_interior_foc(params: MarketParams) -> EquilibriumOutcome:
    """Interior-only root of the first-order conditions for any admissible shock.

    Each sub-market reduces to ``l*xi + s - gap = l*(1 - 2F(xi))/f(xi)``,
    which is monotone in ``xi`` when ``F/f`` and ``(F-1)/f`` increase.
    Raises :class:`ThresholdOutsideSupport` when the root is not interior,
    i.e. when cost constraints would bind.
    """
    m, shock = params.loyalty, params.shock
    lo, hi = shock.support
    eps = 1e-9 * (hi - lo)
    d = params.cost_gap

    def solve(l: float, s: float, gap: float) -> float:
        def g(xi: float) -> float:
            return l * xi + s - gap - l * (1.0 - 2.0 * shock.cdf(xi)) / shock.pdf(xi)

        a, b = lo + eps, hi - eps
        ga, gb = g(a), g(b)
        if ga > 0 or gb < 0:
            raise ThresholdOutsideSupport("first-order conditions have no interior root; a cost constraint binds")
        return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    xi_a = solve(m.l_alpha, m.s_alpha, d)
    xi_b = solve(m.l_beta, m.s_beta, -d)
    F_a, f_a = shock.cdf(xi_a), shock.pdf(xi_a)
    F_b, f_b = shock.cdf(xi_b), shock.pdf(xi_b)
    prices = PriceProfile(
        p_A_alpha=params.c_A + (1.0 - F_a) * m.l_alpha / f_a,
        p_A_beta=params.c_A + F_b * m.l_beta / f_b,
        p_B_beta=params.c_B + (1.0 - F_b) * m.l_beta / f_b,
        p_B_alpha=params.c_B + F_a * m.l_alpha / f_a,
    )
    return outcome_from_prices(params, prices, None, xi_a, xi_b)


def _submarket_profits(params: MarketParams, prices: PriceProfile):
    """Per-price profit terms; each depends on one own price and one rival price."""
    m, F, theta = params.loyalty, params.shock.cdf, params.theta0

    def a_alpha(p, rival):
        return (p - params.c_A) * theta * (1.0 - F(m.inverse(Side.ALPHA, p - rival)))

    def b_alpha(p, rival):
        return (p - params.c_B) * theta * F(m.inverse(Side.ALPHA, rival - p))

    def b_beta(p, rival):
        return (p - params.c_B) * (1.0 - theta) * (1.0 - F(m.inverse(Side.BETA, p - rival)))

    def a_beta(p, rival):
        return (p - params.c_A) * (1.0 - theta) * F(m.inverse(Side.BETA, rival - p))

    return [
        (a_alpha, prices.p_A_alpha, prices.p_B_alpha, params.c_A),
        (a_beta, prices.p_A_beta, prices.p_B_beta, params.c_A),
        (b_beta, prices.p_B_beta, prices.p_A_beta, params.c_B),
        (b_alpha, prices.p_B_alpha, prices.p_A_alpha, params.c_B),
    ]


def best_response_gap(params: MarketParams, prices: PriceProfile, grid_step: float,
                      price_lo: float, price_hi: float) -> float:
    """Largest single-price profit gain either firm finds on a price grid.

    Deviations below the deviating firm's own cost are excluded (they are
    infeasible in the firm's problem).  Zero up to grid resolution at a PNE.
    """
    if not grid_step > 0 or not price_hi >= price_lo:
        raise ValueError("empty price grid")
    grid = np.arange(price_lo, price_hi + 0.5 * grid_step, grid_step)
    if grid.size == 0:
        raise ValueError("empty price grid")
    gap = 0.0
    for profit, own, rival, cost in _submarket_profits(params, prices):
        feasible = grid[grid >= cost]
        if feasible.size == 0:
            continue
        best = float(np.max(profit(feasible, rival)))
        gap = max(gap, best - float(profit(own, rival)))
    return gap
