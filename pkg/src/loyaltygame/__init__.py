"""Equilibrium prices, shares and profits for a duopoly with loyal customers.

Single-period closed forms, myopic share dynamics, the forward-looking
Markov equilibrium and a logit-QRE solver for the price-constrained game.
"""

from .errors import AssumptionViolated, NoConvergence, ThresholdOutsideSupport, UnsupportedDistribution
from .loyalty import Family, LoyaltyModel, MarketParams, ShockDistribution, Side
from .markov import MarkovSolution, ValueQuad, solve_markov
from .myopic import ShareTrajectory, trajectory_closed_form, trajectory_recursion
from .single_stage import EquilibriumOutcome, PriceProfile, Region, classify_region, closed_form_equilibrium

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated", "NoConvergence", "ThresholdOutsideSupport", "UnsupportedDistribution",
    "Family", "LoyaltyModel", "MarketParams", "ShockDistribution", "Side",
    "MarkovSolution", "ValueQuad", "solve_markov",
    "ShareTrajectory", "trajectory_closed_form", "trajectory_recursion",
    "EquilibriumOutcome", "PriceProfile", "Region", "classify_region", "closed_form_equilibrium",
]
