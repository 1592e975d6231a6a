"""Loyalty models, loyalty-shock distributions and market parameters.

A customer in firm A's strong sub-market (set alpha) stays with A when the
loyalty level ``g_alpha(xi) = l_alpha * xi + s_alpha`` covers the premium
``p_A^alpha - p_B^alpha``; set beta is the mirror image for firm B.  The
multiplicative (``s = 0``) and additive (``l = 1``) models are the same
linear family with constrained parameters, so every solver downstream is
written once in terms of ``(l, s)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats


class Family(str, enum.Enum):
    LINEAR = "linear"
    MULTIPLICATIVE = "multiplicative"
    ADDITIVE = "additive"


class Side(str, enum.Enum):
    ALPHA = "alpha"
    BETA = "beta"


@dataclass(frozen=True)
class LoyaltyModel:
    """Affine loyalty functions for the two sub-markets."""

    l_alpha: float
    s_alpha: float
    l_beta: float
    s_beta: float
    family: Family = Family.LINEAR

    def __post_init__(self) -> None:
        for name in ("l_alpha", "s_alpha", "l_beta", "s_beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "family", Family(self.family))
        if self.l_alpha <= 0 or self.l_beta <= 0:
            raise ValueError("loyalty slopes l_alpha and l_beta must be positive")
        if self.s_alpha < 0 or self.s_beta < 0:
            raise ValueError("loyalty biases s_alpha and s_beta must be nonnegative")
        if self.family is Family.MULTIPLICATIVE and (self.s_alpha != 0 or self.s_beta != 0):
            raise ValueError("multiplicative loyalty requires s_alpha = s_beta = 0")
        if self.family is Family.ADDITIVE and (self.l_alpha != 1 or self.l_beta != 1):
            raise ValueError("additive loyalty requires l_alpha = l_beta = 1")

    @classmethod
    def linear(cls, l_alpha: float, s_alpha: float, l_beta: float, s_beta: float) -> "LoyaltyModel":
        return cls(l_alpha, s_alpha, l_beta, s_beta, Family.LINEAR)

    @classmethod
    def multiplicative(cls, l_alpha: float, l_beta: float) -> "LoyaltyModel":
        return cls(l_alpha, 0.0, l_beta, 0.0, Family.MULTIPLICATIVE)

    @classmethod
    def additive(cls, s_alpha: float, s_beta: float) -> "LoyaltyModel":
        return cls(1.0, s_alpha, 1.0, s_beta, Family.ADDITIVE)

    def slope(self, side: Side) -> float:
        return self.l_alpha if Side(side) is Side.ALPHA else self.l_beta

    def bias(self, side: Side) -> float:
        return self.s_alpha if Side(side) is Side.ALPHA else self.s_beta

    def forward(self, side: Side, xi):
        """Loyalty level ``g_side(xi)``."""
        return self.slope(side) * xi + self.bias(side)

    def inverse(self, side: Side, price_gap):
        """Threshold ``h_side(gap) = (gap - s) / l`` for a premium ``gap``."""
        return (price_gap - self.bias(side)) / self.slope(side)

    def inverse_slope(self, side: Side) -> float:
        return 1.0 / self.slope(side)

    def as_linear(self) -> "LoyaltyModel":
        return replace(self, family=Family.LINEAR)


class ShockKind(str, enum.Enum):
    UNIFORM01 = "uniform01"
    TRUNCATED_NORMAL = "truncated_normal"


@dataclass(frozen=True)
class ShockDistribution:
    """Distribution of the idiosyncratic loyalty shock ``xi``.

    ``cdf`` is clamped to 0/1 outside the support and ``pdf`` is 0 there.
    """

    kind: ShockKind = ShockKind.UNIFORM01
    mean: float = 0.5
    stddev: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    _dist: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ShockKind(self.kind))
        if self.kind is ShockKind.UNIFORM01:
            object.__setattr__(self, "lo", 0.0)
            object.__setattr__(self, "hi", 1.0)
            return
        if not (self.stddev > 0 and self.lo < self.hi):
            raise ValueError("truncated normal needs stddev > 0 and lo < hi")
        a = (self.lo - self.mean) / self.stddev
        b = (self.hi - self.mean) / self.stddev
        object.__setattr__(self, "_dist", stats.truncnorm(a, b, loc=self.mean, scale=self.stddev))

    @classmethod
    def uniform01(cls) -> "ShockDistribution":
        return cls(ShockKind.UNIFORM01)

    @classmethod
    def truncated_normal(cls, mean: float, stddev: float, lo: float, hi: float) -> "ShockDistribution":
        return cls(ShockKind.TRUNCATED_NORMAL, float(mean), float(stddev), float(lo), float(hi))

    @property
    def is_uniform01(self) -> bool:
        return self.kind is ShockKind.UNIFORM01

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def cdf(self, x):
        if self.is_uniform01:
            if isinstance(x, float):
                return min(max(x, 0.0), 1.0)
            return np.clip(x, 0.0, 1.0)
        out = np.clip(self._dist.cdf(x), 0.0, 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def pdf(self, x):
        if self.is_uniform01:
            if isinstance(x, float):
                return 1.0 if 0.0 <= x <= 1.0 else 0.0
            x = np.asarray(x, dtype=float)
            return np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0)
        out = self._dist.pdf(x)
        return float(out) if np.ndim(out) == 0 else out

    def inside(self, x: float) -> bool:
        """True when ``x`` is strictly inside the support (density positive)."""
        return self.lo < x < self.hi


UNIFORM01 = ShockDistribution.uniform01()


@dataclass(frozen=True)
class MarketParams:
    """Costs, initial share, discount factors and the loyalty primitives.

    Firm A is the high-cost firm: ``c_A >= c_B >= 0`` is enforced rather than
    silently relabelled.
    """

    c_A: float
    c_B: float
    loyalty: LoyaltyModel
    theta0: float = 0.5
    delta_A: float = 0.0
    delta_B: float = 0.0
    shock: ShockDistribution = UNIFORM01

    def __post_init__(self) -> None:
        for name in ("c_A", "c_B", "theta0", "delta_A", "delta_B"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if not self.c_A >= self.c_B >= 0:
            raise ValueError(f"costs must satisfy c_A >= c_B >= 0, got c_A={self.c_A}, c_B={self.c_B}")
        if not 0.0 <= self.theta0 <= 1.0:
            raise ValueError(f"theta0 must lie in [0, 1], got {self.theta0}")
        for name in ("delta_A", "delta_B"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {getattr(self, name)}")

    @property
    def cost_gap(self) -> float:
        return self.c_A - self.c_B

    @property
    def delta(self) -> float:
        """Common discount factor; only defined when both firms share it."""
        if self.delta_A != self.delta_B:
            raise ValueError("firms use different discount factors")
        return self.delta_A

    def with_cost_gap(self, gap: float) -> "MarketParams":
        return replace(self, c_A=self.c_B + gap)

    def replace(self, **changes) -> "MarketParams":
        return replace(self, **changes)


def loyalty_inverse(model: LoyaltyModel, side: Side, price_gap: float) -> float:
    return model.inverse(side, price_gap)


def loyalty_inverse_slope(model: LoyaltyModel, side: Side) -> float:
    return model.inverse_slope(side)


def switch_probability(params: MarketParams, side: Side, own_price, rival_price):
    """Probability that a customer of ``side`` leaves her preferred firm.

    ``own_price`` is the preferred firm's price (A for alpha, B for beta).
    """
    xi = params.loyalty.inverse(side, own_price - rival_price)
    return params.shock.cdf(xi)


def purchase_probability(params: MarketParams, side: Side, own_price, rival_price):
    """Probability that a customer of ``side`` stays with her preferred firm."""
    return 1.0 - switch_probability(params, side, own_price, rival_price)
