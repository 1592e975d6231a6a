"""Forward-looking (Markov) equilibrium with myopic customers.

Each firm values a customer by the state she is in (loyal to A or to B).
With a common discount factor ``delta`` the stationary prices solve a pair
of coupled equations in the switching thresholds ``(xi_alpha, xi_beta)``.
Given the thresholds, prices follow from the first-order conditions
shifted by the discounted value gaps, and the value functions from two
2x2 linear systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import AssumptionViolated, NoConvergence, ThresholdOutsideSupport
from .loyalty import MarketParams, Side
from .single_stage import PriceProfile

DAMPING = 0.5
TOL = 1e-12
MAX_ITER = 500
BRACKET_EPS = 1e-9
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ValueQuad:
    v_A_alpha: float
    v_A_beta: float
    v_B_beta: float
    v_B_alpha: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.v_A_alpha, self.v_A_beta, self.v_B_beta, self.v_B_alpha


@dataclass(frozen=True)
class MarkovSolution:
    thresholds: tuple[float, float]
    prices: PriceProfile
    values: ValueQuad
    value_gaps: tuple[float, float]
    residual_norm: float
    stationary_share: float
    iterations: int = 0

    @property
    def xi_alpha(self) -> float:
        return self.thresholds[0]

    @property
    def xi_beta(self) -> float:
        return self.thresholds[1]


def _dist_terms(params: MarketParams, xi: float) -> tuple[float, float]:
    shock = params.shock
    if not shock.inside(xi):
        raise ThresholdOutsideSupport(f"threshold {xi!r} is outside the open support {shock.support}")
    return float(shock.cdf(float(xi))), float(shock.pdf(float(xi)))


def _markups(params: MarketParams, xi_alpha: float, xi_beta: float):
    """Single-period markups (A alpha, A beta, B beta, B alpha) and the F values."""
    Fa, fa = _dist_terms(params, xi_alpha)
    Fb, fb = _dist_terms(params, xi_beta)
    la, lb = params.loyalty.l_alpha, params.loyalty.l_beta
    return (la * (1 - Fa) / fa, lb * Fb / fb, lb * (1 - Fb) / fb, la * Fa / fa), Fa, Fb


def price_from_thresholds(params: MarketParams, xi_alpha: float, xi_beta: float,
                          value_gaps: tuple[float, float]) -> PriceProfile:
    """Optimal prices given thresholds and value gaps (dV_A, dV_B)."""
    (m_Aa, m_Ab, m_Bb, m_Ba), _, _ = _markups(params, xi_alpha, xi_beta)
    shift_A = params.delta_A * value_gaps[0]
    shift_B = params.delta_B * value_gaps[1]
    return PriceProfile(
        params.c_A + m_Aa - shift_A,
        params.c_A + m_Ab - shift_A,
        params.c_B + m_Bb - shift_B,
        params.c_B + m_Ba - shift_B,
    )


def _switch_probs(params: MarketParams, xi_alpha: float, xi_beta: float) -> tuple[float, float]:
    return float(params.shock.cdf(float(xi_alpha))), float(params.shock.cdf(float(xi_beta)))


def value_gaps(params: MarketParams, prices: PriceProfile, xi_alpha: float, xi_beta: float) -> tuple[float, float]:
    """Closed-form ``V_A^alpha - V_A^beta`` and ``V_B^beta - V_B^alpha`` for stationary prices."""
    Fa, Fb = _switch_probs(params, xi_alpha, xi_beta)
    dA, dB = params.delta_A, params.delta_B
    gap_A = ((1 - Fa) * (prices.p_A_alpha - params.c_A) - Fb * (prices.p_A_beta - params.c_A)) \
        / (1 - dA + dA * (Fa + Fb))
    gap_B = ((1 - Fb) * (prices.p_B_beta - params.c_B) - Fa * (prices.p_B_alpha - params.c_B)) \
        / (1 - dB + dB * (Fa + Fb))
    return gap_A, gap_B


def solve_value_functions(params: MarketParams, prices: PriceProfile, xi_alpha: float, xi_beta: float) -> ValueQuad:
    """Discounted values of a customer in each state under stationary prices."""
    Fa, Fb = _switch_probs(params, xi_alpha, xi_beta)
    dA, dB = params.delta_A, params.delta_B
    mat_A = np.array([[1 - dA * (1 - Fa), -dA * Fa],
                      [-dA * Fb, 1 - dA * (1 - Fb)]])
    rhs_A = np.array([(1 - Fa) * (prices.p_A_alpha - params.c_A), Fb * (prices.p_A_beta - params.c_A)])
    mat_B = np.array([[1 - dB * (1 - Fb), -dB * Fb],
                      [-dB * Fa, 1 - dB * (1 - Fa)]])
    rhs_B = np.array([(1 - Fb) * (prices.p_B_beta - params.c_B), Fa * (prices.p_B_alpha - params.c_B)])
    try:
        v_A = np.linalg.solve(mat_A, rhs_A)
        v_B = np.linalg.solve(mat_B, rhs_B)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular value system: {exc}") from exc
    return ValueQuad(float(v_A[0]), float(v_A[1]), float(v_B[0]), float(v_B[1]))


def fixed_point_value_gaps(params: MarketParams, xi_alpha: float, xi_beta: float) -> tuple[float, float]:
    """Value gaps once prices are themselves built from those gaps.

    Substituting the price conditions into the gap formula, the discount
    terms cancel and the gap is the one-period markup difference.
    """
    (m_Aa, m_Ab, m_Bb, m_Ba), Fa, Fb = _markups(params, xi_alpha, xi_beta)
    return (1 - Fa) * m_Aa - Fb * m_Ab, (1 - Fb) * m_Bb - Fa * m_Ba


def _common_delta(params: MarketParams) -> float:
    if params.delta_A != params.delta_B:
        raise ValueError("the threshold equations need a common discount factor (delta_A == delta_B)")
    delta = params.delta_A
    if delta == 0.0:
        raise ValueError("delta = 0 is the myopic setting; use the myopic dynamics instead")
    return delta


def _residual_alpha(params: MarketParams, K: float, xa: float, xb: float) -> float:
    m = params.loyalty
    d = params.cost_gap
    la, sa, lb, sb = m.l_alpha, m.s_alpha, m.l_beta, m.s_beta
    Fa, fa = _dist_terms(params, xa)
    Fb, fb = _dist_terms(params, xb)
    lhs = (xa - (d - sa) / la) * (K + Fb + 1) + (2 * Fa - 1) / fa * (K + Fa + Fb) + Fa / fa
    rhs = (1 - Fb) * lb / (fb * la) - Fb * (lb / la * xb + d / la + sb / la)
    return lhs - rhs


def _residual_beta(params: MarketParams, K: float, xa: float, xb: float) -> float:
    m = params.loyalty
    d = -params.cost_gap
    la, sa, lb, sb = m.l_alpha, m.s_alpha, m.l_beta, m.s_beta
    Fa, fa = _dist_terms(params, xa)
    Fb, fb = _dist_terms(params, xb)
    lhs = (xb - (d - sb) / lb) * (K + Fa + 1) + (2 * Fb - 1) / fb * (K + Fa + Fb) + Fb / fb
    rhs = (1 - Fa) * la / (fa * lb) - Fa * (la / lb * xa + d / lb + sa / lb)
    return lhs - rhs


def threshold_residuals(params: MarketParams, xi_alpha: float, xi_beta: float) -> tuple[float, float]:
    """LHS - RHS of the two coupled threshold equations (zero at equilibrium)."""
    delta = _common_delta(params)
    K = (1 - delta) / delta
    return _residual_alpha(params, K, xi_alpha, xi_beta), _residual_beta(params, K, xi_alpha, xi_beta)


def consistency_residuals(params: MarketParams, xi_alpha: float, xi_beta: float) -> tuple[float, float]:
    """Thresholds implied by the recovered prices minus the thresholds themselves."""
    gaps = fixed_point_value_gaps(params, xi_alpha, xi_beta)
    p = price_from_thresholds(params, xi_alpha, xi_beta, gaps)
    m = params.loyalty
    return (m.inverse(Side.ALPHA, p.p_A_alpha - p.p_B_alpha) - xi_alpha,
            m.inverse(Side.BETA, p.p_B_beta - p.p_A_beta) - xi_beta)


def _root_1d(fn, lo: float, hi: float) -> tuple[float, bool]:
    """Root of an increasing ``fn`` on [lo, hi]; clamps to an endpoint when there is none."""
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo > 0:
        return lo, True
    if f_hi < 0:
        return hi, True
    if f_lo == 0:
        return lo, False
    if f_hi == 0:
        return hi, False
    return brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200), False


def _newton_polish(params: MarketParams, K: float, xa: float, xb: float, lo: float, hi: float,
                   steps: int = 4) -> tuple[float, float]:
    """A few finite-difference Newton steps, kept only while they shrink the residual."""

    def res(a, b):
        return np.array([_residual_alpha(params, K, a, b), _residual_beta(params, K, a, b)])

    x = np.array([xa, xb])
    r = res(*x)
    for _ in range(steps):
        h = 1e-7
        jac = np.column_stack([(res(x[0] + h, x[1]) - r) / h, (res(x[0], x[1] + h) - r) / h])
        try:
            trial = x - np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            break
        if not (lo <= trial[0] <= hi and lo <= trial[1] <= hi):
            break
        r_trial = res(*trial)
        if np.max(np.abs(r_trial)) >= np.max(np.abs(r)):
            break
        x, r = trial, r_trial
    return float(x[0]), float(x[1])


def _solve_thresholds(params: MarketParams, initial=None) -> tuple[float, float, bool, int]:
    delta = _common_delta(params)
    K = (1 - delta) / delta
    lo_s, hi_s = params.shock.support
    lo, hi = lo_s + BRACKET_EPS, hi_s - BRACKET_EPS
    if initial is None:
        xa = xb = 0.5 * (lo_s + hi_s)
    else:
        xa, xb = (min(max(float(v), lo), hi) for v in initial)
    clamped = False
    for it in range(1, MAX_ITER + 1):
        ra, ca = _root_1d(lambda x: _residual_alpha(params, K, x, xb), lo, hi)
        xa_new = xa + DAMPING * (ra - xa)
        rb, cb = _root_1d(lambda x: _residual_beta(params, K, xa_new, x), lo, hi)
        xb_new = xb + DAMPING * (rb - xb)
        step = max(abs(xa_new - xa), abs(xb_new - xb))
        xa, xb = xa_new, xb_new
        clamped = ca or cb
        if step < TOL:
            if not clamped:
                xa, xb = _newton_polish(params, K, xa, xb, lo, hi)
            return xa, xb, clamped, it
    raise NoConvergence(f"threshold iteration did not converge in {MAX_ITER} steps", last=(xa, xb))


def _build_solution(params: MarketParams, xa: float, xb: float, iterations: int) -> MarkovSolution:
    gaps = fixed_point_value_gaps(params, xa, xb)
    prices = price_from_thresholds(params, xa, xb, gaps)
    values = solve_value_functions(params, prices, xa, xb)
    Fa, Fb = _switch_probs(params, xa, xb)
    residual = max(abs(r) for r in consistency_residuals(params, xa, xb))
    return MarkovSolution((xa, xb), prices, values, gaps, residual, Fb / (Fa + Fb), iterations)


def _violations(params: MarketParams, p: PriceProfile) -> list[str]:
    out = []
    if not p.p_A_alpha >= p.p_A_beta:
        out.append("p_A_alpha < p_A_beta")
    if not p.p_A_beta >= params.c_A:
        out.append("p_A_beta < c_A")
    if not p.p_B_beta >= p.p_B_alpha:
        out.append("p_B_beta < p_B_alpha")
    if not p.p_B_alpha >= params.c_B:
        out.append("p_B_alpha < c_B")
    return out


def solve_markov(params: MarketParams, initial=None) -> MarkovSolution:
    """Unconstrained Markov equilibrium by damped alternating 1-D root finding.

    Raises :class:`AssumptionViolated` (with the recovered solution attached)
    when a threshold is pushed to the edge of the support or the recovered
    prices break ``p_A^alpha >= p_A^beta >= c_A`` / ``p_B^beta >= p_B^alpha >= c_B``.
    """
    xa, xb, clamped, iterations = _solve_thresholds(params, initial)
    if clamped:
        raise AssumptionViolated("threshold reached the edge of the shock support", solution=(xa, xb))
    sol = _build_solution(params, xa, xb, iterations)
    broken = _violations(params, sol.prices)
    if broken:
        raise AssumptionViolated("price constraints bind: " + ", ".join(broken), solution=sol)
    if not sol.residual_norm <= RESIDUAL_TOL:
        raise NoConvergence(f"residual {sol.residual_norm:.3g} above tolerance", last=sol)
    return sol


@dataclass(frozen=True)
class OracleSolution:
    prices: PriceProfile
    values: ValueQuad
    thresholds: tuple[float, float]
    iterations: int
    cycle_length: int = 1  # >1 when the policy alternates between neighbouring grid points


def _best_on_grid(objective: np.ndarray, grid: np.ndarray) -> float:
    return float(grid[int(np.argmax(objective))])


def value_iteration_oracle(params: MarketParams, price_grid, max_outer: int = 500,
                           max_inner: int = 500) -> OracleSolution:
    """Dynamic-programming check of the Markov prices on a finite price grid.

    Alternates grid best responses (given continuation values) with exact
    policy evaluation until the joint pricing policy stops changing.  Near
    large discount factors the grid argmax can flip between two adjacent
    points forever; a revisited policy ends the loop and the cycle length is
    reported.
    """
    grid = np.asarray(price_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("price_grid must be a non-empty 1-D sequence")
    m = params.loyalty
    shock = params.shock
    cA, cB, dA, dB = params.c_A, params.c_B, params.delta_A, params.delta_B

    def stay_alpha(pA, pB):
        return 1.0 - shock.cdf(m.inverse(Side.ALPHA, pA - pB))

    def stay_beta(pB, pA):
        return 1.0 - shock.cdf(m.inverse(Side.BETA, pB - pA))

    mid = float(grid[grid.size // 2])
    p = [mid, mid, mid, mid]  # A alpha, A beta, B beta, B alpha
    gA = gB = 0.0
    seen: dict[tuple, int] = {}
    for outer in range(1, max_outer + 1):
        for _ in range(max_inner):
            before = tuple(p)
            p[0] = _best_on_grid(stay_alpha(grid, p[3]) * (grid - cA + dA * gA), grid)
            p[3] = _best_on_grid((1.0 - stay_alpha(p[0], grid)) * (grid - cB + dB * gB), grid)
            p[2] = _best_on_grid(stay_beta(grid, p[1]) * (grid - cB + dB * gB), grid)
            p[1] = _best_on_grid((1.0 - stay_beta(p[2], grid)) * (grid - cA + dA * gA), grid)
            if tuple(p) == before:
                break
        prices = PriceProfile(*p)
        xa = m.inverse(Side.ALPHA, p[0] - p[3])
        xb = m.inverse(Side.BETA, p[2] - p[1])
        values = solve_value_functions(params, prices, xa, xb)
        gA = values.v_A_alpha - values.v_A_beta
        gB = values.v_B_beta - values.v_B_alpha
        key = tuple(p)
        if key in seen:
            return OracleSolution(prices, values, (xa, xb), outer, outer - seen[key])
        seen[key] = outer
    raise NoConvergence("value iteration did not settle on a stable policy", last=PriceProfile(*p))


def bellman_residual(params: MarketParams, prices: PriceProfile, values: ValueQuad) -> float:
    """Largest violation of the four Bellman equations at stationary prices."""
    m = params.loyalty
    Fa = float(params.shock.cdf(m.inverse(Side.ALPHA, prices.p_A_alpha - prices.p_B_alpha)))
    Fb = float(params.shock.cdf(m.inverse(Side.BETA, prices.p_B_beta - prices.p_A_beta)))
    v = values
    dA, dB = params.delta_A, params.delta_B
    r = (
        (1 - Fa) * (prices.p_A_alpha - params.c_A + dA * v.v_A_alpha) + Fa * dA * v.v_A_beta - v.v_A_alpha,
        Fb * (prices.p_A_beta - params.c_A + dA * v.v_A_alpha) + (1 - Fb) * dA * v.v_A_beta - v.v_A_beta,
        (1 - Fb) * (prices.p_B_beta - params.c_B + dB * v.v_B_beta) + Fb * dB * v.v_B_alpha - v.v_B_beta,
        Fa * (prices.p_B_alpha - params.c_B + dB * v.v_B_beta) + (1 - Fa) * dB * v.v_B_alpha - v.v_B_alpha,
    )
    return max(abs(x) for x in r)
