"""Logit quantal-response equilibria of the price-constrained dynamic game.

The price space is discretized per firm and customer state, with every grid
price at or above the owning firm's cost.  Mixed Markov strategies are
traced along an increasing logit precision ``lambda``: at ``lambda = 0``
play is uniform, and as ``lambda`` grows the fixed point approaches a Markov
equilibrium of the constrained game.

Action arrays are indexed ``[i, j]`` with ``i`` firm A's action and ``j``
firm B's action in both states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import root
from scipy.special import log_softmax

from .errors import NoConvergence
from .loyalty import MarketParams, Side
from .markov import ValueQuad
from .single_stage import PriceProfile

DAMPING = 0.5
TOL = 1e-10
MAX_ITER = 10_000
DEFAULT_POINTS = 101
# tried in turn when the default damping cycles instead of converging
FALLBACK_DAMPING = (0.25, 0.1, 0.03, 0.01)

# order used for every 4-tuple below, matching PriceProfile
KEYS = ("A_alpha", "A_beta", "B_beta", "B_alpha")


def default_schedule(lo: float = 1e-2, hi: float = 1e4, steps: int = 80) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(lo, hi, steps)])


@dataclass(frozen=True)
class DiscretizedGame:
    """Two-state pricing game on finite grids.

    ``stay_alpha[i, j]`` is the chance an alpha customer stays with A when A
    posts ``grid_A_alpha[i]`` and B posts ``grid_B_alpha[j]``; ``stay_beta``
    is the chance a beta customer stays with B.
    """

    params: MarketParams
    grid_A_alpha: np.ndarray
    grid_A_beta: np.ndarray
    grid_B_beta: np.ndarray
    grid_B_alpha: np.ndarray
    stay_alpha: np.ndarray
    stay_beta: np.ndarray

    @property
    def grids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.grid_A_alpha, self.grid_A_beta, self.grid_B_beta, self.grid_B_alpha

    @property
    def delta_A(self) -> float:
        return self.params.delta_A

    @property
    def delta_B(self) -> float:
        return self.params.delta_B

    def margins(self):
        p = self.params
        return (self.grid_A_alpha - p.c_A, self.grid_A_beta - p.c_A,
                self.grid_B_beta - p.c_B, self.grid_B_alpha - p.c_B)


@dataclass(frozen=True)
class QreProfile:
    """Mixed strategies per (firm, state) in ``KEYS`` order, plus state values."""

    distributions: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    temperature: float
    values: ValueQuad

    def distribution(self, key: str) -> np.ndarray:
        return self.distributions[KEYS.index(key)]


def _grid(lo: float, hi: float, points: int) -> np.ndarray:
    return np.linspace(lo, hi, points)


def build_discretized_game(params: MarketParams, grid_spec=DEFAULT_POINTS) -> DiscretizedGame:
    """Build the discretized game.

    ``grid_spec`` is either a point count (uniform grids from each firm's
    cost to ``max(c_A, c_B) + s + 2 l + 1`` of the state's loyalty terms) or a
    4-tuple of explicit grids in ``KEYS`` order.
    """
    m = params.loyalty
    if isinstance(grid_spec, (int, np.integer)):
        points = int(grid_spec)
        if points < 2:
            raise ValueError("grids need at least 2 points")
        top = max(params.c_A, params.c_B) + 1.0
        hi_a = top + m.s_alpha + 2 * m.l_alpha
        hi_b = top + m.s_beta + 2 * m.l_beta
        grids = (_grid(params.c_A, hi_a, points), _grid(params.c_A, hi_b, points),
                 _grid(params.c_B, hi_b, points), _grid(params.c_B, hi_a, points))
    else:
        grids = tuple(np.asarray(g, dtype=float) for g in grid_spec)
        if len(grids) != 4 or any(g.ndim != 1 or g.size == 0 for g in grids):
            raise ValueError("explicit grid_spec must be four non-empty 1-D grids")
    costs = (params.c_A, params.c_A, params.c_B, params.c_B)
    for key, g, c in zip(KEYS, grids, costs):
        if np.any(g < c):
            raise ValueError(f"grid for {key} has prices below cost {c}")
        if np.any(~np.isfinite(g)):
            raise ValueError(f"grid for {key} is not finite")
    gAa, gAb, gBb, gBa = grids
    stay_alpha = 1.0 - params.shock.cdf(m.inverse(Side.ALPHA, gAa[:, None] - gBa[None, :]))
    stay_beta = 1.0 - params.shock.cdf(m.inverse(Side.BETA, gBb[None, :] - gAb[:, None]))
    return DiscretizedGame(params, gAa, gAb, gBb, gBa, np.asarray(stay_alpha, dtype=float),
                           np.asarray(stay_beta, dtype=float))


def uniform_profile(game: DiscretizedGame) -> tuple[np.ndarray, ...]:
    return tuple(np.full(g.size, 1.0 / g.size) for g in game.grids)


def stage_rewards(game: DiscretizedGame, dists):
    """Expected one-period profits (A alpha, A beta, B beta, B alpha) and stay probabilities."""
    pAa, pAb, pBb, pBa = dists
    mAa, mAb, mBb, mBa = game.margins()
    Sa, Sb = game.stay_alpha, game.stay_beta
    sa = float(pAa @ Sa @ pBa)
    sb = float(pAb @ Sb @ pBb)
    rewards = (float((pAa * mAa) @ Sa @ pBa), float((pAb * mAb) @ (1.0 - Sb) @ pBb),
               float(pAb @ Sb @ (pBb * mBb)), float(pAa @ (1.0 - Sa) @ (pBa * mBa)))
    return rewards, sa, sb


def evaluate_policy(game: DiscretizedGame, dists) -> ValueQuad:
    """Exact discounted state values of both firms under stationary mixed play."""
    (rA_alpha, rA_beta, rB_beta, rB_alpha), sa, sb = stage_rewards(game, dists)
    v_A = _solve2(game.delta_A, sa, sb, rA_alpha, rA_beta)
    v_B = _solve2(game.delta_B, sb, sa, rB_beta, rB_alpha)
    return ValueQuad(v_A[0], v_A[1], v_B[0], v_B[1])


def _solve2(delta: float, keep_own: float, keep_other: float, r_own: float, r_other: float):
    """Values in the firm's own state and the rival's state for a two-state chain.

    ``keep_own`` is the chance the customer stays in the firm's state,
    ``keep_other`` the chance she stays in the rival's.  The system is
    strictly diagonally dominant for delta < 1, so Cramer's rule is safe.
    """
    a, b = 1.0 - delta * keep_own, -delta * (1.0 - keep_own)
    c, d = -delta * (1.0 - keep_other), 1.0 - delta * keep_other
    det = a * d - b * c
    return float((r_own * d - b * r_other) / det), float((a * r_other - c * r_own) / det)


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x))
    return z / z.sum()


def action_values(game: DiscretizedGame, dists, values: ValueQuad):
    """One-shot deviation values per action, in ``KEYS`` order."""
    pAa, pAb, pBb, pBa = dists
    mAa, mAb, mBb, mBa = game.margins()
    Sa, Sb = game.stay_alpha, game.stay_beta
    dA, dB = game.delta_A, game.delta_B
    v = values
    # A in alpha keeps the customer with prob Sa
    qAa = (Sa @ pBa) * (mAa + dA * v.v_A_alpha) + (1.0 - Sa @ pBa) * dA * v.v_A_beta
    # A in beta wins the customer with prob 1 - Sb
    win_b = 1.0 - Sb @ pBb
    qAb = win_b * (mAb + dA * v.v_A_alpha) + (1.0 - win_b) * dA * v.v_A_beta
    keep_b = pAb @ Sb
    qBb = keep_b * (mBb + dB * v.v_B_beta) + (1.0 - keep_b) * dB * v.v_B_alpha
    win_a = 1.0 - pAa @ Sa
    qBa = win_a * (mBa + dB * v.v_B_beta) + (1.0 - win_a) * dB * v.v_B_alpha
    return qAa, qAb, qBb, qBa


def _respond(game: DiscretizedGame, dists, temperature: float):
    values = evaluate_policy(game, dists)
    q = action_values(game, dists, values)
    return tuple(_softmax(temperature * qi) for qi in q), values


def logit_response(game: DiscretizedGame, profile: QreProfile, temperature: float) -> QreProfile:
    """Softmax response to ``profile`` at precision ``temperature`` (0 gives uniform play)."""
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    dists, _ = _respond(game, profile.distributions, temperature)
    return QreProfile(dists, float(temperature), evaluate_policy(game, dists))


STALL_WINDOW = 500


def _solve_at(game: DiscretizedGame, dists, temperature: float, damping: float, tol: float, max_iter: int):
    """Damped fixed-point iteration; gives up early once the step stops shrinking."""
    checkpoint = np.inf
    for it in range(max_iter):
        resp, _ = _respond(game, dists, temperature)
        diff = max(float(np.max(np.abs(r - d))) for r, d in zip(resp, dists))
        if diff <= tol:
            return resp, True
        if it % STALL_WINDOW == 0:
            if diff > 0.9 * checkpoint:
                break
            checkpoint = diff
        dists = tuple((1.0 - damping) * d + damping * r for d, r in zip(dists, resp))
    return dists, False


def _split(x: np.ndarray, sizes) -> list[np.ndarray]:
    return np.split(x, np.cumsum(sizes)[:-1])


def _solve_root(game: DiscretizedGame, dists, temperature: float, tol: float):
    """Fixed point in log-probabilities with a quasi-Newton root finder.

    Solves ``x = log_softmax(lambda * Q(softmax(x)))`` blockwise, which has a
    nonsingular Jacobian (unlike the normalized-probability form).
    """
    sizes = [g.size for g in game.grids]

    def log_response(x):
        probs = tuple(_softmax(b) for b in _split(x, sizes))
        q = action_values(game, probs, evaluate_policy(game, probs))
        return np.concatenate([log_softmax(temperature * qi) for qi in q])

    x0 = log_response(np.concatenate([np.log(np.maximum(d, 1e-300)) for d in dists]))
    sol = root(lambda x: x - log_response(x), x0, method="hybr", options={"xtol": 1e-13})
    trial = tuple(_softmax(b) for b in _split(sol.x, sizes))
    resp, _ = _respond(game, trial, temperature)
    ok = max(float(np.max(np.abs(r - d))) for r, d in zip(resp, trial)) <= tol
    return (resp if ok else dists), ok


def trace_homotopy(game: DiscretizedGame, schedule=None, damping: float = DAMPING, tol: float = TOL,
                   max_iter: int = MAX_ITER, callback=None) -> QreProfile:
    """Follow logit QRE fixed points along an increasing precision schedule.

    Each fixed point is found by damped iteration warm-started from the
    previous one.  If the iteration cycles, a quasi-Newton solve in
    log-probabilities and then smaller damping factors are tried before
    giving up.  On failure :class:`NoConvergence` carries the last
    converged profile (``.last``) and the failing precision (``.temperature``).
    """
    schedule = default_schedule() if schedule is None else np.asarray(schedule, dtype=float)
    if schedule.size == 0 or np.any(np.diff(schedule) < 0) or schedule[0] < 0:
        raise ValueError("schedule must be a non-empty, nondecreasing sequence of nonnegative precisions")
    dists = uniform_profile(game)
    last = None
    ladder = (damping,) + tuple(w for w in FALLBACK_DAMPING if w < damping)
    for lam in schedule:
        trial, ok = _solve_at(game, dists, float(lam), damping, tol, max_iter)
        if not ok:
            trial, ok = _solve_root(game, dists, float(lam), tol)
        for w in ladder[1:]:
            if ok:
                break
            trial, ok = _solve_at(game, dists, float(lam), w, tol, max_iter)
        if ok:
            dists = trial
        if not ok:
            err = NoConvergence(f"QRE iteration did not converge at precision {lam:g}", last=last)
            err.temperature = float(lam)
            raise err
        last = QreProfile(dists, float(lam), evaluate_policy(game, dists))
        if callback is not None:
            callback(last)
    return last


def markov_gap(game: DiscretizedGame, profile: QreProfile) -> float:
    """Largest one-shot deviation gain over firms and states under ``profile``."""
    values = evaluate_policy(game, profile.distributions)
    q = action_values(game, profile.distributions, values)
    return max(float(np.max(qi) - qi @ d) for qi, d in zip(q, profile.distributions))


def modal_prices(game: DiscretizedGame, profile: QreProfile) -> PriceProfile:
    """Most likely grid price per (firm, state); ties go to the lower price."""
    return PriceProfile(*(float(g[int(np.argmax(d))]) for g, d in zip(game.grids, profile.distributions)))


def mean_prices(game: DiscretizedGame, profile: QreProfile) -> PriceProfile:
    return PriceProfile(*(float(g @ d) for g, d in zip(game.grids, profile.distributions)))


def switch_probabilities(game: DiscretizedGame, profile: QreProfile) -> tuple[float, float]:
    """Expected switching probabilities (alpha, beta) under the mixed profile."""
    _, sa, sb = stage_rewards(game, profile.distributions)
    return 1.0 - sa, 1.0 - sb
