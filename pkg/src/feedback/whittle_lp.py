"""Upper bounds on the optimal average reward: the truncated Whittle LP and its Lagrangean."""
import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from src.core.beliefs import belief_u_array, belief_v_array, mixing_time
from src.core.errors import ParameterOutOfRange
from src.core.settings import section
from src.feedback.single_arm import (
    never_play_threshold, policy_playrate_Q, policy_reward_R, single_arm_optimum,
)
from src.lp.model import LE, EQ, MAX, LpModel
from src.lp.simplex import lp_solve

# --- Configuration ---
_FEEDBACK = section("feedback")
TMAX_CAP = _FEEDBACK["tmax_cap"]
MIXING_TOL = _FEEDBACK["mixing_tol"]
LAGRANGE_ITERATIONS = _FEEDBACK["lagrange_iterations"]
MAX_LP_COLUMNS = 200_000
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

logger = logging.getLogger(__name__)


def default_tmax(arms, tol=MIXING_TOL, cap=TMAX_CAP):
    """Smallest T with ν^T ≤ tol for every arm, capped."""
    return max(mixing_time(arm, tol, cap) for arm in arms)


def build_whittle_lp(arms, T_max, M=1):
    """Whittle LP over play rates x[i, s, t] for t ≤ T_max.

    Ages past T_max are merged into an absorbing state t = T_max whose beliefs
    stay frozen at u_T, v_T: x[i, s, T_max] counts plays at any age ≥ T_max and
    w[i, s] the idle steps the arm loops in that state.

    Rows: total plays ≤ M, per-arm time occupancy Σ t·x + Σ w = 1, and per-arm
    balance of good→bad and bad→good observations.
    """
    if T_max < 1:
        raise ParameterOutOfRange(f"T_max = {T_max} must be >= 1")
    ts = np.arange(1, T_max + 1, dtype=float)
    model = LpModel(sense=MAX, name=f"whittle_feedback_n{len(arms)}_T{T_max}")
    columns = []
    for i, arm in enumerate(arms):
        g_cols = [model.add_variable(f"x_{i}_g_{t}", cost=arm.r) for t in range(1, T_max + 1)]
        b_cols = [model.add_variable(f"x_{i}_b_{t}") for t in range(1, T_max + 1)]
        loops = [model.add_variable(f"w_{i}_{s}") for s in ("g", "b")]
        columns.append((g_cols, b_cols, loops))
    model.add_constraint({j: 1.0 for g, b, _ in columns for j in g + b}, LE, float(M), name="plays")
    for i, arm in enumerate(arms):
        g_cols, b_cols, loops = columns[i]
        u = belief_u_array(arm, ts)
        v = belief_v_array(arm, ts)
        occupancy = {j: t for j, t in zip(g_cols, ts)}
        occupancy.update({j: t for j, t in zip(b_cols, ts)})
        occupancy.update({j: 1.0 for j in loops})
        model.add_constraint(occupancy, EQ, 1.0, name=f"time_{i}")
        flow = {j: 1.0 - ut for j, ut in zip(g_cols, u)}
        flow.update({j: -vt for j, vt in zip(b_cols, v)})
        model.add_constraint(flow, EQ, 0.0, name=f"flow_{i}")
    return model


def _grouped_excess(groups, lam):
    return sum(count * single_arm_optimum(arm, lam)[0] for arm, count in groups.items())


def lagrangean_upper_bound(arms, M=1, iterations=LAGRANGE_ITERATIONS):
    """min_λ M·λ + Σ_i H_i(λ) by golden-section search; identical arms are evaluated once."""
    groups = Counter(arms)
    lo, hi = 0.0, max(never_play_threshold(arm) for arm in arms)
    if hi <= 0:
        return 0.0, 0.0

    def value(lam):
        return M * lam + _grouped_excess(groups, lam)

    a = hi - GOLDEN * (hi - lo)
    b = lo + GOLDEN * (hi - lo)
    fa, fb = value(a), value(b)
    for _ in range(iterations):
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - GOLDEN * (hi - lo)
            fa = value(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + GOLDEN * (hi - lo)
            fb = value(b)
        if hi - lo <= 1e-14 * (1.0 + hi):
            break
    candidates = [(value(x), x) for x in (lo, hi, 0.5 * (lo + hi), 0.0)]
    best, lam = min(candidates)
    return best, lam


def whittle_lp_upper_bound(arms, T_max=None, M=1, method="auto"):
    """Value of the Whittle LP; falls back to the Lagrangean when the truncated LP is too large."""
    arms = tuple(arms)
    T_max = T_max or default_tmax(arms)
    if method == "auto":
        method = "lp" if 2 * len(arms) * T_max <= MAX_LP_COLUMNS else "lagrangean"
    if method == "lagrangean":
        value, lam = lagrangean_upper_bound(arms, M)
        logger.info(f"Whittle bound via Lagrangean: {value:.10g} at lambda = {lam:.6g}")
        return value
    if method != "lp":
        raise ParameterOutOfRange(f"unknown method {method!r}")
    solution = lp_solve(build_whittle_lp(arms, T_max, M))
    logger.info(f"Whittle LP (T_max = {T_max}) value: {solution.objective:.10g}")
    return solution.objective


@dataclass(frozen=True)
class CombineSplit:
    """Two penalties bracketing the LP and the mixing weight that meets the play budget."""
    lambda_minus: float
    lambda_plus: float
    rate_minus: float
    rate_plus: float
    weight: float
    reward_minus: float
    reward_plus: float

    @property
    def mixed_reward(self):
        return self.weight * self.reward_minus + (1.0 - self.weight) * self.reward_plus

    @property
    def mixed_rate(self):
        return self.weight * self.rate_minus + (1.0 - self.weight) * self.rate_plus


def _totals(arms, lam):
    reward = rate = 0.0
    for arm in arms:
        _, t = single_arm_optimum(arm, lam)
        if t != math.inf:
            reward += policy_reward_R(arm, t)
            rate += policy_playrate_Q(arm, t)
    return reward, rate


def combine_split(arms, M=1, iterations=80):
    """Penalties λ⁻ < λ⁺ around the rate-M crossing and the weight a mixing their policies."""
    arms = tuple(arms)
    reward0, rate0 = _totals(arms, 0.0)
    if rate0 <= M:
        return CombineSplit(0.0, 0.0, rate0, rate0, 1.0, reward0, reward0)
    lo, hi = 0.0, max(never_play_threshold(arm) for arm in arms)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if _totals(arms, mid)[1] >= M:
            lo = mid
        else:
            hi = mid
    reward_m, rate_m = _totals(arms, lo)
    reward_p, rate_p = _totals(arms, hi)
    weight = 1.0 if rate_m == rate_p else (M - rate_p) / (rate_m - rate_p)
    return CombineSplit(lo, hi, rate_m, rate_p, weight, reward_m, reward_p)
