import logging
import math
from dataclasses import dataclass
from typing import Tuple

from joblib import Parallel, delayed

from src.core.beliefs import belief_v
from src.core.errors import AllArmsInactive, ParameterOutOfRange
from src.core.settings import section
from src.core.types import BAD, GOOD
from src.feedback.single_arm import single_arm_optimum

# --- Configuration ---
_FEEDBACK = section("feedback")
EPSILON = _FEEDBACK["epsilon"]
REFINE_ITERATIONS = _FEEDBACK["refine_iterations"]
LAMBDA_FLOOR = 1e-300

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArmIndexParams:
    """Per-arm solution at the balanced penalty."""
    h: float
    t: float
    p: float
    active: bool


@dataclass(frozen=True)
class FeedbackPolicyParams:
    lambda_star: float
    lambda_lower: float
    lambda_upper: float
    epsilon: float
    arms: Tuple[ArmIndexParams, ...]

    @property
    def total_h(self):
        return sum(a.h for a in self.arms)


def excess_rewards(arms, lam, n_jobs=1):
    """Per-arm (H_i(λ), t_i(λ)) in arm order."""
    if n_jobs == 1:
        return [single_arm_optimum(arm, lam) for arm in arms]
    return Parallel(n_jobs=n_jobs)(delayed(single_arm_optimum)(arm, lam) for arm in arms)


def total_excess(arms, lam, n_jobs=1):
    """G(λ) = Σ_i H_i(λ)."""
    return sum(h for h, _ in excess_rewards(arms, lam, n_jobs))


def balanced_lambda(arms, epsilon=EPSILON, refine_iterations=REFINE_ITERATIONS, n_jobs=1):
    """Finds λ with λ < G(λ) ≤ λ(1+ε) by a geometric scan, then refines by bisection."""
    arms = tuple(arms)
    if not arms:
        raise ParameterOutOfRange("balanced_lambda needs at least one arm")
    if not 0 < epsilon < 1:
        raise ParameterOutOfRange(f"epsilon = {epsilon} outside expected range (0, 1)")
    total_r = sum(arm.r for arm in arms)
    if total_r <= 0:
        raise AllArmsInactive("every arm has zero reward")

    lam = total_r
    steps = 0
    while not lam < total_excess(arms, lam, n_jobs):
        lam /= 1.0 + epsilon
        steps += 1
        if lam < LAMBDA_FLOOR:
            raise AllArmsInactive(f"G(lambda) stayed 0 down to lambda = {lam:.3e}")
    lower, upper = lam, lam * (1.0 + epsilon)
    logger.debug(f"Geometric scan bracketed lambda in [{lower:.10g}, {upper:.10g}] after {steps} steps")

    lo, hi = lower, upper
    for _ in range(refine_iterations):
        mid = 0.5 * (lo + hi)
        if mid < total_excess(arms, mid, n_jobs):
            lo = mid
        else:
            hi = mid

    per_arm = []
    for arm, (h, t) in zip(arms, excess_rewards(arms, lo, n_jobs)):
        active = h > 0.0
        p = (arm.r - lo - h) / arm.beta if active else 0.0
        per_arm.append(ArmIndexParams(h=h, t=t, p=p, active=active))
    params = FeedbackPolicyParams(lo, lower, upper, epsilon, tuple(per_arm))
    logger.info(f"Balanced lambda* = {lo:.10g} (bracket [{lower:.10g}, {upper:.10g}]), "
                f"{sum(a.active for a in per_arm)}/{len(arms)} arms active")
    return params


def balance_identity_residuals(arms, params):
    """Max deviation of λ + t·h = v_t·p and λ + h = r − β·p over active arms."""
    worst = 0.0
    lam = params.lambda_star
    for arm, a in zip(arms, params.arms):
        if not a.active:
            continue
        worst = max(worst,
                    abs(lam + a.t * a.h - belief_v(arm, a.t) * a.p),
                    abs(lam + a.h - arm.r + arm.beta * a.p))
    return worst


def _ready_order(candidates):
    # largest overshoot first, then lowest id
    return min(candidates, key=lambda c: (-c[1], c[0]))[0]


def balanced_index_next(params, beliefs):
    """Exploit an active arm in (g, 1), else the most overdue ready (b, t ≥ t_i) arm, else idle (None)."""
    if len(beliefs) != len(params.arms):
        raise ParameterOutOfRange(f"{len(beliefs)} beliefs for {len(params.arms)} arms")
    for i, (a, belief) in enumerate(zip(params.arms, beliefs)):
        if a.active and belief.last == GOOD and belief.t == 1:
            return i
    ready = [(i, belief.t - a.t) for i, (a, belief) in enumerate(zip(params.arms, beliefs))
             if a.active and belief.last == BAD and belief.t >= a.t]
    if ready:
        return _ready_order(ready)
    return None


class BalancedIndexPolicy:
    """Stateless wrapper exposing the policy protocol used by the simulators."""
    name = "balanced"

    def __init__(self, params):
        self.params = params

    def next_action(self, beliefs):
        return balanced_index_next(self.params, beliefs)

    def required_ages(self):
        return [int(a.t) if a.active and a.t != math.inf else 1 for a in self.params.arms]
