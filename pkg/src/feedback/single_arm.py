"""Single-arm policy values for the wait-then-play family P(t)."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from src.core.beliefs import belief_v, nu_power
from src.core.errors import DegenerateArm, NumericFailure, ParameterOutOfRange
from src.core.settings import section

# --- Configuration ---
T4_CAP = 2 ** section("feedback")["t4_cap_exponent"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingleArmPolicyP:
    """Wait t − 1 steps after observing bad, then play; play every step while good."""
    t: float

    def __post_init__(self):
        if self.t < 1:
            raise ParameterOutOfRange(f"policy wait t = {self.t} must be >= 1")

    @property
    def never_plays(self):
        return self.t == math.inf


def _finite_t(t):
    if t < 1 or t == math.inf:
        raise ParameterOutOfRange(f"t = {t} must be a finite integer >= 1")


def policy_reward_R(arm, t):
    """Average reward of P(t): r·v_t / (v_t + t·β)."""
    _finite_t(t)
    v = belief_v(arm, t)
    return arm.r * v / (v + t * arm.beta)


def policy_playrate_Q(arm, t):
    """Expected plays per step of P(t): (v_t + β) / (v_t + t·β)."""
    _finite_t(t)
    v = belief_v(arm, t)
    return (v + arm.beta) / (v + t * arm.beta)


def lagrange_value_F(arm, lam, t):
    """R(t) − λ·Q(t) in closed form."""
    _finite_t(t)
    v = belief_v(arm, t)
    return ((arm.r - lam) * v - lam * arm.beta) / (v + t * arm.beta)


def never_play_threshold(arm):
    """Penalty r·α / (α + β(α+β)) at and above which never playing is optimal."""
    a, b = arm.alpha, arm.beta
    return arm.r * a / (a + b * (a + b))


def single_arm_optimum(arm, lam):
    """Returns (H, t_opt): the best excess reward over P(t) and its smallest maximiser."""
    if lam < 0 or not math.isfinite(lam):
        raise ParameterOutOfRange(f"penalty lambda = {lam} must be finite and >= 0")
    if lam >= never_play_threshold(arm):
        return 0.0, math.inf

    a, b, r = arm.alpha, arm.beta, arm.r
    s = a + b
    nu = 1.0 - s
    pi = a / s
    log_inv_nu = math.log(1.0 / nu)
    eta = pi * log_inv_nu
    phi = eta * lam + pi * (r - lam)
    mu = eta * (r - lam)
    omega = lam * b - a * (r - lam) / s
    if mu <= 0:
        raise DegenerateArm(f"mu = {mu} <= 0 at lambda = {lam} (r = {r})")

    def g(t):
        return (phi + mu * t) * nu_power(nu, t) + omega

    t3 = 1.0 / log_inv_nu - phi / mu
    candidates = {1}
    if t3 >= 1 and g(t3) >= 0:
        candidates.update({max(1, math.floor(t3)), max(1, math.ceil(t3))})
        lo = max(1, math.ceil(t3))
        if g(lo) >= 0:
            hi = lo
            while g(hi) >= 0:
                hi *= 2
                if hi > T4_CAP:
                    raise NumericFailure(f"sign change of g not found below 2^62 at lambda = {lam}")
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if g(mid) >= 0:
                    lo = mid
                else:
                    hi = mid
            candidates.update({lo, lo + 1})
    elif t3 < 1 and g(1) >= 0:
        lo, hi = 1, 2
        while g(hi) >= 0:
            lo, hi = hi, hi * 2
            if hi > T4_CAP:
                raise NumericFailure(f"sign change of g not found below 2^62 at lambda = {lam}")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if g(mid) >= 0:
                lo = mid
            else:
                hi = mid
        candidates.update({lo, lo + 1})

    best_t, best_f = None, -math.inf
    for t in sorted(candidates):
        f = lagrange_value_F(arm, lam, t)
        if f > best_f:
            best_t, best_f = t, f
    return max(0.0, best_f), best_t


def policy_chain(arm, t):
    """Transition matrix, per-state reward and play indicator of the (t+1)-state chain of P(t).

    State 0 is "last observed good"; state k in 1..t is "observed bad k steps ago".
    """
    _finite_t(t)
    t = int(t)
    P = np.zeros((t + 1, t + 1))
    P[0, 0] = 1.0 - arm.beta
    P[0, 1] = arm.beta
    for k in range(1, t):
        P[k, k + 1] = 1.0
    v = belief_v(arm, t)
    P[t, 0] += v
    P[t, 1] += 1.0 - v
    reward = np.zeros(t + 1)
    reward[0] = arm.r
    plays = np.zeros(t + 1)
    plays[0] = 1.0
    plays[t] = 1.0
    return P, reward, plays
