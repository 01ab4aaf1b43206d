"""Belief-state formulas for two-state arms observed only when played."""
import math

import numpy as np

from src.core.errors import ParameterOutOfRange
from src.core.settings import section
from src.core.types import GOOD

# --- Configuration ---
LOG_SPACE_THRESHOLD = 64
UNDERFLOW_FLOOR = 1e-300
MIXING_TOL = section("feedback")["mixing_tol"]


def nu_power(nu, t):
    """(1 − α − β)^t, computed in log space for large t and clamped to 0 below 1e-300."""
    if t == math.inf or nu <= 0.0:
        return 0.0
    if t <= LOG_SPACE_THRESHOLD:
        value = nu ** t
    else:
        value = math.exp(t * math.log(nu))
    return 0.0 if value < UNDERFLOW_FLOOR else value


def _check_t(t):
    if t < 1:
        raise ParameterOutOfRange(f"t = {t} must be >= 1")


def belief_v(arm, t):
    """Probability the arm is good t steps after it was observed bad."""
    _check_t(t)
    return arm.stationary_good * (1.0 - nu_power(arm.nu, t))


def belief_u(arm, t):
    """Probability the arm is good t steps after it was observed good."""
    _check_t(t)
    return arm.stationary_good + (arm.beta / (arm.alpha + arm.beta)) * nu_power(arm.nu, t)


def belief_good(arm, belief):
    """P(good) for a belief state (last observed tag, age)."""
    if belief.last == GOOD:
        return belief_u(arm, belief.t)
    return belief_v(arm, belief.t)


def nu_powers(nu, ts):
    """Vectorised ν^t with the same underflow clamp."""
    ts = np.asarray(ts, dtype=float)
    if nu <= 0.0:
        return np.zeros_like(ts)
    with np.errstate(under="ignore"):
        values = np.exp(ts * math.log(nu))
    values[values < UNDERFLOW_FLOOR] = 0.0
    return values


def belief_v_array(arm, ts):
    return arm.stationary_good * (1.0 - nu_powers(arm.nu, ts))


def belief_u_array(arm, ts):
    return arm.stationary_good + (arm.beta / (arm.alpha + arm.beta)) * nu_powers(arm.nu, ts)


def mixing_time(arm, tol=MIXING_TOL, cap=None):
    """Smallest T with ν^T ≤ tol; beliefs are numerically stationary beyond it."""
    nu = arm.nu
    if nu <= tol:
        t = 1
    else:
        t = max(1, math.ceil(math.log(tol) / math.log(nu)))
        while nu_power(nu, t) > tol:
            t += 1
    return min(t, cap) if cap is not None else t
