"""Whittle indices Π(s, t) for two-state arms observed only when played."""
import logging
import math
from functools import lru_cache

from src.core.beliefs import belief_u
from src.core.settings import section
from src.core.types import GOOD, BeliefState
from src.feedback.single_arm import single_arm_optimum

# --- Configuration ---
_WHITTLE = section("whittle")
BISECTION_TOL = _WHITTLE["bisection_tol"]
CACHE_SIZE = _WHITTLE["cache_size"]

logger = logging.getLogger(__name__)


def _bisect_sup(predicate, hi, tol):
    """Largest λ in [0, hi] (to tol) with predicate(λ) true, given predicate(0) holds and is monotone."""
    if predicate(hi):
        return hi
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _plays_when_bad(arm, t):
    def predicate(lam):
        return single_arm_optimum(arm, lam)[1] <= t
    return predicate


def _plays_when_good(arm, t):
    u = belief_u(arm, t)
    top = arm.r * (1.0 - arm.beta)

    def predicate(lam):
        if single_arm_optimum(arm, lam)[0] > 0.0:
            return True
        return arm.r * u - lam + u * (top - lam) / arm.beta >= 0.0
    return predicate


def whittle_index(arm, state, tol=BISECTION_TOL):
    """Largest penalty per play at which playing in ``state`` stays optimal for the single arm."""
    top = arm.r * (1.0 - arm.beta)
    if top <= 0.0:
        return 0.0
    if state.last == GOOD:
        if state.t == 1:
            return top
        return _bisect_sup(_plays_when_good(arm, state.t), top, tol)
    return _bisect_sup(_plays_when_bad(arm, state.t), top, tol)


class WhittleIndexTable:
    """Per-instance index lookup with a bounded LRU memo keyed by (arm, tag, t)."""

    def __init__(self, arms, cache_size=CACHE_SIZE, tol=BISECTION_TOL):
        self.arms = tuple(arms)
        self.tol = tol
        self.index_g1 = tuple(arm.r * (1.0 - arm.beta) for arm in self.arms)
        self.cache_size = cache_size
        self._lookup = lru_cache(maxsize=cache_size)(self._compute)

    def __getstate__(self):
        # lru_cache over a bound method does not pickle
        state = self.__dict__.copy()
        del state["_lookup"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lookup = lru_cache(maxsize=self.cache_size)(self._compute)

    def _compute(self, i, last, t):
        return whittle_index(self.arms[i], BeliefState(last, t), self.tol)

    def index(self, i, belief):
        if belief.last == GOOD and belief.t == 1:
            return self.index_g1[i]
        return self._lookup(i, belief.last, belief.t)

    def index_b(self, i, t):
        return self._lookup(i, "b", t)

    def indices(self, beliefs):
        return [self.index(i, b) for i, b in enumerate(beliefs)]

    def cache_info(self):
        return self._lookup.cache_info()


def never_play_limit(arm):
    """Limit of Π(b, t) as t → ∞."""
    a, b = arm.alpha, arm.beta
    return arm.r * a / (a + b * (a + b)) if arm.r > 0 else 0.0


def argmax_lowest(values):
    best_i, best = None, -math.inf
    for i, v in enumerate(values):
        if v > best:
            best_i, best = i, v
    return best_i
