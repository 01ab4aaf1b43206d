"""Baseline policies for Feedback MAB instances.

Every policy exposes ``next_action(beliefs) -> arm index | None``; ``None``
idles. ``required_ages()`` lists, per arm, the largest belief age the policy
distinguishes so exact evaluation can cap ages without changing decisions.
"""
from src.core.beliefs import belief_good
from src.core.errors import ParameterOutOfRange, ShapeMismatch
from src.core.settings import section
from src.core.types import GOOD

# --- Configuration ---
MYOPIC_TIE_TOL = section("policies")["myopic_tie_tol"]


class MyopicPolicy:
    """Plays the arm with the largest expected reward r·P(good) this step."""
    name = "myopic"

    def __init__(self, arms, candidates=None, tie_tol=MYOPIC_TIE_TOL):
        self.arms = tuple(arms)
        self.candidates = tuple(range(len(self.arms))) if candidates is None else tuple(candidates)
        self.tie_tol = tie_tol

    def next_action(self, beliefs):
        best_i, best_value = None, 0.0
        for i in self.candidates:
            value = self.arms[i].r * belief_good(self.arms[i], beliefs[i])
            if best_i is None or value > best_value + self.tie_tol * max(1.0, abs(best_value)):
                best_i, best_value = i, value
        return best_i

    def required_ages(self):
        return [1] * len(self.arms)


class AlwaysPlayPolicy:
    """Plays arm i every step."""

    def __init__(self, n_arms, arm):
        if not 0 <= arm < n_arms:
            raise ShapeMismatch(f"always-play arm {arm} outside 0..{n_arms - 1}")
        self.arm = arm
        self.n_arms = n_arms
        self.name = f"always-play({arm})"

    def next_action(self, beliefs):
        return self.arm

    def required_ages(self):
        return [1] * self.n_arms


class RoundRobinPolicy:
    """Exploits a subset arm last seen good, otherwise cycles to the oldest observation."""
    name = "round-robin"

    def __init__(self, n_arms, subset):
        self.subset = tuple(sorted(subset))
        if not self.subset or any(not 0 <= i < n_arms for i in self.subset):
            raise ShapeMismatch(f"round-robin subset {self.subset} outside 0..{n_arms - 1}")
        self.n_arms = n_arms

    def next_action(self, beliefs):
        for i in self.subset:
            if beliefs[i].last == GOOD:
                return i
        return min(self.subset, key=lambda i: (-beliefs[i].t, i))

    def required_ages(self):
        return [1] * self.n_arms


class RegionPolicy:
    """Three-arm rule: exploit a stochastic arm last seen good; inside ``region`` play arm 0;
    otherwise play the stochastic arm observed bad longer ago."""

    def __init__(self, region, name="region"):
        self.region = frozenset(region)
        self.name = name

    @classmethod
    def square(cls, k_max):
        return cls({(k1, k2) for k1 in range(1, k_max + 1) for k2 in range(1, k_max + 1)},
                   name=f"square<={k_max}")

    @classmethod
    def optimal_region(cls):
        return cls({(k1, k2) for k1 in range(1, 5) for k2 in range(1, 5) if k1 + k2 <= 6},
                   name="optimal-region")

    def next_action(self, beliefs):
        if len(beliefs) != 3:
            raise ShapeMismatch(f"region policy needs 3 arms, got {len(beliefs)}")
        for i in (1, 2):
            if beliefs[i].last == GOOD:
                return i
        k1, k2 = beliefs[1].t, beliefs[2].t
        if (k1, k2) in self.region:
            return 0
        return 1 if k1 >= k2 else 2

    def required_ages(self):
        reach = max((max(k) for k in self.region), default=1) + 1
        return [1, reach, reach]


class ThresholdPolicy:
    """Per-arm wait-then-play thresholds: exploit when last seen good, play bad arms once t ≥ t_i."""
    name = "threshold"

    def __init__(self, thresholds):
        if any(t < 1 for t in thresholds):
            raise ParameterOutOfRange(f"thresholds {thresholds} must all be >= 1")
        self.thresholds = tuple(thresholds)

    def next_action(self, beliefs):
        for i, belief in enumerate(beliefs):
            if belief.last == GOOD:
                return i
        ready = [(i, b.t - t) for i, (b, t) in enumerate(zip(beliefs, self.thresholds)) if b.t >= t]
        if ready:
            return min(ready, key=lambda c: (-c[1], c[0]))[0]
        return None

    def required_ages(self):
        return [int(t) for t in self.thresholds]
