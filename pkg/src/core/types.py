"""Immutable domain types shared by every solver module."""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.core.errors import InstanceError, ParameterOutOfRange, ShapeMismatch, VariantMismatch
from src.core.settings import section

# --- Configuration ---
DEFAULT_DELTA = section("instances")["delta"]
ROW_SUM_TOL = 1e-12

GOOD = "g"
BAD = "b"


def _check_finite(name, value):
    if not math.isfinite(value):
        raise ParameterOutOfRange(f"{name} = {value} must be finite")


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeedbackArm:
    """A two-state arm whose state is revealed only when played."""
    alpha: float
    beta: float
    r: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        for name in ("alpha", "beta", "r", "delta"):
            _check_finite(name, getattr(self, name))
        if not self.delta > 0:
            raise ParameterOutOfRange(f"delta = {self.delta} must be positive")
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterOutOfRange(
                f"alpha = {self.alpha}, beta = {self.beta} outside expected range (0, 1)")
        if self.alpha + self.beta > 1 - self.delta:
            raise ParameterOutOfRange(
                f"alpha + beta = {self.alpha + self.beta} outside expected range (0, {1 - self.delta}]")
        if self.r < 0:
            raise ParameterOutOfRange(f"r = {self.r} must be non-negative")

    @property
    def nu(self):
        return 1.0 - self.alpha - self.beta

    @property
    def stationary_good(self):
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class BeliefState:
    last: str
    t: int

    def __post_init__(self):
        if self.last not in (GOOD, BAD):
            raise InstanceError(f"belief tag {self.last!r} must be '{GOOD}' or '{BAD}'")
        if self.t < 1:
            raise ParameterOutOfRange(f"belief age t = {self.t} must be >= 1")

    def aged(self, cap=None):
        """Returns the belief one step later, frozen at ``cap`` when given."""
        t = self.t + 1
        if cap is not None:
            t = min(t, cap)
        return BeliefState(self.last, t)


@dataclass(frozen=True)
class FeedbackInstance:
    arms: Tuple[FeedbackArm, ...]
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if not self.arms:
            raise InstanceError("a feedback instance needs at least one arm")
        for i, arm in enumerate(self.arms):
            if arm.alpha + arm.beta > 1 - self.delta:
                raise ParameterOutOfRange(
                    f"arms[{i}]: alpha + beta = {arm.alpha + arm.beta} outside expected range (0, {1 - self.delta}]")

    @property
    def n(self):
        return len(self.arms)


@dataclass(frozen=True)
class PiecewiseLinearMonotone:
    """Non-decreasing function of the waiting time given by integer breakpoints."""
    breakpoints: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        points = tuple((int(t), float(v)) for t, v in self.breakpoints)
        if not points or points[0][0] != 1:
            raise InstanceError("the first breakpoint must be at t = 1")
        ts = np.array([p[0] for p in points])
        vs = np.array([p[1] for p in points])
        if np.any(np.diff(ts) <= 0):
            raise InstanceError(f"breakpoint times {ts.tolist()} must be strictly increasing")
        if np.any(vs < 0) or np.any(vs > 1) or not np.all(np.isfinite(vs)):
            raise ParameterOutOfRange(f"breakpoint values {vs.tolist()} outside expected range [0, 1]")
        if np.any(np.diff(vs) < 0):
            raise InstanceError(f"breakpoint values {vs.tolist()} must be non-decreasing")
        object.__setattr__(self, "breakpoints", points)
        object.__setattr__(self, "_ts", _frozen_array(ts))
        object.__setattr__(self, "_vs", _frozen_array(vs))

    @classmethod
    def from_samples(cls, values):
        """Builds the interpolant through values sampled at t = 1..len(values)."""
        return cls(tuple((t + 1, float(v)) for t, v in enumerate(values)))

    @classmethod
    def constant(cls, value):
        return cls(((1, float(value)),))

    @property
    def times(self):
        return self._ts

    @property
    def last_time(self):
        return int(self._ts[-1])

    def __call__(self, t):
        return float(np.interp(t, self._ts, self._vs))

    def evaluate(self, ts):
        return np.interp(np.asarray(ts, dtype=float), self._ts, self._vs)


def pwl_eval(f, t):
    """Evaluates a piecewise-linear monotone function at waiting time t."""
    if t < 1:
        raise ParameterOutOfRange(f"t = {t} must be >= 1")
    return f(t)


@dataclass(frozen=True)
class MonotoneState:
    reward: float
    duration: int
    escape: PiecewiseLinearMonotone

    def __post_init__(self):
        _check_finite("reward", self.reward)
        if self.reward < 0:
            raise ParameterOutOfRange(f"reward = {self.reward} must be non-negative")
        if int(self.duration) != self.duration or self.duration < 1:
            raise ParameterOutOfRange(f"duration = {self.duration} must be a positive integer")
        object.__setattr__(self, "duration", int(self.duration))


def is_strongly_connected(q):
    """True when the graph with an edge (j, k) for every q(j, k) > 0 is strongly connected."""
    n_components, _ = connected_components(csr_matrix(q > 0), directed=True, connection="strong")
    return n_components == 1


@dataclass(frozen=True, eq=False)
class MonotoneArm:
    states: Tuple[MonotoneState, ...]
    q: np.ndarray
    initial_state: int = 0

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        q = np.array(self.q, dtype=float)
        k = len(self.states)
        if k == 0:
            raise InstanceError("a monotone arm needs at least one state")
        if q.shape != (k, k):
            raise ShapeMismatch(f"q has shape {q.shape}, expected ({k}, {k})")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ParameterOutOfRange("q entries must be finite and non-negative")
        if np.any(np.abs(np.diag(q)) > 0):
            raise InstanceError("q(k, k) must be 0 for every state")
        row_sums = q.sum(axis=1)
        if np.any(row_sums > 1 + ROW_SUM_TOL):
            raise ParameterOutOfRange(f"q row sums {row_sums.tolist()} exceed 1")
        if not is_strongly_connected(q):
            raise InstanceError("the transition graph of q is not strongly connected")
        if not 0 <= self.initial_state < k:
            raise ShapeMismatch(f"initial_state = {self.initial_state} outside 0..{k - 1}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def n_states(self):
        return len(self.states)

    def delta_p(self, potentials):
        """Expected potential change Σ_j q(k,j)(p_j − p_k) for every state k."""
        p = np.asarray(potentials, dtype=float)
        return self.q @ p - self.q.sum(axis=1) * p

    def breakpoint_set(self, k):
        """Integer times at which the escape function of state k bends, plus its last breakpoint."""
        return [int(t) for t in self.states[k].escape.times]


@dataclass(frozen=True)
class MonotoneInstance:
    arms: Tuple[MonotoneArm, ...]
    M: int = 1
    switch_out: Tuple[float, ...] = ()
    switch_in: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        n = len(self.arms)
        if n == 0:
            raise InstanceError("a monotone instance needs at least one arm")
        if int(self.M) != self.M or self.M < 1:
            raise ParameterOutOfRange(f"M = {self.M} must be a positive integer")
        switch_out = tuple(float(c) for c in self.switch_out) or (0.0,) * n
        switch_in = tuple(float(s) for s in self.switch_in) or (0.0,) * n
        if len(switch_out) != n or len(switch_in) != n:
            raise ShapeMismatch(f"switching costs must have one entry per arm ({n})")
        if any(c < 0 or not math.isfinite(c) for c in switch_out + switch_in):
            raise ParameterOutOfRange("switching costs must be finite and non-negative")
        object.__setattr__(self, "switch_out", switch_out)
        object.__setattr__(self, "switch_in", switch_in)
        if self.has_switching:
            if self.M != 1:
                raise VariantMismatch(f"switching costs require M = 1, got M = {self.M}")
            if self.max_duration > 1:
                raise VariantMismatch("switching costs cannot be combined with durations L > 1")

    @property
    def n(self):
        return len(self.arms)

    @property
    def has_switching(self):
        return any(c > 0 for c in self.switch_out) or any(s > 0 for s in self.switch_in)

    @property
    def max_duration(self):
        return max(s.duration for arm in self.arms for s in arm.states)

    def default_variant(self):
        if self.has_switching:
            return "switching"
        if self.M > 1 or self.max_duration > 1:
            return "multiplay"
        return "base"


@dataclass(frozen=True)
class ProbeArm:
    arm: FeedbackArm
    cost: float

    def __post_init__(self):
        _check_finite("cost", self.cost)
        if self.cost < 0:
            raise ParameterOutOfRange(f"probe cost = {self.cost} must be non-negative")


@dataclass(frozen=True)
class ProbeInstance:
    arms: Tuple[ProbeArm, ...]
    M: int = 1
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if not self.arms:
            raise InstanceError("a probe instance needs at least one arm")
        if int(self.M) != self.M or self.M < 1:
            raise ParameterOutOfRange(f"M = {self.M} must be a positive integer")

    @property
    def n(self):
        return len(self.arms)


@dataclass(frozen=True, eq=False)
class Machine:
    """A machine with active states, repair costs and a geometric repair time."""
    rewards: Tuple[float, ...]
    costs: Tuple[float, ...]
    p: np.ndarray
    s: float
    initial: int = 0

    def __post_init__(self):
        rewards = tuple(float(r) for r in self.rewards)
        costs = tuple(float(c) for c in self.costs)
        k = len(rewards)
        if k == 0:
            raise InstanceError("a machine needs at least one active state")
        if len(costs) != k:
            raise ShapeMismatch(f"costs has {len(costs)} entries, expected {k}")
        if any(r < 0 or not math.isfinite(r) for r in rewards):
            raise ParameterOutOfRange("state rewards must be finite and non-negative")
        if any(c < 0 or not math.isfinite(c) for c in costs):
            raise ParameterOutOfRange("repair costs must be finite and non-negative")
        p = np.array(self.p, dtype=float)
        if p.shape != (k, k):
            raise ShapeMismatch(f"p has shape {p.shape}, expected ({k}, {k})")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1) > ROW_SUM_TOL):
            raise ParameterOutOfRange(f"p rows must be stochastic, got sums {p.sum(axis=1).tolist()}")
        if not 0 < self.s <= 1:
            raise ParameterOutOfRange(f"repair rate s = {self.s} outside expected range (0, 1]")
        if not 0 <= self.initial < k:
            raise ShapeMismatch(f"initial = {self.initial} outside 0..{k - 1}")
        p.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "p", p)

    @property
    def n_states(self):
        return len(self.rewards)


@dataclass(frozen=True)
class ReplenishInstance:
    machines: Tuple[Machine, ...]
    M: int = 1

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(self.machines))
        if not self.machines:
            raise InstanceError("a replenishment instance needs at least one machine")
        if int(self.M) != self.M or self.M < 1:
            raise ParameterOutOfRange(f"M = {self.M} must be a positive integer")

    @property
    def n(self):
        return len(self.machines)
