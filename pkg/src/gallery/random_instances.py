"""Seeded random instance batteries for property checks."""
import numpy as np

from src.core.types import (
    DEFAULT_DELTA,
    FeedbackArm,
    FeedbackInstance,
    Machine,
    MonotoneArm,
    MonotoneInstance,
    MonotoneState,
    PiecewiseLinearMonotone,
    ProbeArm,
    ProbeInstance,
    ReplenishInstance,
)

# --- Configuration ---
MIN_RATE = 0.02
MAX_REWARD = 5.0
MAX_WAIT = 30


def random_feedback_arm(rng, delta=DEFAULT_DELTA, min_rate=MIN_RATE, max_total=None):
    """α, β ≥ min_rate with α + β drawn below max_total (default 0.9(1 − δ))."""
    total = rng.uniform(2 * min_rate, max_total or 0.9 * (1.0 - delta))
    alpha = rng.uniform(min_rate, total - min_rate)
    return FeedbackArm(alpha=float(alpha), beta=float(total - alpha), r=float(rng.uniform(0.1, MAX_REWARD)),
                       delta=delta)


def random_feedback_instance(rng, n=None, max_arms=8):
    n = n or int(rng.integers(1, max_arms + 1))
    return FeedbackInstance(tuple(random_feedback_arm(rng) for _ in range(n)))


def _random_escape(rng, max_breakpoints):
    count = int(rng.integers(1, max_breakpoints + 1))
    times = [1] + sorted(rng.choice(np.arange(2, MAX_WAIT + 1), size=count - 1, replace=False).tolist())
    values = np.sort(rng.uniform(0.05, 1.0, size=count))
    return PiecewiseLinearMonotone(tuple(zip(times, values.tolist())))


def _random_q(rng, k):
    if k == 1:
        return np.zeros((1, 1))
    q = rng.uniform(0.1, 1.0, size=(k, k))
    np.fill_diagonal(q, 0.0)
    q *= rng.uniform(0.5, 1.0, size=(k, 1)) / q.sum(axis=1, keepdims=True)
    return q


def random_monotone_instance(rng, max_arms=4, max_states=4, max_breakpoints=12, M=1, max_duration=1,
                             switching=False):
    """Arms with at most ``max_breakpoints`` escape breakpoints in total."""
    n = int(rng.integers(1, max_arms + 1))
    arms = []
    for _ in range(n):
        k = int(rng.integers(1, max_states + 1))
        per_state = max(1, max_breakpoints // k)
        states = tuple(
            MonotoneState(float(rng.uniform(0.0, MAX_REWARD)), int(rng.integers(1, max_duration + 1)),
                          _random_escape(rng, per_state))
            for _ in range(k)
        )
        arms.append(MonotoneArm(states, _random_q(rng, k)))
    switch_out = switch_in = ()
    if switching:
        switch_out = tuple(rng.uniform(0.0, 1.0, size=n).tolist())
        switch_in = tuple(rng.uniform(0.0, 1.0, size=n).tolist())
    return MonotoneInstance(tuple(arms), M=min(M, n), switch_out=switch_out, switch_in=switch_in)


def random_probe_instance(rng, max_arms=4, max_cost=0.5, M=1):
    n = int(rng.integers(1, max_arms + 1))
    arms = tuple(ProbeArm(random_feedback_arm(rng), float(rng.uniform(0.0, max_cost))) for _ in range(n))
    return ProbeInstance(arms, M=min(M, n))


def random_replenish_instance(rng, n=2, max_states=3, M=1):
    """Machines that drift from their initial state towards worse ones."""
    machines = []
    for _ in range(n):
        k = int(rng.integers(2, max_states + 1))
        p = np.triu(rng.uniform(0.0, 1.0, size=(k, k)))
        p /= p.sum(axis=1, keepdims=True)
        rewards = np.sort(rng.uniform(0.0, MAX_REWARD, size=k))[::-1]
        costs = rng.uniform(0.0, 1.0, size=k)
        machines.append(Machine(tuple(rewards.tolist()), tuple(costs.tolist()), p, float(rng.uniform(0.1, 1.0))))
    return ReplenishInstance(tuple(machines), M=M)
