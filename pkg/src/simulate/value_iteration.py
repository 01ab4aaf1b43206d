"""Discounted value iteration on the truncated joint belief MDP of a small Feedback instance."""
import logging
from dataclasses import dataclass

import numpy as np

from src.core.beliefs import belief_u_array, belief_v_array, mixing_time
from src.core.errors import NoConvergence, ParameterOutOfRange, StateSpaceTooLarge
from src.core.settings import section
from src.core.types import BAD, GOOD, BeliefState
from src.simulate.exact_eval import MAX_STATES, exact_feedback_eval

# --- Configuration ---
_VI = section("value_iteration")
GAMMA = _VI["gamma"]
T_CAP = _VI["t_cap"]
TOL = _VI["tol"]
MAX_SWEEPS = _VI["max_sweeps"]
IDLE = -1

logger = logging.getLogger(__name__)


def belief_index(belief, cap):
    """Position of (s, t) on an arm axis: good ages first, then bad ages, t frozen at cap."""
    t = min(belief.t, cap)
    return t - 1 if belief.last == GOOD else cap + t - 1


def _arm_axis(arm, cap):
    ts = np.arange(1, cap + 1, dtype=float)
    p_good = np.concatenate([belief_u_array(arm, ts), belief_v_array(arm, ts)])
    aged = np.concatenate([np.minimum(np.arange(1, cap + 1), cap - 1),
                           cap + np.minimum(np.arange(1, cap + 1), cap - 1)])
    return p_good, aged


class TablePolicy:
    """Looks decisions up in a joint belief table; ages past an arm's cap read the capped entry."""
    name = "optimal-vi"

    def __init__(self, table, caps):
        self.table = table
        self.caps = tuple(caps)

    def next_action(self, beliefs):
        idx = tuple(belief_index(b, cap) for b, cap in zip(beliefs, self.caps))
        action = int(self.table[idx])
        return None if action == IDLE else action

    def required_ages(self):
        return list(self.caps)


@dataclass
class VIResult:
    policy: TablePolicy
    values: np.ndarray
    sweeps: int
    average: float
    caps: tuple


def _q_values(V, axes, rewards, gamma):
    n = len(axes)
    aged_all = V
    for j, (_, aged) in enumerate(axes):
        aged_all = np.take(aged_all, aged, axis=j)
    qs = []
    for i, ((p_good, _), r) in enumerate(zip(axes, rewards)):
        W = V
        for j, (_, aged) in enumerate(axes):
            if j != i:
                W = np.take(W, aged, axis=j)
        cap = len(p_good) // 2
        shape = [1] * n
        shape[i] = len(p_good)
        p = p_good.reshape(shape)
        good_next = np.take(W, [0], axis=i)
        bad_next = np.take(W, [cap], axis=i)
        qs.append(r * p + gamma * (p * good_next + (1.0 - p) * bad_next))
    qs.append(np.broadcast_to(gamma * aged_all, V.shape))
    return np.stack(qs)


def vi_optimal(arms, gamma=GAMMA, T_cap=T_CAP, tol=TOL, max_sweeps=MAX_SWEEPS, max_states=MAX_STATES):
    """Greedy policy of the discounted belief MDP and its exact long-run average reward."""
    arms = tuple(arms)
    if not 0 < gamma < 1:
        raise ParameterOutOfRange(f"gamma = {gamma} outside expected range (0, 1)")
    caps = tuple(max(2, mixing_time(arm, cap=T_cap)) for arm in arms)
    size = int(np.prod([2 * c for c in caps]))
    if size > max_states:
        raise StateSpaceTooLarge(f"{size} joint belief states exceed {max_states}; lower T_cap")
    axes = [_arm_axis(arm, cap) for arm, cap in zip(arms, caps)]
    rewards = [arm.r for arm in arms]
    V = np.zeros([2 * c for c in caps])
    threshold = tol * (1.0 - gamma) / (2.0 * gamma)
    for sweep in range(1, max_sweeps + 1):
        V_new = _q_values(V, axes, rewards, gamma).max(axis=0)
        delta = float(np.abs(V_new - V).max())
        V = V_new
        if delta < threshold:
            break
        if sweep % 500 == 0:
            logger.debug(f"VI sweep {sweep}: max change {delta:.3e}")
    else:
        raise NoConvergence(f"value iteration change {delta:.3e} above {threshold:.3e} after {max_sweeps} sweeps")

    choice = _q_values(V, axes, rewards, gamma).argmax(axis=0)
    table = np.where(choice == len(arms), IDLE, choice)
    policy = TablePolicy(table, caps)
    average = exact_feedback_eval(arms, policy, T_cap=T_cap).value
    logger.info(f"VI converged in {sweep} sweeps (gamma = {gamma}, caps {caps}); greedy policy average {average:.6f}")
    return VIResult(policy, V, sweep, average, caps)


def decision_region(policy, arm=0, pair=(1, 2), k_max=10, fixed=None):
    """(k1, k2) pairs, k1 ≠ k2, where the table plays ``arm`` while both ``pair`` arms were last seen bad.

    Arms outside the pair sit at ``fixed[i]`` (default: observed good one step ago).
    """
    n = len(policy.caps)
    region = set()
    for k1 in range(1, k_max + 1):
        for k2 in range(1, k_max + 1):
            if k1 == k2:
                continue
            beliefs = [fixed[i] if fixed else BeliefState(GOOD, 1) for i in range(n)]
            beliefs[pair[0]] = BeliefState(BAD, k1)
            beliefs[pair[1]] = BeliefState(BAD, k2)
            if policy.next_action(beliefs) == arm:
                region.add((k1, k2))
    return region
