"""Encodings of other bandit models as monotone instances."""
import numpy as np

from src.core.beliefs import belief_u_array, belief_v_array
from src.core.types import MonotoneArm, MonotoneInstance, MonotoneState, PiecewiseLinearMonotone

GOOD_STATE, BAD_STATE = 0, 1
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def feedback_arm_as_monotone(arm, T_max):
    """Two states (good, bad) with escape probabilities 1 − u_t and v_t sampled at 1..T_max.

    The arm starts in the bad state, matching a feedback arm first observed bad.
    """
    ts = np.arange(1, T_max + 1, dtype=float)
    leave_good = np.maximum.accumulate(1.0 - belief_u_array(arm, ts))
    leave_bad = np.maximum.accumulate(belief_v_array(arm, ts))
    states = (
        MonotoneState(arm.r, 1, PiecewiseLinearMonotone.from_samples(np.clip(leave_good, 0.0, 1.0))),
        MonotoneState(0.0, 1, PiecewiseLinearMonotone.from_samples(np.clip(leave_bad, 0.0, 1.0))),
    )
    return MonotoneArm(states, SWAP, initial_state=BAD_STATE)


def feedback_as_monotone(arms, T_max):
    return MonotoneInstance(tuple(feedback_arm_as_monotone(arm, T_max) for arm in arms), M=1)


def stochastic_mab_as_monotone(rewards, q_matrices, M=1):
    """Markov chains that move only when played: escape probability identically 1."""
    arms = []
    for r, q in zip(rewards, q_matrices):
        states = tuple(MonotoneState(float(rk), 1, PiecewiseLinearMonotone.constant(1.0)) for rk in r)
        arms.append(MonotoneArm(states, np.asarray(q, dtype=float)))
    return MonotoneInstance(tuple(arms), M=M)


def constraint_times(arm, k):
    """Waiting times at which the Balance LP constrains state k: the escape breakpoints."""
    return [int(t) for t in arm.states[k].escape.times]
