"""Exact long-run average reward of a policy from its induced finite Markov chain."""
import itertools
import logging
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from src.core.beliefs import belief_good, mixing_time
from src.core.errors import NoConvergence, ShapeMismatch, StateSpaceTooLarge
from src.core.settings import section
from src.core.types import (
    BAD, GOOD, BeliefState, FeedbackInstance, MonotoneInstance, ProbeInstance, ReplenishInstance,
)
from src.monotone.policy import MonotonePolicyState, enumerate_step, step_reward
from src.probe.policy import advance_probe_state, initial_probe_state, probe_policy_next
from src.replenish.policy import enumerate_replenish_step, initial_statuses, step_value

# --- Configuration ---
_EXACT = section("exact")
T_CAP = _EXACT["t_cap"]
MAX_STATES = int(_EXACT["max_states"])
POWER_TOL = _EXACT["power_tol"]
MAX_POWER_ITERATIONS = _EXACT["max_power_iterations"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExactResult:
    value: float
    n_states: int
    residual: float
    play_rates: tuple = ()


def build_chain(initial, successors, max_states=MAX_STATES):
    """Breadth-first enumeration of the states reachable from ``initial``.

    ``successors(key)`` returns (reward, plays, [(probability, next key)]).
    """
    index = {initial: 0}
    keys = [initial]
    rows, cols, probs = [], [], []
    rewards, plays = [], []
    queue = deque([initial])
    while queue:
        key = queue.popleft()
        i = index[key]
        reward, played, branches = successors(key)
        rewards.append(reward)
        plays.append(played)
        for prob, nxt in branches:
            if prob <= 0.0:
                continue
            j = index.get(nxt)
            if j is None:
                if len(keys) >= max_states:
                    raise StateSpaceTooLarge(
                        f"more than {max_states} reachable states; lower the belief cap or the instance size")
                j = len(keys)
                index[nxt] = j
                keys.append(nxt)
                queue.append(nxt)
            rows.append(i)
            cols.append(j)
            probs.append(prob)
    n = len(keys)
    P = csr_matrix((probs, (rows, cols)), shape=(n, n))
    return keys, P, np.array(rewards, dtype=float), plays


def stationary_distribution(P, power_tol=POWER_TOL, max_iterations=MAX_POWER_ITERATIONS):
    """Stationary distribution reached from state 0: direct sparse solve, then lazy power polish."""
    n = P.shape[0]
    A = (P.T - identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        pi = spsolve(A.tocsc(), b) if n > 1 else np.ones(1)
    if not np.all(np.isfinite(pi)) or np.any(pi < -1e-9):
        logger.warning("Direct stationary solve failed; falling back to power iteration from the initial state")
        pi = np.zeros(n)
        pi[0] = 1.0
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    PT = P.T.tocsr()
    residual = np.inf
    for _ in range(max_iterations):
        step = 0.5 * (pi + PT @ pi)
        residual = float(np.abs(step - pi).sum())
        pi = step
        if residual <= power_tol:
            break
    else:
        raise NoConvergence(f"power iteration residual {residual:.2e} above {power_tol:.0e} "
                            f"after {max_iterations} iterations")
    return pi, residual


def _average(keys, P, rewards, plays, n_arms):
    pi, residual = stationary_distribution(P)
    rates = np.zeros(n_arms)
    for weight, played in zip(pi, plays):
        for i in played:
            rates[i] += weight
    return ExactResult(float(pi @ rewards), len(keys), residual, tuple(rates))


# --- Feedback ---

def feedback_age_caps(arms, policy, T_cap=T_CAP):
    required = policy.required_ages()
    return [max(int(req), mixing_time(arm, cap=T_cap)) for arm, req in zip(arms, required)]


def exact_feedback_eval(arms, policy, T_cap=T_CAP, max_states=MAX_STATES):
    """Average reward of a Feedback policy; belief ages beyond the per-arm cap are frozen."""
    arms = tuple(arms)
    caps = feedback_age_caps(arms, policy, T_cap)

    def successors(beliefs):
        action = policy.next_action(beliefs)
        aged = [b.aged(cap) for b, cap in zip(beliefs, caps)]
        if action is None:
            return 0.0, (), [(1.0, tuple(aged))]
        arm = arms[action]
        good = belief_good(arm, beliefs[action])
        branches = []
        for seen, prob in ((GOOD, good), (BAD, 1.0 - good)):
            nxt = list(aged)
            nxt[action] = BeliefState(seen, 1)
            branches.append((prob, tuple(nxt)))
        return arm.r * good, (action,), branches

    initial = tuple(BeliefState(BAD, 1) for _ in arms)
    result = _average(*build_chain(initial, successors, max_states), len(arms))
    logger.info(f"Exact eval of {getattr(policy, 'name', 'policy')}: {result.value:.10g} "
                f"over {result.n_states} states (caps {caps})")
    return result


# --- Monotone ---

def exact_monotone_eval(instance, policy, max_states=MAX_STATES):
    caps = policy.caps()

    def successors(state):
        started = policy.next_plays(state)
        reward = step_reward(instance, state, started)
        return reward, started, enumerate_step(instance, state, started, caps)

    result = _average(*build_chain(MonotonePolicyState.initial(instance), successors, max_states), instance.n)
    logger.info(f"Exact eval of monotone policy ({policy.variant}): {result.value:.10g} over {result.n_states} states")
    return result


# --- Probe ---

def probe_step_branches(instance, params, arm_states, caps):
    """(expected value, plays, [(probability, next arm states)]) for one probe-policy step."""
    decision = probe_policy_next(params, arm_states)
    value = 0.0
    for i in decision.plays:
        s = decision.staged[i]
        value += instance.arms[i].arm.r * belief_good(instance.arms[i].arm, BeliefState(s.last, s.t))
    branches_per_arm = []
    for i in decision.probes:
        value -= instance.arms[i].cost
        s = decision.staged[i]
        good = belief_good(instance.arms[i].arm, BeliefState(s.last, s.t))
        branches_per_arm.append([(good, (i, GOOD)), (1.0 - good, (i, BAD))])
    branches = []
    for combo in itertools.product(*branches_per_arm):
        prob = 1.0
        observations = {}
        for p, (i, seen) in combo:
            prob *= p
            observations[i] = seen
        if prob > 0.0:
            branches.append((prob, advance_probe_state(params, decision, observations, caps)))
    return value, decision.plays, branches


def exact_probe_eval(instance, params, T_cap=T_CAP, max_states=MAX_STATES):
    caps = [max(max(a.d, a.e) + 1 if a.active else 1, mixing_time(pa.arm, cap=T_cap))
            for a, pa in zip(params.arms, instance.arms)]

    def successors(arm_states):
        return probe_step_branches(instance, params, arm_states, caps)

    result = _average(*build_chain(initial_probe_state(instance.n), successors, max_states), instance.n)
    logger.info(f"Exact eval of probe policy: {result.value:.10g} over {result.n_states} states")
    return result


# --- Replenishment ---

def exact_replenish_eval(instance, policy, max_states=MAX_STATES):
    def successors(statuses):
        action = policy.next_action(instance, statuses)
        return step_value(instance, statuses, action), action.serve, enumerate_replenish_step(instance, statuses, action)

    result = _average(*build_chain(initial_statuses(instance), successors, max_states), instance.n)
    logger.info(f"Exact eval of {policy.name} replenishment policy: {result.value:.10g} "
                f"over {result.n_states} states")
    return result


def exact_policy_eval(instance, policy, T_cap=T_CAP, max_states=MAX_STATES):
    """Dispatches to the exact evaluator of the instance's model."""
    if isinstance(instance, FeedbackInstance):
        return exact_feedback_eval(instance.arms, policy, T_cap, max_states)
    if isinstance(instance, MonotoneInstance):
        return exact_monotone_eval(instance, policy, max_states)
    if isinstance(instance, ProbeInstance):
        return exact_probe_eval(instance, policy.params, T_cap, max_states)
    if isinstance(instance, ReplenishInstance):
        return exact_replenish_eval(instance, policy, max_states)
    raise ShapeMismatch(f"unsupported instance type {type(instance).__name__}")
