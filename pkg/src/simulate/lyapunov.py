"""State-by-state Lyapunov drift checks for the balanced index policies.

The drift of a decision state is the expected reward of the step plus the
expected change of a potential built from the dual solution. Joint chains
are enumerated exactly; variants whose argument amortises over a whole play
(multiplay, switching, probing) are certified block by block instead.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.sparse.csgraph import connected_components

from src.core.beliefs import belief_good
from src.core.errors import ShapeMismatch
from src.core.settings import section
from src.core.types import BAD, GOOD, BeliefState, FeedbackInstance, MonotoneInstance, ProbeInstance, ReplenishInstance
from src.lp.simplex import lp_solve
from src.monotone.balance_lp import BASE, MULTIPLAY, SWITCHING, build_whittle_lp, lambda_weight
from src.monotone.policy import MonotoneBalancedPolicy, MonotonePolicyState, enumerate_step, step_reward
from src.probe.probe_lp import probe_drift_certificate
from src.replenish.policy import ReplenishPolicy, enumerate_replenish_step, initial_statuses, step_value
from src.simulate.exact_eval import MAX_STATES, T_CAP, build_chain, exact_monotone_eval, feedback_age_caps

# --- Configuration ---
FEEDBACK_SLACK = 1e-9
LP_SLACK = section("monotone")["tol_drift"]

logger = logging.getLogger(__name__)


@dataclass
class DriftReport:
    """Minimum drift over recurrent decision states (or the worst block) against its threshold."""
    model: str
    min_drift: float
    threshold: float
    witness: object = None
    n_states: int = 0
    transient_min: float = math.inf
    lam: float = math.nan
    lp_bound: float = math.nan
    blocks: pd.DataFrame = None

    @property
    def passed(self):
        return self.min_drift >= self.threshold

    def to_dict(self):
        return {
            "model": self.model,
            "min_drift": self.min_drift,
            "threshold": self.threshold,
            "passed": self.passed,
            "witness": repr(self.witness),
            "n_states": self.n_states,
            "transient_min": self.transient_min,
            "lambda": self.lam,
            "lp_bound": self.lp_bound,
        }


def recurrent_mask(P):
    """True for states in a closed communicating class of the sparse chain P."""
    _, labels = connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_classes = np.unique(labels[coo.row[leaving]])
    return ~np.isin(labels, open_classes)


def chain_drift(keys, P, rewards, potential):
    """Per-state drift r(x) + Σ P(x, x')Φ(x') − Φ(x)."""
    phi = np.array([potential(key) for key in keys], dtype=float)
    return rewards + P @ phi - phi


def _summarise(model, keys, P, drift, threshold, **extra):
    recurrent = recurrent_mask(P)
    rec_idx = np.flatnonzero(recurrent)
    worst = rec_idx[np.argmin(drift[rec_idx])]
    transient = drift[~recurrent]
    report = DriftReport(model, float(drift[worst]), threshold, keys[worst], len(keys),
                         float(transient.min()) if transient.size else math.inf, **extra)
    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"Lyapunov check ({model}): min drift {report.min_drift:.10g} vs threshold "
                      f"{threshold:.10g} over {int(recurrent.sum())} recurrent of {len(keys)} states")
    return report


# --- Feedback ---

def feedback_potential(params):
    def potential(beliefs):
        total = 0.0
        for a, belief in zip(params.arms, beliefs):
            if not a.active:
                continue
            total += a.p if belief.last == GOOD else a.h * (min(belief.t, a.t) - 1)
        return total
    return potential


def feedback_lyapunov_check(arms, policy, T_cap=T_CAP, max_states=MAX_STATES):
    """Drift of BalancedIndex under last-observed crediting against (1−ε)·λ_lower."""
    arms = tuple(arms)
    params = policy.params
    caps = feedback_age_caps(arms, policy, T_cap)

    def successors(beliefs):
        action = policy.next_action(beliefs)
        aged = [b.aged(cap) for b, cap in zip(beliefs, caps)]
        if action is None:
            return 0.0, (), [(1.0, tuple(aged))]
        good = belief_good(arms[action], beliefs[action])
        branches = []
        for seen, prob in ((GOOD, good), (BAD, 1.0 - good)):
            nxt = list(aged)
            nxt[action] = BeliefState(seen, 1)
            branches.append((prob, tuple(nxt)))
        reward = arms[action].r if beliefs[action].last == GOOD else 0.0
        return reward, (action,), branches

    initial = tuple(BeliefState(BAD, 1) for _ in arms)
    keys, P, rewards, _ = build_chain(initial, successors, max_states)
    drift = chain_drift(keys, P, rewards, feedback_potential(params))
    threshold = (1.0 - params.epsilon) * params.lambda_lower - FEEDBACK_SLACK
    return _summarise("feedback", keys, P, drift, threshold, lam=params.lambda_star)


# --- Monotone ---

def monotone_potential(instance, params):
    def potential(state):
        total = 0.0
        for i, a in enumerate(params.arms):
            k = state.states[i]
            total += a.p[k]
            t = a.t_tight[k]
            if a.active and t != math.inf:
                total += a.h * (min(state.y[i], t) - 1)
        return total
    return potential


def monotone_lp_bound(instance, variant):
    return lp_solve(build_whittle_lp(instance, variant)).objective


def _monotone_chain_check(instance, policy, lp_bound, max_states):
    params = policy.params
    threshold = lp_bound / 2.0 - LP_SLACK
    if params.u1:
        value = exact_monotone_eval(instance, policy, max_states).value
        logger.info(f"Continuous-play arm {params.u1[0]} certified by its always-play average {value:.10g}")
        return DriftReport("monotone", value, threshold, None, lam=params.lam, lp_bound=lp_bound)
    caps = policy.caps()

    def successors(state):
        started = policy.next_plays(state)
        return step_reward(instance, state, started), started, enumerate_step(instance, state, started, caps)

    keys, P, rewards, _ = build_chain(MonotonePolicyState.initial(instance), successors, max_states)
    drift = chain_drift(keys, P, rewards, monotone_potential(instance, params))
    return _summarise("monotone", keys, P, drift, threshold, lam=params.lam, lp_bound=lp_bound)


def monotone_block_margins(instance, params, variant):
    """Reward plus expected potential change of every play block minus its target (length)·(λ + h)."""
    lam = params.lam
    records = []
    for i, (a, arm) in enumerate(zip(params.arms, instance.arms)):
        if not a.active or a.continuous:
            continue
        for k, state in enumerate(arm.states):
            t = a.t_tight[k]
            if t == math.inf:
                continue
            t = int(t)
            waits = [t] if a.good[k] else range(t, max(t, state.escape.last_time) + 1)
            worst = None
            for y in waits:
                gain = state.escape(y) * a.delta_p[k]
                if variant == SWITCHING and a.good[k]:
                    kind, length = "stick", t
                    value = state.reward + gain
                elif variant == SWITCHING:
                    kind, length = "play", 1
                    cost = instance.switch_out[i] + instance.switch_in[i]
                    value = state.reward - cost + gain - a.h * (t - 1)
                else:
                    kind, length = "play", state.duration
                    value = state.reward + gain - a.h * (t - 1)
                target = length * (lam + a.h)
                row = {"arm": i, "state": k, "kind": kind, "wait": y, "length": length,
                       "value": value, "target": target, "margin": value - target}
                if worst is None or row["margin"] < worst["margin"]:
                    worst = row
            records.append(worst)
    return pd.DataFrame.from_records(
        records, columns=["arm", "state", "kind", "wait", "length", "value", "target", "margin"])


def _block_report(model, blocks, half_objective, lp_bound, lam):
    worst = float(blocks["margin"].min()) if len(blocks) else 0.0
    witness = blocks.loc[blocks["margin"].idxmin()].to_dict() if len(blocks) else None
    report = DriftReport(model, half_objective + min(worst, 0.0), lp_bound / 2.0 - LP_SLACK, witness,
                         lam=lam, lp_bound=lp_bound, blocks=blocks)
    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"Block certificate ({model}): worst margin {worst:.3e} over {len(blocks)} blocks")
    return report


def monotone_lyapunov_check(instance, policy, variant=None, max_states=MAX_STATES):
    variant = variant or policy.variant
    lp_bound = monotone_lp_bound(instance, variant)
    if variant == BASE:
        return _monotone_chain_check(instance, policy, lp_bound, max_states)
    if variant not in (MULTIPLAY, SWITCHING):
        raise ShapeMismatch(f"no drift check for variant {variant!r}")
    params = policy.params
    half = lambda_weight(instance, variant) * params.lam
    return _block_report(f"monotone-{variant}", monotone_block_margins(instance, params, variant),
                         half, lp_bound, params.lam)


# --- Probe ---

def probe_lyapunov_check(instance, params):
    blocks = probe_drift_certificate(instance, params)
    return _block_report("probe", blocks, params.M * params.lam, params.objective, params.lam)


# --- Replenishment ---

def replenish_potential(params):
    def potential(statuses):
        return sum(m.phi[s] for m, s in zip(params.machines, statuses) if s >= 0)
    return potential


def replenish_lyapunov_check(instance, policy, max_states=MAX_STATES):
    """Drift of the duality repair policy against half the balanced LP value."""
    params = policy.params

    def successors(statuses):
        action = policy.next_action(instance, statuses)
        return step_value(instance, statuses, action), action.serve, \
            enumerate_replenish_step(instance, statuses, action)

    keys, P, rewards, _ = build_chain(initial_statuses(instance), successors, max_states)
    drift = chain_drift(keys, P, rewards, replenish_potential(params))
    return _summarise("replenish", keys, P, drift, params.objective / 2.0 - LP_SLACK,
                      lam=params.lam, lp_bound=params.objective)


def lyapunov_check(instance, policy, variant=None, **kwargs):
    """Dispatches to the drift check of the instance's model."""
    if isinstance(instance, FeedbackInstance):
        if not hasattr(policy, "params") or len(policy.params.arms) != instance.n:
            raise ShapeMismatch("feedback drift check needs a BalancedIndexPolicy for the same arms")
        return feedback_lyapunov_check(instance.arms, policy, **kwargs)
    if isinstance(instance, MonotoneInstance):
        if not isinstance(policy, MonotoneBalancedPolicy):
            raise ShapeMismatch("monotone drift check needs a MonotoneBalancedPolicy")
        return monotone_lyapunov_check(instance, policy, variant, **kwargs)
    if isinstance(instance, ProbeInstance):
        return probe_lyapunov_check(instance, policy.params)
    if isinstance(instance, ReplenishInstance):
        if not isinstance(policy, ReplenishPolicy):
            raise ShapeMismatch("replenishment drift check needs the duality ReplenishPolicy")
        return replenish_lyapunov_check(instance, policy, **kwargs)
    raise ShapeMismatch(f"unsupported instance type {type(instance).__name__}")
