"""Seeded Monte Carlo evaluation of restless-bandit policies.

Each replication owns a ``numpy.random.Generator(Philox(...))`` spawned from
one master ``SeedSequence`` and its own policy state; replications run under
joblib and are reduced in replication order, so a fixed seed reproduces the
result bit for bit regardless of ``n_jobs``.
"""
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.random import Generator, Philox, SeedSequence
from pydantic import BaseModel, Field, model_validator

from src.core.errors import ShapeMismatch
from src.core.settings import section
from src.core.types import BAD, GOOD, BeliefState, FeedbackInstance, MonotoneInstance, ProbeInstance, ReplenishInstance
from src.monotone.policy import MonotoneBalancedPolicy, MonotonePolicyState, sample_step, step_reward
from src.probe.policy import ProbePolicy, advance_probe_state, initial_probe_state
from src.replenish.policy import ReplenishPolicy, initial_statuses, sample_replenish_step, step_value
from src.replenish.replenish_lp import TOL_Z

# --- Configuration ---
_SIM = section("simulation")
BLOCK_SIZE = 4096

logger = logging.getLogger(__name__)


class SimConfig(BaseModel):
    """Horizon (burn-in included), replications and seeding of a Monte Carlo run."""
    horizon: int = Field(default=_SIM["horizon"], gt=0)
    burn_in: int = Field(default=_SIM["burn_in"], ge=0)
    replications: int = Field(default=_SIM["replications"], ge=1)
    seed: int = Field(default=_SIM["seed"], ge=0)
    n_jobs: int = _SIM["n_jobs"]
    crediting: Literal["last_observed", "current_state"] = _SIM["crediting"]

    @model_validator(mode="after")
    def _horizon_exceeds_burn_in(self):
        if not self.horizon > self.burn_in:
            raise ValueError(f"horizon = {self.horizon} must exceed burn_in = {self.burn_in}")
        return self

    @property
    def measured_steps(self):
        return self.horizon - self.burn_in


@dataclass
class SimResult:
    """Mean per-step value across replications with its standard error, play rates and counters."""
    mean: float
    stderr: float
    play_rates: np.ndarray
    counters: dict
    metadata: dict = field(default_factory=dict)
    trace: pd.DataFrame = None

    def to_dict(self):
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "play_rates": [float(r) for r in self.play_rates],
            "counters": {k: float(v) for k, v in self.counters.items()},
            "metadata": self.metadata,
        }


def replication_streams(seed, replications):
    return SeedSequence(seed).spawn(replications)


def _uniform_rows(rng, n_cols, steps):
    """Yields one row of uniforms per step, drawn in blocks."""
    done = 0
    while done < steps:
        size = min(BLOCK_SIZE, steps - done)
        block = rng.random((size, n_cols))
        for row in block:
            yield row
        done += size


class _Tally:
    def __init__(self, n, burn_in):
        self.burn_in = burn_in
        self.total = 0.0
        self.plays = np.zeros(n)
        self.counters = {}

    def add(self, step, value, played=(), **counts):
        if step < self.burn_in:
            return
        self.total += value
        for i in played:
            self.plays[i] += 1
        for key, c in counts.items():
            self.counters[key] = self.counters.get(key, 0) + c

    def summary(self, steps):
        return self.total / steps, self.plays / steps, {k: v / steps for k, v in self.counters.items()}


# --- Feedback ---

def _feedback_replication(arms, policy, config, stream):
    rng = Generator(Philox(stream))
    n = len(arms)
    alpha = np.array([a.alpha for a in arms])
    beta = np.array([a.beta for a in arms])
    r = np.array([a.r for a in arms])
    hidden = rng.random(n) < alpha
    beliefs = tuple(BeliefState(BAD, 1) for _ in range(n))
    tally = _Tally(n, config.burn_in)
    for step, u in enumerate(_uniform_rows(rng, n, config.horizon)):
        action = policy.next_action(beliefs)
        aged = [BeliefState(b.last, b.t + 1) for b in beliefs]
        if action is None:
            tally.add(step, 0.0, idles=1)
        else:
            if config.crediting == "last_observed":
                value = r[action] if beliefs[action].last == GOOD else 0.0
            else:
                value = r[action] if hidden[action] else 0.0
            aged[action] = BeliefState(GOOD if hidden[action] else BAD, 1)
            tally.add(step, value, (action,))
        beliefs = tuple(aged)
        hidden = np.where(hidden, u >= beta, u < alpha)
    return tally.summary(config.measured_steps)


# --- Monotone ---

def _monotone_replication(instance, policy, config, stream):
    rng = Generator(Philox(stream))
    state = MonotonePolicyState.initial(instance)
    tally = _Tally(instance.n, config.burn_in)
    for step, u in enumerate(_uniform_rows(rng, instance.n, config.horizon)):
        started = policy.next_plays(state)
        value = step_reward(instance, state, started)
        switched = int(bool(started) and instance.has_switching and state.current is not None
                       and state.current != started[0])
        charge = 0.0
        if instance.has_switching and started:
            charge = instance.arms[started[0]].states[state.states[started[0]]].reward - value
        tally.add(step, value, started, switches=switched, switch_cost=charge, plays_started=len(started))
        state = sample_step(instance, state, started, u)
    return tally.summary(config.measured_steps)


# --- Probe ---

def _probe_replication(instance, policy, config, stream):
    rng = Generator(Philox(stream))
    n = instance.n
    arms = [pa.arm for pa in instance.arms]
    alpha = np.array([a.alpha for a in arms])
    beta = np.array([a.beta for a in arms])
    hidden = rng.random(n) < alpha
    arm_states = initial_probe_state(n)
    tally = _Tally(n, config.burn_in)
    for step, u in enumerate(_uniform_rows(rng, n, config.horizon)):
        decision = policy.decide(arm_states)
        value = sum(arms[i].r for i in decision.plays if hidden[i])
        value -= sum(instance.arms[i].cost for i in decision.probes)
        observations = {i: GOOD if hidden[i] else BAD for i in decision.probes}
        tally.add(step, value, decision.plays, probes=len(decision.probes))
        arm_states = advance_probe_state(policy.params, decision, observations)
        hidden = np.where(hidden, u >= beta, u < alpha)
    return tally.summary(config.measured_steps)


# --- Replenishment ---

def _support(params):
    """States each repairing machine may visit: x_u + z_u > 0."""
    support = {}
    for i, m in enumerate(params.machines):
        if m.active and m.triggers:
            support[i] = {u for u in range(len(m.x)) if m.x[u] + m.z[u] > TOL_Z}
    return support


def _replenish_replication(instance, policy, config, stream):
    rng = Generator(Philox(stream))
    statuses = initial_statuses(instance)
    support = _support(policy.params) if isinstance(policy, ReplenishPolicy) else {}
    tally = _Tally(instance.n, config.burn_in)
    for step, u in enumerate(_uniform_rows(rng, instance.n, config.horizon)):
        action = policy.next_action(instance, statuses)
        value = step_value(instance, statuses, action)
        outside = sum(1 for i, allowed in support.items() if statuses[i] >= 0 and statuses[i] not in allowed)
        tally.add(step, value, action.serve, repairs=len(action.admit), support_violations=outside)
        statuses = sample_replenish_step(instance, statuses, action, u)
    return tally.summary(config.measured_steps)


def _dispatch(instance, policy):
    if isinstance(instance, FeedbackInstance):
        if len(policy.required_ages()) != instance.n:
            raise ShapeMismatch(f"policy covers {len(policy.required_ages())} arms, instance has {instance.n}")
        return _feedback_replication, instance.arms, "feedback"
    if isinstance(instance, MonotoneInstance):
        if not isinstance(policy, MonotoneBalancedPolicy) or policy.instance.n != instance.n:
            raise ShapeMismatch("monotone instances need a MonotoneBalancedPolicy built for the same instance")
        return _monotone_replication, instance, "monotone"
    if isinstance(instance, ProbeInstance):
        if not isinstance(policy, ProbePolicy) or len(policy.params.arms) != instance.n:
            raise ShapeMismatch("probe instances need a ProbePolicy built for the same instance")
        return _probe_replication, instance, "probe"
    if isinstance(instance, ReplenishInstance):
        if not hasattr(policy, "next_action"):
            raise ShapeMismatch("replenishment instances need a repair-queue policy")
        return _replenish_replication, instance, "replenish"
    raise ShapeMismatch(f"unsupported instance type {type(instance).__name__}")


def simulate(instance, policy, config=None):
    """Runs ``config.replications`` independent replications and reduces them in order."""
    config = config or SimConfig()
    runner, payload, kind = _dispatch(instance, policy)
    streams = replication_streams(config.seed, config.replications)
    outcomes = Parallel(n_jobs=config.n_jobs)(
        delayed(runner)(payload, policy, config, stream) for stream in streams)

    means = np.array([o[0] for o in outcomes])
    rates = np.mean([o[1] for o in outcomes], axis=0)
    keys = sorted({k for o in outcomes for k in o[2]})
    counters = {k: float(np.mean([o[2].get(k, 0.0) for o in outcomes])) for k in keys}
    stderr = float(means.std(ddof=1) / np.sqrt(len(means))) if len(means) > 1 else 0.0

    records = []
    for rep, (mean, rep_rates, rep_counters) in enumerate(outcomes):
        row = {"replication": rep, "mean_reward": mean}
        row.update({f"play_rate_{i}": rate for i, rate in enumerate(rep_rates)})
        row.update(rep_counters)
        records.append(row)
    metadata = {
        "model": kind,
        "policy": getattr(policy, "name", type(policy).__name__),
        "horizon": config.horizon,
        "burn_in": config.burn_in,
        "replications": config.replications,
        "seed": config.seed,
        "crediting": config.crediting if kind == "feedback" else "current_state",
        "rng": "Philox",
    }
    result = SimResult(float(means.mean()), stderr, rates, counters, metadata, pd.DataFrame.from_records(records))
    if counters.get("support_violations", 0.0) > 0.0:
        logger.warning(f"Repairing machines visited states outside the LP support "
                       f"({counters['support_violations']:.3e} per step)")
    logger.info(f"Simulated {metadata['policy']} on {kind}: {result.mean:.6f} ± {result.stderr:.2e} "
                f"({config.replications} x {config.measured_steps} steps)")
    return result
