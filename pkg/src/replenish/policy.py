"""Repair-queue policies for machine replenishment and the step dynamics they share.

A machine's status is its active state u ≥ 0, ``QUEUED`` while waiting for the
repair server, or ``SERVING`` once a repair has started. Admissions happen at
step start; a repair in service completes at step end with probability s_i
and the machine restarts at its initial state.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Tuple

from src.core.errors import UnsupportedShape

QUEUED, SERVING = -1, -2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplenishAction:
    admit: Tuple[int, ...]
    serve: Tuple[int, ...]


def initial_statuses(instance):
    return tuple(machine.initial for machine in instance.machines)


def _serve(statuses, admit, M, order):
    serving = [i for i, s in enumerate(statuses) if s == SERVING]
    waiting = [i for i, s in enumerate(statuses) if s == QUEUED] + list(admit)
    free = M - len(serving)
    started = sorted(waiting, key=order)[:max(free, 0)]
    return tuple(sorted(serving + started))


def replenish_policy_next(params, statuses):
    """Queue machines that sit in a trigger state, then serve up to M queued machines by lowest id."""
    admit = tuple(i for i, (m, s) in enumerate(zip(params.machines, statuses))
                  if m.active and s >= 0 and s in m.triggers)
    return ReplenishAction(admit, _serve(statuses, admit, params.M, order=lambda i: i))


def _broken_state(machine):
    return 1 - machine.initial


def whittle_indices(instance):
    """η_i = s_i·r_i/p_i for the broken state of two-state machines."""
    etas = []
    for i, machine in enumerate(instance.machines):
        if machine.n_states > 2:
            raise UnsupportedShape(f"machines[{i}]: Whittle baseline supports at most 2 states, "
                                   f"got {machine.n_states}")
        if machine.n_states == 1:
            etas.append(None)
            continue
        rho = machine.initial
        p = machine.p[rho, _broken_state(machine)]
        etas.append(machine.s * machine.rewards[rho] / p if p > 0 else None)
    return etas


def whittle_replenish_next(instance, statuses, etas=None):
    """Queue every broken machine with a positive index and serve the highest indices first."""
    etas = whittle_indices(instance) if etas is None else etas
    admit = tuple(i for i, (machine, s) in enumerate(zip(instance.machines, statuses))
                  if etas[i] is not None and etas[i] > 0 and s >= 0 and s == _broken_state(machine))
    return ReplenishAction(admit, _serve(statuses, admit, instance.M, order=lambda i: (-etas[i], i)))


def step_value(instance, statuses, action):
    """Rewards of machines still running this step minus admission costs."""
    value = 0.0
    for i, (machine, s) in enumerate(zip(instance.machines, statuses)):
        if i in action.admit:
            value -= machine.costs[s]
        elif s >= 0:
            value += machine.rewards[s]
    return value


def _machine_outcomes(machine, status, queued, served):
    if served:
        return [(machine.s, machine.initial), (1.0 - machine.s, SERVING)] if machine.s < 1.0 \
            else [(1.0, machine.initial)]
    if queued or status < 0:
        return [(1.0, status if status < 0 else QUEUED)]
    return [(float(p), v) for v, p in enumerate(machine.p[status]) if p > 0.0]


def enumerate_replenish_step(instance, statuses, action):
    """[(probability, next statuses)] over every joint outcome of the step."""
    branches = [
        _machine_outcomes(machine, s, i in action.admit, i in action.serve)
        for i, (machine, s) in enumerate(zip(instance.machines, statuses))
    ]
    successors = []
    for combo in itertools.product(*branches):
        prob = 1.0
        for p, _ in combo:
            prob *= p
        successors.append((prob, tuple(v for _, v in combo)))
    return successors


def sample_replenish_step(instance, statuses, action, uniforms):
    nxt = []
    for i, (machine, s) in enumerate(zip(instance.machines, statuses)):
        outcomes = _machine_outcomes(machine, s, i in action.admit, i in action.serve)
        chosen = outcomes[-1][1]
        acc = 0.0
        for p, v in outcomes:
            acc += p
            if uniforms[i] < acc:
                chosen = v
                break
        nxt.append(chosen)
    return tuple(nxt)


class ReplenishPolicy:
    name = "balanced"

    def __init__(self, params):
        self.params = params

    def next_action(self, instance, statuses):
        return replenish_policy_next(self.params, statuses)


class WhittleReplenishPolicy:
    name = "plain-whittle"

    def __init__(self, instance):
        self.etas = whittle_indices(instance)

    def next_action(self, instance, statuses):
        return whittle_replenish_next(instance, statuses, self.etas)
