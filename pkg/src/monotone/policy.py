"""BalancedIndex policies for monotone bandits and the one-step dynamics they run on.

Per arm the state is (k, y): the current state and the number of steps since
the arm was last played (y = 1 right after a play). A play of state k after
waiting y steps earns r_k up front and, when it ends, moves to j with
probability f_k(y)·q(k, j).
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from src.core.errors import VariantMismatch
from src.monotone.balance_lp import BASE, MULTIPLAY, SWITCHING

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonotonePolicyState:
    """Joint policy state; ``locks`` maps a playing arm to (steps left, waiting time at start)."""
    states: Tuple[int, ...]
    y: Tuple[int, ...]
    locks: Tuple[Tuple[int, int, int], ...] = ()
    current: Optional[int] = None

    @classmethod
    def initial(cls, instance):
        return cls(tuple(arm.initial_state for arm in instance.arms), (1,) * instance.n)

    @property
    def lock_map(self) -> Dict[int, Tuple[int, int]]:
        return {i: (left, y0) for i, left, y0 in self.locks}

    def key(self):
        return self.states, self.y, self.locks, self.current


def _ready(arm_params, k, y):
    t = arm_params.t_tight[k]
    return y >= t, y - t


def _pick_ready(candidates):
    # largest overshoot y − t_k first, then lowest id
    return min(candidates, key=lambda c: (-c[1], c[0]))[0]


def _base_next(params, state):
    continuous = params.u1
    if continuous:
        return (continuous[0],)
    for i, a in enumerate(params.arms):
        if a.active and a.good[state.states[i]]:
            return (i,)
    ready = []
    for i, a in enumerate(params.arms):
        if not a.active:
            continue
        ok, over = _ready(a, state.states[i], state.y[i])
        if ok:
            ready.append((i, over))
    return (_pick_ready(ready),) if ready else ()


def _multiplay_next(params, state, M):
    locked = state.lock_map
    u1 = params.u1[:M]
    started = [i for i in u1 if i not in locked]
    slots = M - len(u1)
    holders = [i for i in locked if i not in u1]
    g_arms = [i for i, a in enumerate(params.arms)
              if a.active and i not in u1 and i not in locked and a.good[state.states[i]]]
    for i in g_arms:
        if len(holders) >= slots:
            break
        holders.append(i)
        started.append(i)
    ready = []
    for i, a in enumerate(params.arms):
        if not a.active or i in u1 or i in locked or a.good[state.states[i]]:
            continue
        ok, over = _ready(a, state.states[i], state.y[i])
        if ok:
            ready.append((i, over))
    while ready and len(holders) < slots:
        i = _pick_ready(ready)
        ready = [c for c in ready if c[0] != i]
        holders.append(i)
        started.append(i)
    return tuple(sorted(started))


def _switching_next(params, state):
    continuous = params.u1
    if continuous:
        return (continuous[0],)
    cur = state.current
    if cur is not None and params.arms[cur].active:
        a = params.arms[cur]
        k = state.states[cur]
        if a.good[k]:
            return (cur,) if state.y[cur] >= a.t_tight[k] else ()
    ready = []
    for i, a in enumerate(params.arms):
        if not a.active:
            continue
        ok, over = _ready(a, state.states[i], state.y[i])
        if ok:
            ready.append((i, over))
    return (_pick_ready(ready),) if ready else ()


def monotone_index_next(params, state, variant, M=1):
    """Arms that start a play this step; arms under a duration lock keep playing implicitly."""
    if variant == BASE:
        return _base_next(params, state)
    if variant == MULTIPLAY:
        return _multiplay_next(params, state, M)
    if variant == SWITCHING:
        return _switching_next(params, state)
    raise VariantMismatch(f"unknown variant {variant!r}")


def transition_outcomes(arm, k, t):
    """[(probability, next state)] for a play of state k after waiting t steps."""
    f = arm.states[k].escape(t)
    outcomes = []
    stay = 1.0
    for j in range(arm.n_states):
        prob = f * arm.q[k, j]
        if prob > 0.0:
            outcomes.append((prob, j))
            stay -= prob
    if stay > 1e-15:
        outcomes.append((stay, k))
    return outcomes


def step_reward(instance, state, started):
    """Reward credited at play start, net of switching charges."""
    reward = sum(instance.arms[i].states[state.states[i]].reward for i in started)
    if instance.has_switching and started:
        b = started[0]
        if state.current is None:
            reward -= instance.switch_in[b]
        elif state.current != b:
            reward -= instance.switch_out[state.current] + instance.switch_in[b]
    return reward


def _begin(instance, state, started):
    locks = dict(state.lock_map)
    for i in started:
        locks[i] = (instance.arms[i].states[state.states[i]].duration, state.y[i])
    return locks


def _finish(instance, state, locks, moves, caps):
    states = list(state.states)
    y = list(state.y)
    remaining = []
    for i in range(instance.n):
        if i in locks:
            left, y0 = locks[i]
            if left > 1:
                remaining.append((i, left - 1, y0))
            else:
                states[i] = moves[i]
                y[i] = 1
        else:
            nxt = y[i] + 1
            if caps is not None:
                nxt = min(nxt, caps[i][states[i]])
            y[i] = nxt
    return states, y, tuple(remaining)


def enumerate_step(instance, state, started, caps=None):
    """All successor states with probabilities after starting ``started`` this step."""
    locks = _begin(instance, state, started)
    ending = sorted(i for i, (left, _) in locks.items() if left == 1)
    branches = [transition_outcomes(instance.arms[i], state.states[i], locks[i][1]) for i in ending]
    current = started[0] if instance.has_switching and started else state.current
    successors = []
    for combo in itertools.product(*branches):
        prob = 1.0
        moves = {}
        for i, (p, j) in zip(ending, combo):
            prob *= p
            moves[i] = j
        states, y, remaining = _finish(instance, state, locks, moves, caps)
        successors.append((prob, MonotonePolicyState(tuple(states), tuple(y), remaining, current)))
    return successors


def sample_step(instance, state, started, uniforms, caps=None):
    """One sampled successor; ``uniforms[i]`` drives arm i's transition."""
    locks = _begin(instance, state, started)
    moves = {}
    for i, (left, y0) in locks.items():
        if left != 1:
            continue
        u = uniforms[i]
        acc = 0.0
        outcomes = transition_outcomes(instance.arms[i], state.states[i], y0)
        moves[i] = outcomes[-1][1]
        for p, j in outcomes:
            acc += p
            if u < acc:
                moves[i] = j
                break
    states, y, remaining = _finish(instance, state, locks, moves, caps)
    current = started[0] if instance.has_switching and started else state.current
    return MonotonePolicyState(tuple(states), tuple(y), remaining, current)


def waiting_caps(params, instance):
    """Per (arm, state) waiting time beyond which neither f nor readiness changes."""
    caps = []
    for a, arm in zip(params.arms, instance.arms):
        row = []
        for k, s in enumerate(arm.states):
            t = a.t_tight[k]
            t = int(t) if t != float("inf") else 1
            row.append(max(t, s.escape.last_time))
        caps.append(tuple(row))
    return tuple(caps)


@dataclass
class MonotoneBalancedPolicy:
    """Binds extracted parameters, the instance and the variant into a steppable policy."""
    instance: object
    params: object
    variant: str = field(default=BASE)
    name: str = "monotone-balanced"

    def initial_state(self):
        return MonotonePolicyState.initial(self.instance)

    def next_plays(self, state):
        return monotone_index_next(self.params, state, self.variant, self.instance.M)

    def caps(self):
        return waiting_caps(self.params, self.instance)
