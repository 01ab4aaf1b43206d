"""Two-stage probing policy: try a ready bad-observed arm for m_i steps, exploit a good-observed
arm for e_i steps, and probe at the end of every block."""
import logging
from dataclasses import dataclass, replace
from typing import Tuple

from src.core.types import BAD, GOOD

IDLE, TRY, EXPLOIT = 0, 1, 2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeArmState:
    """Last observation, its age, the stage the arm is in and the plays left before its probe."""
    last: str = BAD
    t: int = 1
    stage: int = IDLE
    left: int = 0


@dataclass(frozen=True)
class ProbeDecision:
    plays: Tuple[int, ...]
    probes: Tuple[int, ...]
    staged: Tuple[ProbeArmState, ...]


def initial_probe_state(n):
    return tuple(ProbeArmState() for _ in range(n))


def ready_overshoot(a, state):
    """Overshoot past readiness for an idle arm, or None when it is not ready."""
    if state.last == GOOD:
        return state.t
    threshold = a.wait + 1 if a.m > 0 else a.d
    return state.t - threshold if state.t >= threshold else None


def probe_policy_next(params, arm_states):
    """Starts blocks while fewer than M arms are staged, then plays and probes staged arms."""
    staged = list(arm_states)
    occupied = sum(s.stage != IDLE for s in staged)
    ready = []
    for i, (a, s) in enumerate(zip(params.arms, staged)):
        if not a.active or s.stage != IDLE:
            continue
        over = ready_overshoot(a, s)
        if over is not None:
            ready.append((i, over))
    # largest overshoot first, then lowest id
    ready.sort(key=lambda c: (-c[1], c[0]))
    for i, _ in ready:
        if occupied >= params.M:
            break
        a, s = params.arms[i], staged[i]
        if s.last == GOOD:
            staged[i] = replace(s, stage=EXPLOIT, left=a.e)
        else:
            staged[i] = replace(s, stage=TRY, left=a.m)
        occupied += 1
    plays = tuple(i for i, s in enumerate(staged) if s.stage != IDLE and s.left >= 1)
    probes = tuple(i for i, s in enumerate(staged) if s.stage != IDLE and s.left <= 1)
    return ProbeDecision(plays, probes, tuple(staged))


def advance_probe_state(params, decision, observations, cap=None):
    """Applies the end-of-step probes; ``observations`` maps a probed arm to its revealed state."""
    nxt = []
    for i, s in enumerate(decision.staged):
        if i in observations:
            seen = observations[i]
            if seen == GOOD and params.arms[i].active:
                nxt.append(ProbeArmState(GOOD, 1, EXPLOIT, params.arms[i].e))
            else:
                nxt.append(ProbeArmState(seen, 1, IDLE, 0))
            continue
        t = s.t + 1 if cap is None else min(s.t + 1, cap[i])
        left = s.left - 1 if i in decision.plays else s.left
        nxt.append(ProbeArmState(s.last, t, s.stage, left))
    return tuple(nxt)


class ProbePolicy:
    name = "probe-two-stage"

    def __init__(self, params):
        self.params = params

    def initial_state(self, n):
        return initial_probe_state(n)

    def decide(self, arm_states):
        return probe_policy_next(self.params, arm_states)

