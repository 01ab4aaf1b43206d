from typing import Annotated, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

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


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_burstiness(arms, delta):
    for i, a in enumerate(arms):
        if a.alpha + a.beta > 1 - delta:
            raise ValueError(f"arms[{i}]: alpha + beta = {a.alpha + a.beta} outside expected range (0, {1 - delta}]")


class FeedbackArmFile(_Strict):
    """One two-state arm observed only when played."""
    alpha: float = Field(gt=0, lt=1)
    beta: float = Field(gt=0, lt=1)
    r: float = Field(ge=0)


class FeedbackFile(_Strict):
    """Request model for a Feedback MAB instance."""
    type: Literal["feedback"]
    delta: float = Field(default=DEFAULT_DELTA, gt=0, lt=1)
    arms: List[FeedbackArmFile] = Field(min_length=1)

    @model_validator(mode="after")
    def _burstiness(self):
        _check_burstiness(self.arms, self.delta)
        return self

    def to_instance(self):
        arms = tuple(FeedbackArm(a.alpha, a.beta, a.r, self.delta) for a in self.arms)
        return FeedbackInstance(arms, self.delta)


class MonotoneStateFile(_Strict):
    reward: float = Field(ge=0)
    duration: int = Field(default=1, ge=1)
    f_breakpoints: List[List[float]] = Field(min_length=1)


class MonotoneArmFile(_Strict):
    states: List[MonotoneStateFile] = Field(min_length=1)
    q: List[List[float]]
    initial_state: int = Field(default=0, ge=0)


class MonotoneFile(_Strict):
    """Request model for a Monotone bandit instance, optionally with plays, durations and switching costs."""
    type: Literal["monotone"]
    delta: float = Field(default=DEFAULT_DELTA, gt=0, lt=1)
    M: int = Field(default=1, ge=1)
    switch_out: List[float] = Field(default_factory=list)
    switch_in: List[float] = Field(default_factory=list)
    arms: List[MonotoneArmFile] = Field(min_length=1)

    def to_instance(self):
        arms = []
        for arm in self.arms:
            states = tuple(
                MonotoneState(s.reward, s.duration,
                              PiecewiseLinearMonotone(tuple((int(t), v) for t, v in s.f_breakpoints)))
                for s in arm.states
            )
            arms.append(MonotoneArm(states, arm.q, arm.initial_state))
        return MonotoneInstance(tuple(arms), self.M, tuple(self.switch_out), tuple(self.switch_in))


class ProbeArmFile(FeedbackArmFile):
    cost: float = Field(ge=0)


class ProbeFile(_Strict):
    """Request model for a Feedback MAB instance with paid probes."""
    type: Literal["probe"]
    delta: float = Field(default=DEFAULT_DELTA, gt=0, lt=1)
    M: int = Field(default=1, ge=1)
    arms: List[ProbeArmFile] = Field(min_length=1)

    @model_validator(mode="after")
    def _burstiness(self):
        _check_burstiness(self.arms, self.delta)
        return self

    def to_instance(self):
        arms = tuple(ProbeArm(FeedbackArm(a.alpha, a.beta, a.r, self.delta), a.cost) for a in self.arms)
        return ProbeInstance(arms, self.M, self.delta)


class MachineFile(_Strict):
    rewards: List[float] = Field(min_length=1)
    costs: List[float] = Field(min_length=1)
    p: List[List[float]]
    s: float = Field(gt=0, le=1)
    initial: int = Field(default=0, ge=0)


class ReplenishFile(_Strict):
    """Request model for a machine replenishment instance."""
    type: Literal["replenish"]
    delta: float = Field(default=DEFAULT_DELTA, gt=0, lt=1)
    M: int = Field(default=1, ge=1)
    machines: List[MachineFile] = Field(min_length=1)

    def to_instance(self):
        machines = tuple(Machine(tuple(m.rewards), tuple(m.costs), m.p, m.s, m.initial) for m in self.machines)
        return ReplenishInstance(machines, self.M)


InstanceFile = Annotated[Union[FeedbackFile, MonotoneFile, ProbeFile, ReplenishFile], Field(discriminator="type")]
INSTANCE_ADAPTER = TypeAdapter(InstanceFile)
