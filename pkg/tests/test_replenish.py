import numpy as np
import pytest

from src.core.errors import UnsupportedShape
from src.core.types import Machine, ReplenishInstance
from src.gallery.instances import replenish_gap
from src.gallery.random_instances import random_replenish_instance
from src.replenish.policy import (
    QUEUED, SERVING, ReplenishAction, ReplenishPolicy, WhittleReplenishPolicy, enumerate_replenish_step,
    initial_statuses, replenish_policy_next, sample_replenish_step, step_value, whittle_indices,
    whittle_replenish_next,
)
from src.replenish.replenish_lp import MachineParams, ReplenishParams, build_replenish_lp, solve_replenish
from src.simulate.exact_eval import exact_replenish_eval


def _machine_params(z, active=True):
    k = len(z)
    return MachineParams(0.3, (0.0,) * k, (0.1,) * k, tuple(z), 0.1, active)


@pytest.fixture
def gap_instance():
    return replenish_gap(10)


@pytest.fixture
def three_state():
    p = [[0.6, 0.3, 0.1], [0.0, 0.7, 0.3], [0.0, 0.0, 1.0]]
    return Machine((3.0, 1.5, 0.0), (0.5, 0.4, 0.2), p, 0.4)


# Test the balanced LP on the replenishment gap instance
def test_gap_instance_lp(gap_instance):
    params = solve_replenish(gap_instance)
    assert params.lam == pytest.approx(1 / 3, abs=1e-7)
    assert params.objective == pytest.approx(2 / 3, abs=1e-7)
    assert not params.machines[0].active
    assert params.machines[1].active
    assert params.machines[1].triggers == frozenset({1})
    assert params.h.sum() == pytest.approx(params.lam, abs=1e-8)


def test_gap_instance_whittle_indices(gap_instance):
    assert whittle_indices(gap_instance) == pytest.approx([1e-3, 1.0])


# Test the balanced policy beats plain Whittle on the gap instance
def test_gap_instance_values(gap_instance):
    params = solve_replenish(gap_instance)
    balanced = exact_replenish_eval(gap_instance, ReplenishPolicy(params)).value
    whittle = exact_replenish_eval(gap_instance, WhittleReplenishPolicy(gap_instance)).value
    assert balanced >= 0.40
    assert whittle <= 0.01
    assert balanced / whittle >= 40


def test_balanced_at_least_half_lp(gap_instance):
    params = solve_replenish(gap_instance)
    value = exact_replenish_eval(gap_instance, ReplenishPolicy(params)).value
    assert value >= params.objective / 2 - 1e-6


def test_build_replenish_lp_rows(three_state):
    model = build_replenish_lp(ReplenishInstance((three_state,)))
    assert model.row_names == ["L", "H_0", "phi_0_0", "phi_0_1", "phi_0_2"]
    assert "z_0_0" not in model.var_names


# Test the repair-queue decisions
def test_policy_queues_triggers_and_serves_lowest_id():
    params = ReplenishParams(0.5, 1.0, 0.0, 1, (_machine_params((0.0, 0.2)), _machine_params((0.0, 0.4))))
    action = replenish_policy_next(params, (1, 1))
    assert action == ReplenishAction(admit=(0, 1), serve=(0,))
    action = replenish_policy_next(params, (SERVING, 1))
    assert action == ReplenishAction(admit=(1,), serve=(0,))
    assert replenish_policy_next(params, (0, 0)) == ReplenishAction((), ())


def test_inactive_machine_never_queued():
    params = ReplenishParams(0.5, 1.0, 0.0, 2, (_machine_params((0.0, 0.2), active=False),
                                               _machine_params((0.0, 0.4))))
    assert replenish_policy_next(params, (1, 1)) == ReplenishAction(admit=(1,), serve=(1,))


def test_whittle_serves_highest_index(gap_instance):
    action = whittle_replenish_next(gap_instance, (1, 1))
    assert action.admit == (0, 1)
    assert action.serve == (1,)


def test_whittle_rejects_three_states(three_state):
    with pytest.raises(UnsupportedShape, match=r"machines\[0\]"):
        whittle_indices(ReplenishInstance((three_state,)))


# Test the step dynamics
def test_step_value_charges_admissions(three_state):
    instance = ReplenishInstance((three_state, three_state))
    action = ReplenishAction(admit=(0,), serve=(0,))
    assert step_value(instance, (2, 1), action) == pytest.approx(-0.2 + 1.5)
    assert step_value(instance, (QUEUED, SERVING), ReplenishAction((), ())) == 0.0


def test_enumerate_step_probabilities(three_state):
    instance = ReplenishInstance((three_state, three_state))
    action = ReplenishAction(admit=(1,), serve=(1,))
    successors = enumerate_replenish_step(instance, (0, 2), action)
    assert sum(p for p, _ in successors) == pytest.approx(1.0)
    assert {s[1] for _, s in successors} == {0, SERVING}
    assert sample_replenish_step(instance, (0, 2), action, np.array([0.0, 0.99])) == (0, SERVING)
    assert initial_statuses(instance) == (0, 0)


@pytest.mark.slow
def test_random_instances_half_lp():
    rng = np.random.default_rng(11)
    for _ in range(20):
        instance = random_replenish_instance(rng)
        params = solve_replenish(instance)
        value = exact_replenish_eval(instance, ReplenishPolicy(params)).value
        assert value >= params.objective / 2 - 1e-6
