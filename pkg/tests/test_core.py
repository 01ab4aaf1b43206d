import math

import numpy as np
import pytest

from src.core.beliefs import (
    belief_good, belief_u, belief_u_array, belief_v, belief_v_array, mixing_time, nu_power,
)
from src.core.errors import (
    InstanceError, ParameterOutOfRange, RestlessError, ShapeMismatch, SolverError, VariantMismatch,
)
from src.core.settings import load_settings, section
from src.core.types import (
    BAD, GOOD, BeliefState, FeedbackArm, FeedbackInstance, Machine, MonotoneArm, MonotoneInstance,
    MonotoneState, PiecewiseLinearMonotone, pwl_eval,
)


def _state(reward=1.0, duration=1, value=0.5):
    return MonotoneState(reward, duration, PiecewiseLinearMonotone.constant(value))


# Test the error hierarchy separates input and computation failures
def test_error_hierarchy():
    assert issubclass(ParameterOutOfRange, ValueError)
    assert issubclass(VariantMismatch, InstanceError)
    assert issubclass(SolverError, RuntimeError)
    assert not issubclass(SolverError, ValueError)
    assert issubclass(InstanceError, RestlessError)


# Test settings expose every section
def test_settings_sections():
    params = load_settings()
    assert params["feedback"]["epsilon"] == pytest.approx(1e-3)
    assert section("lp")["tol_lp"] == pytest.approx(1e-9)


def test_settings_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="Solver config not found"):
        load_settings(tmp_path / "missing.yaml")


def test_settings_missing_sections(tmp_path):
    path = tmp_path / "partial.yaml"
    path.write_text("lp:\n  tol_lp: 1.0e-9\n")
    with pytest.raises(ValueError, match="missing sections"):
        load_settings(path)


# Test FeedbackArm validation
@pytest.mark.parametrize("alpha,beta,r", [(0.0, 0.5, 1.0), (0.5, 0.0, 1.0), (0.6, 0.4, 1.0), (0.2, 0.2, -1.0),
                                          (0.2, math.nan, 1.0)])
def test_feedback_arm_rejects(alpha, beta, r):
    with pytest.raises(ParameterOutOfRange):
        FeedbackArm(alpha, beta, r)


def test_feedback_instance_names_arm():
    arm = FeedbackArm(0.5, 0.4, 1.0, delta=0.05)
    with pytest.raises(ParameterOutOfRange, match=r"arms\[1\]"):
        FeedbackInstance((FeedbackArm(0.1, 0.1, 1.0), arm), delta=0.2)


def test_belief_state():
    belief = BeliefState(GOOD, 1)
    assert belief.aged() == BeliefState(GOOD, 2)
    assert BeliefState(BAD, 5).aged(cap=5) == BeliefState(BAD, 5)
    with pytest.raises(InstanceError):
        BeliefState("x", 1)
    with pytest.raises(ParameterOutOfRange):
        BeliefState(BAD, 0)


# Test closed-form beliefs against the two-state chain
def test_beliefs_match_matrix_powers():
    arm = FeedbackArm(0.07, 0.19, 1.0)
    P = np.array([[1 - arm.beta, arm.beta], [arm.alpha, 1 - arm.alpha]])
    for t in (1, 2, 5, 17, 60):
        Pt = np.linalg.matrix_power(P, t)
        assert belief_u(arm, t) == pytest.approx(Pt[0, 0], abs=1e-12)
        assert belief_v(arm, t) == pytest.approx(Pt[1, 0], abs=1e-12)
        assert belief_u(arm, t) - belief_v(arm, t) == pytest.approx(arm.nu ** t, abs=1e-12)


def test_belief_monotonicity():
    arm = FeedbackArm(0.1, 0.2, 1.0)
    ts = np.arange(1, 200)
    u, v = belief_u_array(arm, ts), belief_v_array(arm, ts)
    assert np.all(np.diff(u) <= 1e-15)
    assert np.all(np.diff(v) >= -1e-15)
    assert u[0] == pytest.approx(1 - arm.beta)
    assert v[0] == pytest.approx(arm.alpha)
    assert belief_good(arm, BeliefState(BAD, 3)) == pytest.approx(belief_v(arm, 3))


def test_beliefs_reject_zero_age():
    with pytest.raises(ParameterOutOfRange):
        belief_v(FeedbackArm(0.1, 0.1, 1.0), 0)


# Test ν^t in log space and its underflow clamp
def test_nu_power():
    assert nu_power(0.5, 3) == pytest.approx(0.125)
    assert nu_power(0.5, 100) == pytest.approx(0.5 ** 100, rel=1e-12)
    assert nu_power(0.5, 5000) == 0.0
    assert nu_power(0.9, math.inf) == 0.0


def test_mixing_time():
    arm = FeedbackArm(0.25, 0.25, 1.0)
    t = mixing_time(arm)
    assert nu_power(arm.nu, t) <= 1e-9 < nu_power(arm.nu, t - 1)
    assert mixing_time(arm, cap=5) == 5


# Test piecewise-linear escape functions
def test_pwl_interpolation():
    f = PiecewiseLinearMonotone(((1, 0.0), (3, 0.4), (5, 1.0)))
    assert f(2) == pytest.approx(0.2)
    assert f(4) == pytest.approx(0.7)
    assert pwl_eval(f, 50) == pytest.approx(1.0)
    assert f.last_time == 5
    with pytest.raises(ParameterOutOfRange):
        pwl_eval(f, 0)


@pytest.mark.parametrize("points", [((2, 0.1),), ((1, 0.5), (2, 0.4)), ((1, 0.1), (1, 0.2)), ((1, 1.5),)])
def test_pwl_rejects(points):
    with pytest.raises(InstanceError):
        PiecewiseLinearMonotone(points)


def test_pwl_from_samples():
    f = PiecewiseLinearMonotone.from_samples([0.1, 0.3, 0.6])
    assert f.breakpoints == ((1, 0.1), (2, 0.3), (3, 0.6))


# Test monotone arm validation
def test_monotone_arm_requires_strong_connectivity():
    with pytest.raises(InstanceError, match="strongly connected"):
        MonotoneArm((_state(), _state()), [[0.0, 1.0], [0.0, 0.0]])


def test_monotone_arm_rejects_bad_q():
    with pytest.raises(ShapeMismatch):
        MonotoneArm((_state(), _state()), [[0.0, 1.0]])
    with pytest.raises(ParameterOutOfRange):
        MonotoneArm((_state(), _state()), [[0.0, 1.2], [1.0, 0.0]])
    with pytest.raises(InstanceError):
        MonotoneArm((_state(), _state()), [[0.5, 0.5], [1.0, 0.0]])


def test_monotone_delta_p():
    arm = MonotoneArm((_state(), _state()), [[0.0, 0.3], [0.6, 0.0]])
    assert np.allclose(arm.delta_p([2.0, 0.0]), [-0.6, 1.2])


def test_switching_requires_single_play():
    arm = MonotoneArm((_state(), _state()), [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(VariantMismatch):
        MonotoneInstance((arm, arm), M=2, switch_out=(0.1, 0.1), switch_in=(0.0, 0.0))
    long_arm = MonotoneArm((_state(duration=2), _state()), [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(VariantMismatch):
        MonotoneInstance((long_arm,), switch_in=(0.2,))
    assert MonotoneInstance((arm, long_arm), M=2).default_variant() == "multiplay"
    assert MonotoneInstance((arm,)).default_variant() == "base"


# Test machine validation
def test_machine_rejects():
    with pytest.raises(ParameterOutOfRange, match="stochastic"):
        Machine((1.0, 0.0), (0.0, 0.0), [[0.5, 0.4], [0.0, 1.0]], 0.5)
    with pytest.raises(ParameterOutOfRange, match="repair rate"):
        Machine((1.0,), (0.0,), [[1.0]], 0.0)
    with pytest.raises(ShapeMismatch):
        Machine((1.0, 0.0), (0.0,), [[0.5, 0.5], [0.0, 1.0]], 0.5)
