"""Pendulum propagation, footstep planning and swing spline checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minibiped.lip import (
    LipState,
    SwingSpline,
    body_reference,
    desired_momentum,
    eval_swing,
    lip_propagate,
    plan_footstep,
    poly_eval,
    stride_velocity_gain,
    swing_coefficients,
    touchdown_target,
)

M, H, TS = 25.0, 0.6, 0.4
OMEGA = math.sqrt(9.81 / H)


# ---------------------------------------------------------------------------
# propagation

def test_propagate_equilibrium_stays_put():
    s = lip_propagate(LipState(0.0, 0.0, H), 0.37)
    assert s.x == 0.0 and s.xd == 0.0


def test_propagate_closed_form_values():
    s = lip_propagate(LipState(0.1, 0.0, H), 0.1)
    assert s.x == pytest.approx(0.1 * math.cosh(OMEGA * 0.1), abs=1e-12)
    assert s.xd == pytest.approx(0.1 * OMEGA * math.sinh(OMEGA * 0.1), abs=1e-12)
    # headline numbers: ~0.1083 m and ~0.168 m/s after 100 ms
    assert s.x == pytest.approx(0.1083, abs=5e-5)
    assert s.xd == pytest.approx(0.168, abs=5e-4)


@given(st.floats(-0.3, 0.3), st.floats(-1.0, 1.0), st.floats(0.0, 0.5))
@settings(max_examples=100, deadline=None)
def test_propagate_semigroup(x, xd, dt):
    s = LipState(x, xd, H)
    twice = lip_propagate(lip_propagate(s, dt), dt)
    once = lip_propagate(s, 2 * dt)
    assert twice.x == pytest.approx(once.x, abs=1e-12)
    assert twice.xd == pytest.approx(once.xd, abs=1e-12)


@given(st.floats(-0.3, 0.3), st.floats(-1.0, 1.0), st.floats(0.0, 0.5))
@settings(max_examples=100, deadline=None)
def test_propagate_time_reversal(x, xd, dt):
    s = LipState(x, xd, H)
    back = lip_propagate(lip_propagate(s, dt), -dt)
    assert back.x == pytest.approx(x, abs=1e-10)
    assert back.xd == pytest.approx(xd, abs=1e-10)


# ---------------------------------------------------------------------------
# desired momentum

def test_sagittal_momentum_is_mhv():
    lx, _ = desired_momentum((0.16, 0.0), 0.2, TS, "left", M, H)
    assert lx == pytest.approx(2.4, abs=1e-12)


def test_lateral_oscillation_term_value():
    _, ly_l = desired_momentum((0.0, 0.0), 0.20, TS, "left", M, H)
    _, ly_r = desired_momentum((0.0, 0.0), 0.20, TS, "right", M, H)
    expect = M * H * 0.20 * OMEGA * math.sinh(OMEGA * TS) / (1 + math.cosh(OMEGA * TS))
    assert ly_r == pytest.approx(expect, abs=1e-12)
    assert ly_r == pytest.approx(8.11, abs=5e-3)
    assert ly_l == pytest.approx(-expect, abs=1e-12)


def test_stance_flip_changes_only_oscillation_sign():
    v = (0.1, 0.05)
    _, ly_l = desired_momentum(v, 0.2, TS, "left", M, H)
    _, ly_r = desired_momentum(v, 0.2, TS, "right", M, H)
    assert ly_l + ly_r == pytest.approx(2 * M * H * v[1], abs=1e-12)


# ---------------------------------------------------------------------------
# footstep planning

def test_capture_offset_from_rest():
    p = plan_footstep(0.0, 2.4, 0.0, TS, M, H)
    expect = 2.4 / (M * H * OMEGA * math.sinh(OMEGA * TS))
    assert p == pytest.approx(expect, abs=1e-12)
    assert p == pytest.approx(0.0164, abs=1e-4)


def test_capture_offset_zero_when_momentum_matched():
    L_now = 1.7
    L_des = math.cosh(OMEGA * TS) * L_now
    assert plan_footstep(L_now, L_des, 0.0, TS, M, H) == pytest.approx(0.0, abs=1e-12)


def test_plan_rejects_degenerate_time():
    with pytest.raises(ValueError):
        plan_footstep(0.0, 1.0, TS, TS, M, H)


def lip_walk(v_des, x0, xd0, n_steps):
    """Plan -> propagate swing -> exchange feet, returning stride averages."""
    gain = stride_velocity_gain(H, TS)
    L_des = M * H * v_des * gain
    state = LipState(x0, xd0, H)
    stance_world = 0.0
    averages = []
    for _ in range(n_steps):
        com_start = stance_world + state.x
        td = lip_propagate(state, TS)
        p_sf = touchdown_target(state, 0.0, TS, L_des, M)
        stance_world += p_sf
        state = LipState(td.x - p_sf, td.xd, H)
        averages.append((stance_world + state.x - com_start) / TS)
    return averages, state


def test_closed_loop_converges_to_commanded_velocity():
    averages, _ = lip_walk(0.16, 0.0, 0.0, 10)
    assert abs(averages[-1] - 0.16) <= 0.02 * 0.16
    assert all(abs(a - 0.16) <= 0.02 * 0.16 for a in averages[4:])


def test_capture_property_within_six_steps():
    for xd0 in (-0.5, -0.2, 0.31, 0.5):
        _, state = lip_walk(0.0, 0.0, xd0, 6)
        assert abs(state.momentum(M)) < 0.05 * M * H * 0.5


def test_touchdown_replan_consistent_mid_swing():
    # replanning later in the swing from the propagated state gives the same
    # world-frame target as planning at the start
    state = LipState(0.03, 0.2, H)
    L_des = 2.9
    p_start = touchdown_target(state, 0.0, TS, L_des, M)
    mid = lip_propagate(state, 0.25)
    p_mid = touchdown_target(mid, 0.25, TS, L_des, M)
    assert p_mid == pytest.approx(p_start, abs=1e-12)


# ---------------------------------------------------------------------------
# swing splines

def test_unit_bump_coefficients():
    c = swing_coefficients(0.0, 0.0, 1.0, constrain_midpoint=True)
    assert np.allclose(c, [0, 0, 0, 64, -192, 192, -64], atol=1e-9)


def test_constant_spline():
    c = swing_coefficients(0.7, 0.7, 0.7, constrain_midpoint=True)
    assert np.allclose(c, [0.7, 0, 0, 0, 0, 0, 0], atol=1e-9)


def residuals(c, p0, pf, mid):
    vals = []
    p, dp, ddp = poly_eval(c, 0.0)
    vals += [p - p0, dp, ddp]
    p, dp, ddp = poly_eval(c, 1.0)
    vals += [p - pf, dp, ddp]
    p, _, _ = poly_eval(c, 0.5)
    vals.append(p - mid)
    return np.abs(vals)


def test_1000_random_splines_boundary_residuals():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        p0, pf, peak = rng.uniform(-1, 1, 3)
        c = swing_coefficients(p0, pf, peak, constrain_midpoint=True)
        worst = max(worst, float(np.max(residuals(c, p0, pf, peak))))
        c = swing_coefficients(p0, pf)
        worst = max(worst, float(np.max(residuals(c, p0, pf, 0.5 * (p0 + pf)))))
    assert worst < 1e-9


def test_eval_swing_values_and_phase_scaling():
    sp = SwingSpline.plan([0, 0, 0], [0, 0, 0], 1.0, TS)
    p, v, a = eval_swing(sp, 0.0)
    assert np.allclose(p, [0, 0, 0], atol=1e-12)
    assert np.allclose(v, 0.0, atol=1e-12)
    assert np.allclose(a, 0.0, atol=1e-12)
    p, _, _ = eval_swing(sp, 0.5)
    assert p[2] == pytest.approx(1.0, abs=1e-9)


def test_eval_swing_velocity_matches_finite_difference():
    sp = SwingSpline.plan([0.0, -0.1, 0.0], [0.15, 0.1, 0.01], 0.06, TS)
    eps = 1e-6
    for phi in (0.123, 0.5, 0.876):
        _, v, a = eval_swing(sp, phi)
        pp, vp, _ = eval_swing(sp, phi + eps)
        pm, vm, _ = eval_swing(sp, phi - eps)
        assert np.allclose(v, (pp - pm) / (2 * eps) / TS, atol=1e-6)
        assert np.allclose(a, (vp - vm) / (2 * eps) / TS, atol=1e-4)


def test_eval_swing_range_checked():
    sp = SwingSpline.plan([0, 0, 0], [1, 0, 0], 0.06, TS)
    with pytest.raises(ValueError):
        eval_swing(sp, -0.01)
    with pytest.raises(ValueError):
        eval_swing(sp, 1.2)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.0, 0.3))
@settings(max_examples=200, deadline=None)
def test_spline_midpoint_always_met(p0, pf, peak):
    c = swing_coefficients(p0, pf, peak, constrain_midpoint=True)
    p, _, _ = poly_eval(c, 0.5)
    assert p == pytest.approx(peak, abs=1e-9)


# ---------------------------------------------------------------------------
# body reference

def test_body_yaw_symmetric_midpoint():
    assert body_reference((0, 0), 0, 0.2, -0.2).yaw == pytest.approx(0.0, abs=1e-12)


def test_body_yaw_arithmetic_midpoint():
    assert body_reference((0, 0), 0, 0.1, 0.3).yaw == pytest.approx(0.2, abs=1e-12)


def test_body_yaw_wraps_through_pi():
    ref = body_reference((0, 0), 0, math.radians(175), math.radians(-175))
    assert abs(ref.yaw) == pytest.approx(math.pi, abs=1e-9)


def test_command_rotated_into_world():
    ref = body_reference((0.2, 0.0), 0.0, math.pi / 2, math.pi / 2)
    assert np.allclose(ref.com_velocity, [0.0, 0.2], atol=1e-12)
