"""Upper-body FSM checks: Hermite math, C1 transitions, stop/resume."""

import numpy as np
import pytest

from minibiped.behavior import (
    ACTION,
    JOYSTICK,
    NU,
    REST,
    STOP,
    TRANSITION,
    BehaviorConfig,
    FsmInputs,
    HermiteSegment,
    MotionClip,
    begin_transition,
    fsm_step,
    hermite_eval,
    initial_fsm,
    load_clip_library,
)
from minibiped.model import load_default_model

DT = 0.01


@pytest.fixture(scope="module")
def cfg():
    return BehaviorConfig.from_model(load_default_model())


def run(fsm, cfg, inputs, seconds):
    trace = []
    for _ in range(int(round(seconds / DT))):
        fsm, q, qd = fsm_step(fsm, inputs, DT, cfg)
        inputs = FsmInputs()
        trace.append((fsm.state, q, qd))
    return fsm, trace


# ---------------------------------------------------------------------------
# hermite

def seg1(p0, v0, p1, v1, T=1.0):
    mk = lambda x: np.full(1, float(x))
    return HermiteSegment(mk(p0), mk(v0), mk(p1), mk(v1), T)


def test_hermite_endpoint_identities():
    seg = seg1(0.2, 0.4, -0.7, 1.1, T=0.8)
    p, v = hermite_eval(seg, 0.0)
    assert p[0] == pytest.approx(0.2, abs=1e-12) and v[0] == pytest.approx(0.4, abs=1e-12)
    p, v = hermite_eval(seg, 1.0)
    assert p[0] == pytest.approx(-0.7, abs=1e-12) and v[0] == pytest.approx(1.1, abs=1e-12)


def test_hermite_smoothstep_value():
    # p0=0, p1=1, zero end velocities: p(s) = 3s^2 - 2s^3; p(0.25) = 0.15625
    p, _ = hermite_eval(seg1(0.0, 0.0, 1.0, 0.0), 0.25)
    assert p[0] == pytest.approx(0.15625, abs=1e-12)
    p, _ = hermite_eval(seg1(0.0, 0.0, 1.0, 0.0), 0.5)
    assert p[0] == pytest.approx(0.5, abs=1e-12)


def test_hermite_constant_case():
    seg = seg1(0.3, 0.0, 0.3, 0.0)
    for s in np.linspace(0, 1, 11):
        p, v = hermite_eval(seg, s)
        assert p[0] == pytest.approx(0.3, abs=1e-12)
        assert v[0] == pytest.approx(0.0, abs=1e-12)


def test_hermite_range_and_duration_checked():
    with pytest.raises(ValueError):
        hermite_eval(seg1(0, 0, 1, 0), 1.5)
    with pytest.raises(ValueError):
        seg1(0, 0, 1, 0, T=0.0)


# ---------------------------------------------------------------------------
# FSM basics

def test_initial_state_emits_rest(cfg):
    fsm = initial_fsm(cfg)
    fsm, q, qd = fsm_step(fsm, FsmInputs(), DT, cfg)
    assert fsm.state == REST
    assert np.allclose(q, cfg.rest_posture)
    assert np.allclose(qd, 0.0)


def test_gesture_routes_through_transition(cfg):
    fsm = initial_fsm(cfg)
    fsm, _, _ = fsm_step(fsm, FsmInputs(gesture="wave"), DT, cfg)
    assert fsm.state == TRANSITION
    assert fsm.pending == ACTION
    assert fsm.segment.duration == pytest.approx(1.0)   # default transition time
    fsm, trace = run(fsm, cfg, FsmInputs(), 1.05)
    assert fsm.state == ACTION
    assert fsm.clip == "wave"


def test_transition_completion_lands_on_first_sample(cfg):
    fsm = initial_fsm(cfg)
    fsm, _, _ = fsm_step(fsm, FsmInputs(gesture="thumbs_up"), DT, cfg)
    target = cfg.clips["thumbs_up"].sample(0.0)[0]
    while fsm.state == TRANSITION:
        fsm, q, _ = fsm_step(fsm, FsmInputs(), DT, cfg)
    assert np.max(np.abs(q - target)) < 1e-9


def test_unknown_clip_rejected(cfg):
    with pytest.raises(KeyError):
        fsm_step(initial_fsm(cfg), FsmInputs(gesture="moonwalk"), DT, cfg)


def test_joystick_out_of_range_rejected(cfg):
    with pytest.raises(ValueError):
        fsm_step(initial_fsm(cfg), FsmInputs(joystick=(1.5, 0.0)), DT, cfg)


def test_full_gesture_trace_matches_block_structure(cfg):
    fsm = initial_fsm(cfg)
    fsm, t0 = run(fsm, cfg, FsmInputs(), 0.2)
    fsm, _, _ = fsm_step(fsm, FsmInputs(gesture="thumbs_up"), DT, cfg)
    fsm, t1 = run(fsm, cfg, FsmInputs(), 6.0)
    states = [s for s, _, _ in t0] + [TRANSITION] + [s for s, _, _ in t1]
    dedup = [states[0]]
    for s in states[1:]:
        if s != dedup[-1]:
            dedup.append(s)
    assert dedup == [REST, TRANSITION, ACTION, TRANSITION, REST]


def test_emitted_positions_always_inside_limits(cfg):
    fsm = initial_fsm(cfg)
    inputs = FsmInputs(gesture="cheer")
    for k in range(800):
        fsm, q, _ = fsm_step(fsm, inputs, DT, cfg)
        inputs = FsmInputs(joystick=(1.0, 1.0)) if k == 400 else FsmInputs()
        assert np.all(q >= cfg.joint_limits[:, 0] - 1e-12)
        assert np.all(q <= cfg.joint_limits[:, 1] + 1e-12)


# ---------------------------------------------------------------------------
# continuity

def test_c1_continuity_across_state_changes(cfg):
    # at every tick where the FSM switches state, the emitted trajectory
    # must carry on from the previous sample: no position snap beyond one
    # tick of motion, no velocity snap
    dt = 1e-3
    fsm = initial_fsm(cfg)
    fsm, _, _ = fsm_step(fsm, FsmInputs(gesture="wave"), dt, cfg)
    prev = (fsm.state, fsm.q.copy(), fsm.qd.copy())
    changes = 0
    for _ in range(int(6.5 / dt)):
        fsm, q, qd = fsm_step(fsm, FsmInputs(), dt, cfg)
        s0, q0, qd0 = prev
        if fsm.state != s0:
            changes += 1
            vmax = max(np.max(np.abs(qd0)), np.max(np.abs(qd)), 1e-9)
            assert np.max(np.abs(q - q0)) < vmax * dt * 1.5 + 1e-9
            assert np.max(np.abs(qd - qd0)) < 0.05
        prev = (fsm.state, q.copy(), qd.copy())
    assert changes >= 3   # into ACTION, back through TRANSITION, into REST


def test_retarget_mid_transition_keeps_velocity(cfg):
    fsm = initial_fsm(cfg)
    fsm, _, _ = fsm_step(fsm, FsmInputs(gesture="wave"), DT, cfg)
    fsm, _ = run(fsm, cfg, FsmInputs(), 0.4)
    v_before = fsm.qd.copy()
    fsm2 = begin_transition(fsm, ACTION, 1.0,
                            target_q=cfg.clips["cheer"].sample(0.0)[0],
                            target_qd=np.zeros(NU), clip="cheer")
    assert np.allclose(fsm2.segment.v0, v_before, atol=1e-9)
    _, v_at_splice = hermite_eval(fsm2.segment, 0.0)
    assert np.allclose(v_at_splice, v_before, atol=1e-9)


def test_splice_takes_current_velocity(cfg):
    fsm = initial_fsm(cfg)
    fsm.qd = np.full(NU, 0.4)
    fsm2 = begin_transition(fsm, REST, 1.0, target_q=cfg.rest_posture,
                            target_qd=np.zeros(NU))
    _, v = hermite_eval(fsm2.segment, 0.0)
    assert np.allclose(v, 0.4, atol=1e-12)


# ---------------------------------------------------------------------------
# stop / resume

def test_stop_then_resume_reproduces_playback(cfg):
    # reference run without interruption
    fsm = initial_fsm(cfg)
    fsm, _, _ = fsm_step(fsm, FsmInputs(gesture="wave"), DT, cfg)
    ref_by_playhead = {}
    f = fsm
    for _ in range(600):
        f, q, _ = fsm_step(f, FsmInputs(), DT, cfg)
        if f.state == ACTION:
            ref_by_playhead[round(f.playhead, 6)] = q.copy()

    # interrupted run: stop mid-action, hold, resume
    fsm, _ = run(fsm, cfg, FsmInputs(), 1.8)   # transition done, mid-clip
    assert fsm.state == ACTION
    playhead_at_stop = fsm.playhead
    fsm, _, _ = fsm_step(fsm, FsmInputs(stop=True), DT, cfg)
    assert fsm.pending == STOP
    fsm, _ = run(fsm, cfg, FsmInputs(), 1.0)
    assert fsm.state == STOP
    held = fsm.q.copy()
    fsm, trace = run(fsm, cfg, FsmInputs(), 0.5)
    assert all(s == STOP for s, _, _ in trace)
    assert np.allclose(fsm.q, held, atol=1e-12)

    fsm, _, _ = fsm_step(fsm, FsmInputs(resume=True), DT, cfg)
    assert fsm.state == TRANSITION
    assert fsm.pending == ACTION
    assert fsm.pending_playhead == pytest.approx(playhead_at_stop)
    while fsm.state == TRANSITION:
        fsm, _, _ = fsm_step(fsm, FsmInputs(), DT, cfg)
    assert fsm.state == ACTION
    # after the return transition, playback reproduces the reference samples
    for _ in range(40):
        fsm, q, _ = fsm_step(fsm, FsmInputs(), DT, cfg)
        if fsm.state != ACTION:
            break
        key = round(fsm.playhead, 6)
        if key in ref_by_playhead:
            assert np.allclose(q, ref_by_playhead[key], atol=1e-9)


def test_joystick_integrates_head_rates(cfg):
    fsm = initial_fsm(cfg)
    fsm, _, _ = fsm_step(fsm, FsmInputs(joystick=(0.5, -0.25)), DT, cfg)
    fsm, _ = run(fsm, cfg, FsmInputs(), 1.2)
    assert fsm.state == JOYSTICK
    q0 = fsm.q.copy()
    for _ in range(100):
        fsm, q, _ = fsm_step(fsm, FsmInputs(joystick=(0.5, -0.25)), DT, cfg)
    assert q[1] - q0[1] == pytest.approx(cfg.head_rate * 0.5 * 1.0, rel=0.05)
    assert q[0] - q0[0] == pytest.approx(-cfg.head_rate * 0.25 * 1.0, rel=0.05)
    # saturation at limits
    for _ in range(2000):
        fsm, q, _ = fsm_step(fsm, FsmInputs(joystick=(1.0, 1.0)), DT, cfg)
    assert q[1] <= cfg.joint_limits[1, 1] + 1e-12


def test_clip_validation_rejects_out_of_limit_samples(cfg):
    bad = {
        "name": "bad", "rate": 50.0,
        "joints": list(np.array(["head_pitch", "head_yaw", "l_shoulder_pitch",
                                 "l_shoulder_roll", "l_elbow", "r_shoulder_pitch",
                                 "r_shoulder_roll", "r_elbow"])),
        "samples": [[0, 0, 0, 0, 0, 0, 0, 9.0]],
    }
    with pytest.raises(ValueError, match="limits"):
        MotionClip.from_dict(bad, cfg.joint_limits)
