"""Upper-body motion FSM: REST, ACTION, TRANSITION, STOP, JOYSTICK.

Emits desired upper-body joint positions and velocities. Every state
change routes through TRANSITION, a per-joint cubic Hermite segment from
the current (position, velocity) to the target's, so the emitted
trajectory stays C1 across switches. STOP freezes mid-motion and keeps a
resume point so playback continues exactly where it left off.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

REST = "REST"
ACTION = "ACTION"
TRANSITION = "TRANSITION"
STOP = "STOP"
JOYSTICK = "JOYSTICK"

# order of the upper-body joint vector everywhere in this module
UPPER_BODY_JOINTS = [
    "head_pitch", "head_yaw",
    "l_shoulder_pitch", "l_shoulder_roll", "l_elbow",
    "r_shoulder_pitch", "r_shoulder_roll", "r_elbow",
]
NU = len(UPPER_BODY_JOINTS)


def upper_body_indices(model) -> np.ndarray:
    return np.array([model.joint_index(n) for n in UPPER_BODY_JOINTS])


@dataclass
class MotionClip:
    name: str
    rate: float
    samples: np.ndarray          # (N, NU)
    loop: bool = False

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.rate

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Linear interpolation between frames; the last frame holds."""
        n = self.samples.shape[0]
        if self.loop:
            t = t % self.duration
        s = t * self.rate
        k = int(s)
        if k >= n - 1:
            return self.samples[-1].copy(), np.zeros(NU)
        a = s - k
        vel = (self.samples[k + 1] - self.samples[k]) * self.rate
        return self.samples[k] * (1 - a) + self.samples[k + 1] * a, vel

    @classmethod
    def from_dict(cls, doc: dict, limits: np.ndarray | None = None) -> "MotionClip":
        if doc.get("joints") != UPPER_BODY_JOINTS:
            raise ValueError(f"clip {doc.get('name')}: joint order must be "
                             f"{UPPER_BODY_JOINTS}")
        samples = np.asarray(doc["samples"], dtype=float)
        if samples.ndim != 2 or samples.shape[1] != NU:
            raise ValueError("clip samples must be (N, %d)" % NU)
        if limits is not None:
            if np.any(samples < limits[:, 0] - 1e-9) or np.any(samples > limits[:, 1] + 1e-9):
                raise ValueError(f"clip {doc.get('name')}: samples violate joint limits")
        return cls(name=doc["name"], rate=float(doc["rate"]), samples=samples,
                   loop=bool(doc.get("loop", False)))


def load_clip(path: str | Path, limits: np.ndarray | None = None) -> MotionClip:
    with open(path) as f:
        return MotionClip.from_dict(json.load(f), limits)


def default_clip_dir() -> Path:
    return Path(__file__).parent / "data" / "clips"


def load_clip_library(directory: str | Path | None = None,
                      limits: np.ndarray | None = None) -> dict[str, MotionClip]:
    directory = Path(directory) if directory else default_clip_dir()
    clips = {}
    for p in sorted(directory.glob("*.json")):
        clip = load_clip(p, limits)
        clips[clip.name] = clip
    return clips


# ---------------------------------------------------------------------------
# cubic Hermite transitions

@dataclass
class HermiteSegment:
    p0: np.ndarray
    v0: np.ndarray
    p1: np.ndarray
    v1: np.ndarray
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")


def hermite_eval(seg: HermiteSegment, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity at normalized time s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    T = seg.duration
    p = h00 * seg.p0 + h10 * T * seg.v0 + h01 * seg.p1 + h11 * T * seg.v1
    d00 = 6 * s**2 - 6 * s
    d10 = 3 * s**2 - 4 * s + 1
    d01 = -d00
    d11 = 3 * s**2 - 2 * s
    v = (d00 * seg.p0 + d10 * T * seg.v0 + d01 * seg.p1 + d11 * T * seg.v1) / T
    return p, v


# ---------------------------------------------------------------------------
# FSM

@dataclass
class FsmInputs:
    gesture: str | None = None
    stop: bool = False
    resume: bool = False
    rest: bool = False
    joystick: tuple[float, float] | None = None   # yaw, pitch rates in [-1, 1]


@dataclass
class ResumePoint:
    state: str
    clip: str | None
    playhead: float


@dataclass
class BehaviorConfig:
    rest_posture: np.ndarray
    joint_limits: np.ndarray                  # (NU, 2)
    clips: dict[str, MotionClip] = field(default_factory=dict)
    transition_time: float = 1.0
    stop_time: float = 0.3
    head_rate: float = 1.2                    # rad/s at full joystick deflection
    idle_motion: bool = False
    idle_amplitude: float = 0.015
    idle_seed: int = 0

    @classmethod
    def from_model(cls, model, clips=None, **kw) -> "BehaviorConfig":
        idx = upper_body_indices(model)
        return cls(
            rest_posture=model.nominal_posture[idx].copy(),
            joint_limits=model.joint_limits[idx].copy(),
            clips=clips if clips is not None else
            load_clip_library(limits=model.joint_limits[idx]),
            **kw,
        )


@dataclass
class FsmState:
    state: str = REST
    clip: str | None = None
    playhead: float = 0.0
    segment: HermiteSegment | None = None
    progress: float = 0.0
    pending: str | None = None
    pending_clip: str | None = None
    pending_playhead: float = 0.0
    resume_point: ResumePoint | None = None
    q: np.ndarray = None
    qd: np.ndarray = None
    hold_posture: np.ndarray = None     # frozen arms for STOP / JOYSTICK
    t: float = 0.0
    idle_state: np.ndarray = None

    def occupancy(self) -> str:
        return self.state


def initial_fsm(cfg: BehaviorConfig) -> FsmState:
    q = cfg.rest_posture.copy()
    return FsmState(state=REST, q=q, qd=np.zeros(NU), hold_posture=q.copy(),
                    idle_state=np.zeros(NU))


def begin_transition(fsm: FsmState, target_state: str, duration: float, *,
                     target_q: np.ndarray, target_qd: np.ndarray,
                     clip: str | None = None, playhead: float = 0.0) -> FsmState:
    """Splice a Hermite segment from the current motion onto a target."""
    if duration <= 0:
        raise ValueError("transition duration must be positive")
    if fsm.state == target_state and fsm.state != TRANSITION and \
            clip == fsm.clip and np.allclose(target_q, fsm.q, atol=1e-12) and \
            np.allclose(target_qd, fsm.qd, atol=1e-12):
        return fsm
    seg = HermiteSegment(p0=fsm.q.copy(), v0=fsm.qd.copy(),
                         p1=np.asarray(target_q, dtype=float).copy(),
                         v1=np.asarray(target_qd, dtype=float).copy(),
                         duration=duration)
    return replace(fsm, state=TRANSITION, segment=seg, progress=0.0,
                   pending=target_state, pending_clip=clip,
                   pending_playhead=playhead)


def _idle_overlay(cfg: BehaviorConfig, fsm: FsmState, dt: float) -> np.ndarray:
    # low-pass filtered noise, deterministic in the FSM clock
    rng = np.random.default_rng(cfg.idle_seed + int(fsm.t * 1000))
    target = cfg.idle_amplitude * rng.uniform(-1, 1, NU)
    alpha = min(dt / 0.8, 1.0)
    return fsm.idle_state * (1 - alpha) + target * alpha


def fsm_step(fsm: FsmState, inputs: FsmInputs, dt: float,
             cfg: BehaviorConfig) -> tuple[FsmState, np.ndarray, np.ndarray]:
    """Advance the behavior FSM one tick; returns (state, q_up, qd_up)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if inputs.joystick is not None:
        jy, jp = inputs.joystick
        if not (-1.0 <= jy <= 1.0 and -1.0 <= jp <= 1.0):
            raise ValueError("joystick axes must lie in [-1, 1]")
    if inputs.gesture is not None and inputs.gesture not in cfg.clips:
        raise KeyError(f"unknown clip {inputs.gesture!r}")

    fsm = replace(fsm, t=fsm.t + dt)

    # --- input edge handling (stop wins, then resume, rest, gesture, joystick)
    if inputs.stop and fsm.state not in (STOP,) and fsm.pending != STOP:
        resume = ResumePoint(
            state=fsm.pending if fsm.state == TRANSITION else fsm.state,
            clip=fsm.pending_clip if fsm.state == TRANSITION else fsm.clip,
            playhead=fsm.pending_playhead if fsm.state == TRANSITION else fsm.playhead,
        )
        if resume.state in (TRANSITION, STOP, None):
            resume = ResumePoint(state=REST, clip=None, playhead=0.0)
        brake = np.clip(fsm.q + 0.5 * cfg.stop_time * fsm.qd,
                        cfg.joint_limits[:, 0], cfg.joint_limits[:, 1])
        fsm = begin_transition(fsm, STOP, cfg.stop_time,
                               target_q=brake, target_qd=np.zeros(NU))
        fsm = replace(fsm, resume_point=resume)
    elif inputs.resume and fsm.state == STOP and fsm.resume_point is not None:
        rp = fsm.resume_point
        if rp.state == ACTION and rp.clip is not None:
            tq, tqd = cfg.clips[rp.clip].sample(rp.playhead)
        else:
            tq, tqd = cfg.rest_posture.copy(), np.zeros(NU)
        fsm = begin_transition(fsm, rp.state, cfg.transition_time,
                               target_q=tq, target_qd=tqd,
                               clip=rp.clip, playhead=rp.playhead)
        fsm = replace(fsm, resume_point=None)
    elif inputs.rest and fsm.state not in (REST, STOP):
        fsm = begin_transition(fsm, REST, cfg.transition_time,
                               target_q=cfg.rest_posture.copy(),
                               target_qd=np.zeros(NU))
    elif inputs.gesture is not None and fsm.state != STOP:
        clip = cfg.clips[inputs.gesture]
        tq, tqd = clip.sample(0.0)
        fsm = begin_transition(fsm, ACTION, cfg.transition_time,
                               target_q=tq, target_qd=tqd,
                               clip=inputs.gesture, playhead=0.0)
    elif inputs.joystick is not None and fsm.state in (REST, ACTION):
        fsm = begin_transition(fsm, JOYSTICK, cfg.transition_time,
                               target_q=fsm.q.copy(), target_qd=np.zeros(NU))

    # --- advance the active state
    if fsm.state == TRANSITION:
        progress = fsm.progress + dt / fsm.segment.duration
        if progress >= 1.0:
            q, qd = fsm.segment.p1.copy(), fsm.segment.v1.copy()
            fsm = replace(fsm, state=fsm.pending, clip=fsm.pending_clip,
                          playhead=fsm.pending_playhead, segment=None,
                          progress=0.0, pending=None, pending_clip=None,
                          pending_playhead=0.0, hold_posture=q.copy())
        else:
            q, qd = hermite_eval(fsm.segment, progress)
            fsm = replace(fsm, progress=progress)
    elif fsm.state == ACTION:
        clip = cfg.clips[fsm.clip]
        playhead = fsm.playhead + dt
        if playhead >= clip.duration and not clip.loop:
            # motion finished: glide back to the calibrated posture
            q, qd = clip.sample(clip.duration)
            fsm = replace(fsm, playhead=clip.duration, q=q, qd=qd)
            fsm = begin_transition(fsm, REST, cfg.transition_time,
                                   target_q=cfg.rest_posture.copy(),
                                   target_qd=np.zeros(NU))
            q, qd = hermite_eval(fsm.segment, 0.0)
        else:
            q, qd = clip.sample(playhead)
            fsm = replace(fsm, playhead=playhead)
    elif fsm.state == STOP:
        q, qd = fsm.hold_posture.copy(), np.zeros(NU)
    elif fsm.state == JOYSTICK:
        q = fsm.hold_posture.copy()
        qd = np.zeros(NU)
        if inputs.joystick is not None:
            jy, jp = inputs.joystick
            q[1] = q[1] + cfg.head_rate * jy * dt
            q[0] = q[0] + cfg.head_rate * jp * dt
            qd[1], qd[0] = cfg.head_rate * jy, cfg.head_rate * jp
        fsm = replace(fsm, hold_posture=np.clip(
            q, cfg.joint_limits[:, 0], cfg.joint_limits[:, 1]))
    else:  # REST
        q, qd = cfg.rest_posture.copy(), np.zeros(NU)
        if cfg.idle_motion:
            idle = _idle_overlay(cfg, fsm, dt)
            qd = (idle - fsm.idle_state) / dt
            fsm = replace(fsm, idle_state=idle)
            q = q + idle

    q = np.clip(q, cfg.joint_limits[:, 0], cfg.joint_limits[:, 1])
    fsm = replace(fsm, q=q, qd=qd)
    return fsm, q, qd
