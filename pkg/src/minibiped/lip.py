"""Reference generation on the linear inverted pendulum.

The pendulum state is the CoM offset x from the stance contact and the
angular momentum about that contact, L = m h xdot. Footsteps are planned
to reach a desired end-of-step angular momentum; swing feet follow
sixth-order polynomials with a constrained peak height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rotations import circular_midpoint, quat_from_axis_angle

G = 9.81


@dataclass
class LipParams:
    h: float = 0.6               # pendulum height (m)
    gravity: float = G
    step_width: float = 0.20     # nominal step width W (m)
    step_height: float = 0.06    # swing apex clearance (m)
    swing_period: float = 0.4    # T_s (s), gait period band 0.3-0.5 s

    @property
    def omega(self) -> float:
        return math.sqrt(self.gravity / self.h)


@dataclass
class LipState:
    x: float      # CoM offset from stance contact (m)
    xd: float     # CoM velocity (m/s)
    h: float      # pendulum height (m)
    gravity: float = G

    @property
    def omega(self) -> float:
        return math.sqrt(self.gravity / self.h)

    def momentum(self, mass: float) -> float:
        return mass * self.h * self.xd


def lip_propagate(state: LipState, dt: float) -> LipState:
    """Closed-form pendulum flow over dt (dt may be negative)."""
    w = state.omega
    ch, sh = math.cosh(w * dt), math.sinh(w * dt)
    return LipState(
        x=state.x * ch + state.xd * sh / w,
        xd=state.x * w * sh + state.xd * ch,
        h=state.h,
        gravity=state.gravity,
    )


def desired_momentum(v_des: tuple[float, float], width: float, swing_period: float,
                     stance: str, mass: float, h: float,
                     gravity: float = G) -> tuple[float, float]:
    """Desired end-of-step angular momentum (sagittal, lateral).

    The lateral component carries the self-oscillation term whose sign
    alternates with the stance side (positive during right stance).
    """
    if swing_period <= 0 or width <= 0:
        raise ValueError("swing period and step width must be positive")
    w = math.sqrt(gravity / h)
    lx = mass * h * v_des[0]
    osc = mass * h * width * w * math.sinh(w * swing_period) / (1.0 + math.cosh(w * swing_period))
    side = +1.0 if stance == "right" else -1.0
    return lx, mass * h * v_des[1] + side * osc


def plan_footstep(L_now: float, L_des: float, t_c: float, swing_period: float,
                  mass: float, h: float, gravity: float = G) -> float:
    """One-axis capture offset from the pendulum momentum balance.

    Returns the CoM offset from the upcoming stance contact that brings the
    angular momentum to L_des one swing period after touchdown. Singular as
    t_c -> swing_period; callers freeze the plan before that (see
    touchdown_target).
    """
    if not 0.0 <= t_c < swing_period:
        raise ValueError("t_c must lie in [0, swing_period)")
    w = math.sqrt(gravity / h)
    rem = swing_period - t_c
    return (L_des - math.cosh(w * rem) * L_now) / (mass * h * w * math.sinh(w * rem))


def touchdown_target(state: LipState, t_c: float, swing_period: float,
                     L_des: float, mass: float) -> float:
    """Touchdown position relative to the current stance contact (one axis).

    Predicts the pendulum to the end of the current swing, then places the
    foot so the CoM sits at the planned capture offset from it.
    """
    rem = max(swing_period - t_c, 0.0)
    td = lip_propagate(state, rem)
    offset = plan_footstep(td.momentum(mass), L_des, 0.0, swing_period, mass, state.h,
                           gravity=state.gravity)
    return td.x - offset


def stride_velocity_gain(h: float, swing_period: float, gravity: float = G) -> float:
    """End-of-step velocity per unit stride-averaged velocity.

    On the periodic orbit the CoM is fastest at support exchange; commanding
    a stride average v requires an end-of-step velocity v * gain.
    """
    wt = math.sqrt(gravity / h) * swing_period
    return wt / (2.0 * math.tanh(wt / 2.0))


# ---------------------------------------------------------------------------
# swing trajectory

# rows: p(0), p'(0), p''(0), p(1), p'(1), p''(1), p(0.5)
_POWERS = np.arange(7)
_CONSTRAINTS = np.array([
    [1, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0],
    [0, 0, 2, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [0, 1, 2, 3, 4, 5, 6],
    [0, 0, 2, 6, 12, 20, 30],
    [0.5 ** i for i in range(7)],
], dtype=float)
_SOLVE = np.linalg.inv(_CONSTRAINTS)


def swing_coefficients(p0: float, pf: float, peak: float = 0.0,
                       constrain_midpoint: bool = False) -> np.ndarray:
    """Sixth-order polynomial coefficients c0..c6 over phase [0, 1].

    Boundary conditions pin position, velocity and acceleration at both
    ends; the seventh condition is the apex height (vertical axis) or the
    symmetric midpoint (horizontal axes).
    """
    mid = peak if constrain_midpoint else 0.5 * (p0 + pf)
    rhs = np.array([p0, 0.0, 0.0, pf, 0.0, 0.0, mid])
    return _SOLVE @ rhs


def poly_eval(coeffs: np.ndarray, phi: float) -> tuple[float, float, float]:
    """Value and first two phase-derivatives of a polynomial at phi."""
    p = dp = ddp = 0.0
    for c in coeffs[::-1]:
        ddp = ddp * phi + 2 * dp
        dp = dp * phi + p
        p = p * phi + c
    return p, dp, ddp


@dataclass
class SwingSpline:
    coeffs: np.ndarray       # (3, 7) per-axis
    p0: np.ndarray           # (3,)
    pf: np.ndarray           # (3,)
    peak: float
    swing_period: float

    @classmethod
    def plan(cls, p0, pf, peak: float, swing_period: float) -> "SwingSpline":
        p0 = np.asarray(p0, dtype=float)
        pf = np.asarray(pf, dtype=float)
        coeffs = np.stack([
            swing_coefficients(p0[0], pf[0]),
            swing_coefficients(p0[1], pf[1]),
            swing_coefficients(p0[2], pf[2], peak, constrain_midpoint=True),
        ])
        return cls(coeffs=coeffs, p0=p0, pf=pf, peak=peak, swing_period=swing_period)

    def retarget(self, pf) -> "SwingSpline":
        return SwingSpline.plan(self.p0, pf, self.peak, self.swing_period)


def eval_swing(spline: SwingSpline, phi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World position, velocity and acceleration of the swing foot at phase phi."""
    if not 0.0 <= phi < 1.0 + 1e-12:
        raise ValueError(f"phase {phi} outside [0, 1)")
    pos = np.empty(3)
    vel = np.empty(3)
    acc = np.empty(3)
    s = 1.0 / spline.swing_period
    for a in range(3):
        p, dp, ddp = poly_eval(spline.coeffs[a], phi)
        pos[a], vel[a], acc[a] = p, dp * s, ddp * s * s
    return pos, vel, acc


# ---------------------------------------------------------------------------
# body reference

@dataclass
class BodyReference:
    com_velocity: np.ndarray   # (2,) world frame
    yaw: float
    yaw_rate: float
    orientation: np.ndarray    # quaternion, roll/pitch level


def body_reference(v_cmd: tuple[float, float], yaw_rate_cmd: float,
                   left_foot_yaw: float, right_foot_yaw: float) -> BodyReference:
    """Desired CoM velocity and body orientation from operator commands.

    Body yaw sits midway between the foot yaws (circular mean, so a pair
    like +175/-175 deg resolves to 180, not 0); roll and pitch stay level.
    """
    yaw = circular_midpoint(left_foot_yaw, right_foot_yaw)
    c, s = math.cos(yaw), math.sin(yaw)
    vx, vy = v_cmd
    return BodyReference(
        com_velocity=np.array([c * vx - s * vy, s * vx + c * vy]),
        yaw=yaw,
        yaw_rate=yaw_rate_cmd,
        orientation=quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw),
    )
