"""Locomotion stack: gait clock, footstep planner, WBC, joint commands.

One tick (1 kHz):
  - the behavior FSM emits upper-body references (100 Hz)
  - the contact-based gait scheduler assigns stance/swing
  - the footstep planner re-targets the swing spline from the pendulum
    state (250 Hz, frozen over the last stretch of swing)
  - the whole-body QP turns task references into torques and forces
  - damped-least-squares / pseudo-inverse IK produce joint references
  - joint PD with torque feedforward forms the final command

Standing is the same loop with both feet in stance and the CoM servoed to
the midpoint between the feet; a capture-point trigger switches to
stepping when a push makes standing insufficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .behavior import (
    NU,
    BehaviorConfig,
    FsmInputs,
    fsm_step,
    initial_fsm,
    upper_body_indices,
)
from .gait import DOUBLE, GaitConfig, GaitPhase, update_gait
from .lip import (
    LipState,
    SwingSpline,
    body_reference,
    desired_momentum,
    eval_swing,
    stride_velocity_gain,
    touchdown_target,
)
from .model import RobotModel, RobotState, com_state, compute_kinematics
from .qp import QpSolver
from .wbc import (
    ContactSpec,
    IkTarget,
    TaskSpec,
    WbcConfig,
    assemble_wbc,
    contact_forces,
    extract_torques,
    ik_position,
    ik_velocity,
    joint_command,
    task_residuals,
)


@dataclass
class ControllerConfig:
    gait: GaitConfig = field(default_factory=GaitConfig)
    # half the lateral distance between steady-state footprints; the 0.20 m
    # figure from the momentum formula's nominal produced a gait too wide to
    # track at this scale, 0.12 m keeps the lateral orbit inside what the
    # swing legs can deliver
    step_width: float = 0.12
    step_height: float = 0.07
    # weight shift before the first step: hold double support and move the
    # CoM over the first stance foot, otherwise the pendulum enters the gait
    # with a lateral transient the first steps cannot capture
    # fraction and timing bounded by lateral contact authority: braking the
    # glide near the polygon edge only has a few tenths of m/s^2 available
    shift_fraction: float = 0.6
    shift_duration: float = 1.0         # s, smoothstep glide of the CoM target
    shift_tolerance: float = 0.02       # m, release threshold
    shift_speed_tolerance: float = 0.06  # m/s, release only once settled
    shift_timeout: float = 1.6          # s
    shift_timeout_recovery: float = 0.05
    # re-target the touchdown only in mid-swing: right after liftoff the old
    # stance foot is still unloading through the compliant ground and the
    # instantaneous pendulum state is not yet trustworthy; late in swing the
    # plan freezes so the landing leg settles
    plan_window: tuple[float, float] = (0.3, 0.8)
    plan_every: int = 4                 # 250 Hz at a 1 kHz loop
    touchdown_height: float = 0.0
    # swing tracking lag makes the foot strike a little before the nominal
    # end of swing; the pendulum math plans with the period actually realized
    plan_period_scale: float = 0.85
    fsm_every: int = 10                 # 100 Hz
    # task weights
    w_com: float = 50.0
    w_torso: float = 50.0
    w_swing: float = 100.0
    w_posture_upper: float = 10.0
    w_posture_legs: float = 1.0
    w_stance_foot: float = 500.0
    task_kp: float = 100.0
    task_kd: float = 20.0
    swing_kp: float = 300.0
    swing_kd: float = 30.0
    # joint-space servo
    leg_kp: float = 60.0
    leg_kd: float = 2.0
    arm_kp: float = 20.0
    arm_kd: float = 1.0
    # contacts
    mu: float = 0.5
    wbc: WbcConfig = field(default_factory=WbcConfig)
    # stepping trigger and stance geometry guards
    capture_margin: float = 0.05        # m, capture-point excursion that triggers a step
    settle_speed: float = 0.01          # m/s
    min_foot_separation: float = 0.12   # m, keeps swing targets from crossing legs
    max_step_reach: float = 0.30        # m from the stance foot
    ik_iters: int = 1
    ik_damping: float = 0.05


@dataclass
class Commands:
    vx: float = 0.0
    vy: float = 0.0
    wz: float = 0.0
    walking: bool = False
    estop: bool = False


@dataclass
class ComGlide:
    """Smoothstep CoM reference: keeps demands inside contact authority."""
    start: np.ndarray
    goal: np.ndarray
    duration: float
    t: float = 0.0

    def advance(self, dt: float):
        self.t += dt

    @property
    def done(self) -> bool:
        return self.t >= self.duration

    def ref(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = min(self.t / self.duration, 1.0)
        d = self.goal - self.start
        pos = self.start + (3 * s**2 - 2 * s**3) * d
        vel = (6 * s - 6 * s**2) / self.duration * d if s < 1.0 else 0.0 * d
        acc = (6 - 12 * s) / self.duration**2 * d if s < 1.0 else 0.0 * d
        return pos, vel, acc


@dataclass
class TickInfo:
    u: np.ndarray
    tau_ff: np.ndarray
    fsm_state: str
    gait_mode: str
    gait_phi: float
    step_count: int
    com: np.ndarray
    com_vel: np.ndarray
    forces: dict[str, np.ndarray]
    residuals: dict[str, float]
    qp_status: str
    qp_iterations: int
    swing_target: np.ndarray | None
    stepping: bool


class WalkingController:
    def __init__(self, model: RobotModel, cfg: ControllerConfig | None = None,
                 behavior: BehaviorConfig | None = None):
        self.model = model
        self.cfg = cfg or ControllerConfig()
        self.behavior_cfg = behavior or BehaviorConfig.from_model(model)
        self.fsm = initial_fsm(self.behavior_cfg)
        self.fsm_inputs = FsmInputs()
        self.gait = GaitPhase(swing_period=self.cfg.gait.swing_period)
        self.commands = Commands()
        self.h = model.nominal_com_height
        self.omega = math.sqrt(9.81 / self.h)
        self.solver = QpSolver(self.cfg.wbc.qp)
        self.warm: tuple[int, ...] | None = None
        self.tick_count = 0
        self.recovering = False
        self.settle_ticks = 0
        # planted foot poses, world frame, refreshed on support exchange
        self.plant: dict[str, np.ndarray] = {}
        self.plant_yaw: dict[str, float] = {}
        self.swing_spline: SwingSpline | None = None
        self.swing_target: np.ndarray | None = None
        self.shift_ticks = 0
        self.glide: ComGlide | None = None
        self.q_up = self.behavior_cfg.rest_posture.copy()
        self.qd_up = np.zeros(NU)
        self.upper_idx = upper_body_indices(model)
        self.lower_idx = np.array([i for i in range(model.nq_joints)
                                   if i not in set(self.upper_idx)])
        kp = np.full(model.nq_joints, self.cfg.leg_kp)
        kd = np.full(model.nq_joints, self.cfg.leg_kd)
        kp[self.upper_idx] = self.cfg.arm_kp
        kd[self.upper_idx] = self.cfg.arm_kd
        self.joint_kp, self.joint_kd = kp, kd

    # ----- operator interface -------------------------------------------------
    def command_velocity(self, vx: float, vy: float = 0.0, wz: float = 0.0):
        if self.commands.estop:
            return
        self.commands.vx, self.commands.vy, self.commands.wz = vx, vy, wz
        moving = abs(vx) > 1e-4 or abs(vy) > 1e-4 or abs(wz) > 1e-4
        if moving:
            self.commands.walking = True
        elif self.commands.walking and not moving:
            self.commands.walking = False

    def gesture(self, name: str):
        self.fsm_inputs.gesture = name

    def fsm_command(self, action: str):
        if action == "stop":
            self.fsm_inputs.stop = True
        elif action == "resume":
            self.fsm_inputs.resume = True
        elif action == "rest":
            self.fsm_inputs.rest = True
        else:
            raise ValueError(f"unknown fsm command {action!r}")

    def joystick(self, yaw: float, pitch: float):
        self.fsm_inputs.joystick = (yaw, pitch)

    def estop(self):
        self.commands = Commands(estop=True)
        self.fsm_inputs = FsmInputs(stop=True)

    # ----- helpers --------------------------------------------------------------
    def _sole(self, cache, side: str) -> np.ndarray:
        li, off = self.model.frames[f"{side[0]}_sole"]
        return cache.p[li] + cache.R[li] @ off

    def _replant(self, cache, side: str):
        self.plant[side] = self._sole(cache, side).copy()
        self.plant[side][2] = 0.0
        li, _ = self.model.frames[f"{side[0]}_sole"]
        self.plant_yaw[side] = yaw_of_matrix(cache.R[li])

    def _pivot(self, mode: str) -> np.ndarray:
        if mode == DOUBLE or not self.plant:
            feet = list(self.plant.values())
            if len(feet) == 2:
                return 0.5 * (feet[0] + feet[1])
            return np.zeros(3)
        stance = "right" if mode == "left-swing" else "left"
        return self.plant.get(stance, np.zeros(3))

    def _plan_touchdown(self, com, com_vel, swing: str, t_in: float) -> np.ndarray:
        cfg = self.cfg
        T = cfg.gait.swing_period * cfg.plan_period_scale
        stance = "right" if swing == "left" else "left"
        pivot = self.plant.get(stance, np.zeros(3))
        gain = stride_velocity_gain(self.h, T)
        ref = body_reference((self.commands.vx * gain, self.commands.vy * gain),
                             self.commands.wz,
                             self.plant_yaw.get("left", 0.0),
                             self.plant_yaw.get("right", 0.0))
        l_des = desired_momentum(tuple(ref.com_velocity), cfg.step_width, T,
                                 swing, self.model.total_mass, self.h)
        t_c = min(t_in, T * cfg.plan_window[1])
        target = np.zeros(3)
        for axis in (0, 1):
            st = LipState(com[axis] - pivot[axis], com_vel[axis], self.h)
            target[axis] = pivot[axis] + touchdown_target(
                st, t_c, T, l_des[axis], self.model.total_mass)
        # reach clamp relative to the stance foot
        d = target[0:2] - pivot[0:2]
        r = float(np.hypot(d[0], d[1]))
        if r > cfg.max_step_reach:
            target[0:2] = pivot[0:2] + d * (cfg.max_step_reach / r)
        # lateral separation guard: never cross the stance leg
        if swing == "left":
            target[1] = max(target[1], pivot[1] + cfg.min_foot_separation)
        else:
            target[1] = min(target[1], pivot[1] - cfg.min_foot_separation)
        target[2] = cfg.touchdown_height
        return target

    # ----- main tick --------------------------------------------------------------
    def tick(self, state: RobotState, dt: float) -> TickInfo:
        cfg = self.cfg
        model = self.model
        self.tick_count += 1
        cache = compute_kinematics(model, state.q)
        com, com_vel = com_state(model, state.q, state.v, cache)

        if not self.plant:
            for side in ("left", "right"):
                self._replant(cache, side)

        # upper body FSM at its own rate
        if self.tick_count % cfg.fsm_every == 1:
            self.fsm, self.q_up, self.qd_up = fsm_step(
                self.fsm, self.fsm_inputs, cfg.fsm_every * dt, self.behavior_cfg)
            self.fsm_inputs = FsmInputs()

        # stepping trigger: capture point leaving the support margin
        midfeet = 0.5 * (self.plant["left"] + self.plant["right"])
        capture = com[0:2] + com_vel[0:2] / self.omega
        excursion = float(np.linalg.norm(capture - midfeet[0:2]))
        if not self.commands.walking and not self.commands.estop:
            if excursion > cfg.capture_margin:
                self.recovering = True
        if self.recovering:
            speed = float(np.linalg.norm(com_vel[0:2]))
            self.settle_ticks = self.settle_ticks + 1 \
                if (speed < 3 * cfg.settle_speed and excursion < cfg.capture_margin) else 0
            if self.settle_ticks > 100:
                self.recovering = False
                self.settle_ticks = 0
        walking = (self.commands.walking or self.recovering) and not self.commands.estop

        # weight shift: before leaving double support, glide the CoM over the
        # first stance foot so the pendulum starts the gait near its orbit
        gait_walking = walking
        ds_goal = midfeet[0:2]
        if walking and self.gait.mode == DOUBLE:
            stance0 = "right" if self.gait.next_swing == "left" else "left"
            target = midfeet + cfg.shift_fraction * (self.plant[stance0] - midfeet)
            ds_goal = target[0:2]
            timeout = cfg.shift_timeout_recovery if self.recovering \
                else cfg.shift_timeout
            self.shift_ticks += 1
            shifted = float(np.linalg.norm(com[0:2] - ds_goal)) < cfg.shift_tolerance \
                and float(np.linalg.norm(com_vel[0:2])) < cfg.shift_speed_tolerance \
                and (self.glide is None or self.glide.done)
            if not (shifted or self.shift_ticks * dt >= timeout):
                gait_walking = False
        else:
            self.shift_ticks = 0

        prev_mode = self.gait.mode
        self.gait = update_gait(self.gait, state.contacts, dt, gait_walking, cfg.gait)
        mode = self.gait.mode
        swing_side = self.gait.swing_side

        if mode != prev_mode:
            if prev_mode != DOUBLE:
                landed = prev_mode.split("-")[0]
                self._replant(cache, landed)
            if mode == DOUBLE:
                self.swing_spline = None
                self.glide = None
            if swing_side is not None:
                p0 = self._sole(cache, swing_side).copy()
                self.swing_target = self._plan_touchdown(com, com_vel, swing_side, 0.0)
                self.swing_spline = SwingSpline.plan(
                    p0, self.swing_target,
                    max(p0[2], self.swing_target[2]) + cfg.step_height,
                    cfg.gait.swing_period)
                self.glide = None
        elif swing_side is not None and self.swing_spline is not None \
                and cfg.plan_window[0] <= self.gait.phi < cfg.plan_window[1] \
                and self.tick_count % cfg.plan_every == 0:
            self.swing_target = self._plan_touchdown(
                com, com_vel, swing_side, self.gait.time_in_phase)
            self.swing_spline = self.swing_spline.retarget(self.swing_target)

        # ----- references
        yaw_ref = body_reference((self.commands.vx, self.commands.vy),
                                 self.commands.wz,
                                 self.plant_yaw.get("left", 0.0),
                                 self.plant_yaw.get("right", 0.0))
        torso_quat = yaw_ref.orientation

        tasks: list[TaskSpec] = []
        pivot = self._pivot(mode)
        com_glide_pos = None
        if mode == DOUBLE:
            if self.glide is None or np.linalg.norm(self.glide.goal - ds_goal) > 0.01:
                self.glide = ComGlide(start=com[0:2].copy(), goal=ds_goal.copy(),
                                      duration=cfg.shift_duration)
            self.glide.advance(dt)
            gpos, gvel, gacc = self.glide.ref()
            com_glide_pos = gpos
            tasks.append(TaskSpec(name="com", kind="com", weight=cfg.w_com,
                                  x_des=np.array([gpos[0], gpos[1], self.h]),
                                  xd_des=np.array([gvel[0], gvel[1], 0.0]),
                                  ff_acc=np.array([gacc[0], gacc[1], 0.0]),
                                  kp=cfg.task_kp, kd=cfg.task_kd))
        else:
            # walking: only height is servoed; the horizontal CoM follows the
            # pendulum with its natural acceleration as feedforward, and no
            # horizontal damping, or the planner's pendulum model is wrong
            ff = np.array([self.omega**2 * (com[0] - pivot[0]),
                           self.omega**2 * (com[1] - pivot[1]), 0.0])
            tasks.append(TaskSpec(name="com", kind="com", weight=cfg.w_com,
                                  x_des=np.array([com[0], com[1], self.h]),
                                  xd_des=np.zeros(3), ff_acc=ff,
                                  kp=np.array([0.0, 0.0, cfg.task_kp]),
                                  kd=np.array([0.0, 0.0, cfg.task_kd])))
        tasks.append(TaskSpec(name="torso", kind="orientation", frame="torso",
                              weight=cfg.w_torso, x_des=torso_quat,
                              xd_des=np.array([0.0, 0.0, self.commands.wz]),
                              kp=cfg.task_kp, kd=cfg.task_kd))

        contacts: list[ContactSpec] = []
        stance_sides = ["left", "right"] if swing_side is None else \
            (["right"] if swing_side == "left" else ["left"])
        for side in stance_sides:
            s = side[0]
            for pt in (f"{s}_heel", f"{s}_toe"):
                contacts.append(ContactSpec(pt, mu=cfg.mu))
                tasks.append(TaskSpec(name=f"stance_{pt}", kind="point", frame=pt,
                                      weight=cfg.w_stance_foot,
                                      x_des=np.zeros(3), xd_des=np.zeros(3),
                                      kp=0.0, kd=0.0))

        swing_pos = swing_vel = None
        if swing_side is not None and self.swing_spline is not None:
            phi = min(self.gait.phi, 1.0 - 1e-9)
            swing_pos, swing_vel, swing_acc = eval_swing(self.swing_spline, phi)
            tasks.append(TaskSpec(name="swing", kind="point",
                                  frame=f"{swing_side[0]}_sole",
                                  weight=cfg.w_swing, x_des=swing_pos,
                                  xd_des=swing_vel, ff_acc=swing_acc,
                                  kp=cfg.swing_kp, kd=cfg.swing_kd))
            # keep the sole level in flight, or the toe digs in early;
            # roll is barely actuable on a 5-DOF leg so it gets less weight
            tasks.append(TaskSpec(name="swing_ori", kind="orientation",
                                  frame=f"{swing_side[0]}_foot",
                                  weight=np.array([2.0, 30.0, 10.0]),
                                  x_des=torso_quat, xd_des=np.zeros(3),
                                  kp=cfg.task_kp, kd=cfg.task_kd))

        # posture: upper body tracks the FSM, legs weakly hold nominal
        q_post = model.nominal_posture.copy()
        qd_post = np.zeros(model.nq_joints)
        q_post[self.upper_idx] = self.q_up
        qd_post[self.upper_idx] = self.qd_up
        w_post = np.full(model.nq_joints, cfg.w_posture_legs)
        w_post[self.upper_idx] = cfg.w_posture_upper
        tasks.append(TaskSpec(name="posture", kind="posture",
                              joint_indices=np.arange(model.nq_joints),
                              weight=w_post, x_des=q_post, xd_des=qd_post,
                              kp=cfg.task_kp, kd=cfg.task_kd))

        # ----- whole-body QP
        data = assemble_wbc(model, state.q, state.v, tasks, contacts,
                            cfg=cfg.wbc, cache=cache)
        sol = self.solver.solve(data.problem, warm_set=self.warm)
        self.warm = sol.active_set if sol.ok else None
        tau_ff = extract_torques(model, data, sol)

        # ----- IK references (joint PD targets)
        ik_targets = [IkTarget(kind="orientation", frame="torso",
                               value=torso_quat, weight=2.0)]
        for side in stance_sides:
            s = side[0]
            for pt in (f"{s}_heel", f"{s}_toe"):
                li, off = model.frames[pt]
                planted = self.plant[side]
                rel = np.array([-0.07, 0, 0]) if "heel" in pt else np.array([0.07, 0, 0])
                ik_targets.append(IkTarget(kind="point", frame=pt,
                                           value=planted + rel, weight=3.0))
        if swing_pos is not None:
            ik_targets.append(IkTarget(kind="point",
                                       frame=f"{swing_side[0]}_sole",
                                       value=swing_pos, weight=3.0))
            # roll stays nearly free: through the 45/135 hip axes a foot
            # roll correction doubles as leg adduction and drags the swing
            ik_targets.append(IkTarget(kind="orientation",
                                       frame=f"{swing_side[0]}_foot",
                                       value=torso_quat,
                                       weight=np.array([0.05, 1.0, 0.3])))
        com_ik = np.array([com[0], com[1], self.h]) if com_glide_pos is None \
            else np.array([com_glide_pos[0], com_glide_pos[1], self.h])
        ik_targets.append(IkTarget(kind="com", value=com_ik, weight=1.0))
        ik = ik_position(model, state.q, ik_targets, damping=cfg.ik_damping,
                         iters=cfg.ik_iters)
        theta_des = ik.theta.copy()
        theta_des[self.upper_idx] = np.clip(
            self.q_up, model.joint_limits[self.upper_idx, 0],
            model.joint_limits[self.upper_idx, 1])

        # velocity references through the stacked task Jacobians
        qd_des = np.zeros(model.nq_joints)
        qd_des[self.upper_idx] = self.qd_up
        if swing_side is not None and swing_vel is not None:
            from .model import frame_jacobian
            J = frame_jacobian(model, None, f"{swing_side[0]}_sole", cache)[0:3]
            sol_v, _ = ik_velocity(J[:, 6:], swing_vel)
            leg = [model.joint_index(f"{swing_side[0]}_{j}")
                   for j in ("hip1", "hip2", "hip_pitch", "knee", "ankle")]
            qd_des[leg] = sol_v[leg]

        u = joint_command(theta_des, qd_des, tau_ff, state.q[7:], state.v[6:],
                          self.joint_kp, self.joint_kd, model.torque_limits)

        return TickInfo(
            u=u, tau_ff=tau_ff, fsm_state=self.fsm.state,
            gait_mode=mode, gait_phi=self.gait.phi,
            step_count=self.gait.step_count, com=com, com_vel=com_vel,
            forces=contact_forces(model, data, sol),
            residuals=task_residuals(model, data, sol),
            qp_status=sol.status, qp_iterations=sol.iterations,
            swing_target=None if self.swing_target is None else self.swing_target.copy(),
            stepping=walking,
        )


def yaw_of_matrix(R: np.ndarray) -> float:
    return math.atan2(R[1, 0], R[0, 0])
