"""Whole-body control: weighted task-space QP plus inverse kinematics.

The controller tracks task accelerations (PD around the references) by
solving for joint accelerations and contact forces together:

    min  sum_i || J_i qdd + Jdot_i v - a_i ||^2_Wi + w_qdd ||qdd||^2 + w_f ||f||^2
    s.t. floating-base rows of  H qdd + C = Jc' f
         friction pyramid on every active contact force, fz >= 0
         actuated torques within limits

Torques are the actuated rows of the dynamics at the optimum. Joint
position/velocity references come from damped-least-squares and
pseudo-inverse IK, and the final command adds joint PD to the feedforward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DynamicsBias,
    KinCache,
    RobotModel,
    com_bias_acceleration,
    com_jacobian,
    compute_bias,
    compute_kinematics,
    frame_jacobian,
    integrate_state,
    mass_matrix,
    point_bias_acceleration,
)
from .qp import QpProblem, QpSettings, QpSolution, QpSolver
from .rotations import orientation_error


@dataclass
class TaskSpec:
    """One tracking objective in task space (or joint space)."""
    name: str
    kind: str                      # com | point | orientation | posture
    weight: float | np.ndarray = 1.0
    frame: str | None = None
    joint_indices: np.ndarray | None = None
    x_des: np.ndarray | None = None      # position / quaternion / joint vector
    xd_des: np.ndarray | None = None
    ff_acc: np.ndarray | None = None
    kp: float | np.ndarray = 100.0
    kd: float | np.ndarray = 20.0

    def dim(self) -> int:
        if self.kind == "posture":
            return len(self.joint_indices)
        return 3


def task_acceleration(task: TaskSpec, x, xd) -> np.ndarray:
    """PD law in task space; orientation error via the rotation log map."""
    if task.kind == "orientation":
        err = orientation_error(task.x_des, x)
    else:
        err = np.asarray(task.x_des, dtype=float) - np.asarray(x, dtype=float)
    xd_des = task.xd_des if task.xd_des is not None else np.zeros_like(err)
    ff = task.ff_acc if task.ff_acc is not None else np.zeros_like(err)
    return task.kp * err + task.kd * (xd_des - np.asarray(xd, dtype=float)) + ff


@dataclass
class ContactSpec:
    frame: str
    active: bool = True
    mu: float = 0.5


@dataclass
class WbcConfig:
    # force regularization small enough that trading CoM acceleration for
    # lighter contact forces stays below 1e-3 m/s^2 at stand
    w_qdd: float = 1e-3
    w_f: float = 1e-5
    qp: QpSettings = field(default_factory=lambda: QpSettings(tol=1e-6, max_iter=200))


@dataclass
class WbcData:
    """Everything assemble_wbc computed that torque extraction needs."""
    problem: QpProblem
    contact_frames: list[str]
    H: np.ndarray
    C: np.ndarray
    Jc: np.ndarray               # (3*nc, nv)
    cache: KinCache
    task_rows: dict[str, tuple[int, int]]
    task_matrices: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]


def _task_jacobian(model, task, cache) -> np.ndarray:
    if task.kind == "com":
        return com_jacobian(model, cache)
    if task.kind == "point":
        return frame_jacobian(model, None, task.frame, cache)[0:3]
    if task.kind == "orientation":
        return frame_jacobian(model, None, task.frame, cache)[3:6]
    if task.kind == "posture":
        J = np.zeros((len(task.joint_indices), model.nv))
        for r, j in enumerate(task.joint_indices):
            J[r, 6 + j] = 1.0
        return J
    raise ValueError(f"unknown task kind {task.kind!r}")


def _task_state(model, task, cache, v):
    J = _task_jacobian(model, task, cache)
    if task.kind == "com":
        x = (model.mass / model.total_mass) @ cache.com
    elif task.kind == "point":
        li, off = model.frames[task.frame]
        x = cache.p[li] + cache.R[li] @ off
    elif task.kind == "orientation":
        # rotation matrix -> quaternion for the log-map error
        li, _ = model.frames[task.frame]
        R = cache.R[li]
        w = np.sqrt(max(0.0, 1.0 + R[0, 0] + R[1, 1] + R[2, 2])) / 2.0
        if w > 1e-6:
            x = np.array([w, (R[2, 1] - R[1, 2]) / (4 * w),
                          (R[0, 2] - R[2, 0]) / (4 * w),
                          (R[1, 0] - R[0, 1]) / (4 * w)])
        else:
            from .rotations import quat_normalize
            k = int(np.argmax(np.diag(R)))
            x = np.zeros(4)
            x[1 + k] = 1.0
            x = quat_normalize(x)
    else:
        x = cache.q[7:][task.joint_indices]
    return J, x, J @ v


def _task_bias(model, task, cache, dyn: DynamicsBias) -> np.ndarray:
    """Exact Jdot*v of a task, from the zero-acceleration recursion."""
    if task.kind == "com":
        return com_bias_acceleration(model, dyn)
    if task.kind == "point":
        li, off = model.frames[task.frame]
        return point_bias_acceleration(dyn, cache, li, cache.p[li] + cache.R[li] @ off)
    if task.kind == "orientation":
        li, _ = model.frames[task.frame]
        return dyn.domega[li].copy()
    return np.zeros(len(task.joint_indices))


def assemble_wbc(model: RobotModel, q: np.ndarray, v: np.ndarray,
                 tasks: list[TaskSpec], contacts: list[ContactSpec],
                 cfg: WbcConfig | None = None,
                 cache: KinCache | None = None) -> WbcData:
    """Build the task-tracking QP for one control tick."""
    cfg = cfg or WbcConfig()
    if cache is None:
        cache = compute_kinematics(model, q)
    active = [c for c in contacts if c.active]
    if not active and any(t.kind == "com" for t in tasks):
        raise ValueError("CoM task requires at least one active contact")

    nv = model.nv
    nj = model.nq_joints
    nc = len(active)
    n = nv + 3 * nc

    H = mass_matrix(model, q, cache)
    dyn = compute_bias(model, cache, v)
    C = dyn.C

    P = np.zeros((n, n))
    g = np.zeros(n)
    P[:nv, :nv] += 2.0 * cfg.w_qdd * np.eye(nv)
    P[nv:, nv:] += 2.0 * cfg.w_f * np.eye(3 * nc)

    task_rows: dict[str, tuple[int, int]] = {}
    task_matrices = {}
    row = 0
    for task in tasks:
        J, x, xd = _task_state(model, task, cache, v)
        bias = _task_bias(model, task, cache, dyn)
        acc = task_acceleration(task, x, xd)
        w = np.broadcast_to(np.atleast_1d(np.asarray(task.weight, dtype=float)),
                            (J.shape[0],))
        JW = J * w[:, None]
        P[:nv, :nv] += 2.0 * (JW.T @ J)
        g[:nv] += -2.0 * (JW.T @ (acc - bias))
        task_rows[task.name] = (row, row + J.shape[0])
        task_matrices[task.name] = (J, bias, acc)
        row += J.shape[0]

    # contact jacobian stack (linear point rows)
    Jc = np.zeros((3 * nc, nv))
    for k, c in enumerate(active):
        Jc[3 * k:3 * k + 3] = frame_jacobian(model, None, c.frame, cache)[0:3]

    # floating-base dynamics rows: H_u qdd - (Jc' f)_u = -C_u
    A = np.zeros((6, n))
    A[:, :nv] = H[0:6]
    if nc:
        A[:, nv:] = -Jc.T[0:6]
    b = -C[0:6]

    # inequalities: friction pyramid per point, then torque limits
    rows = []
    rhs = []
    for k, c in enumerate(active):
        base = nv + 3 * k
        for gx, gy, gz in ((1, 0, -c.mu), (-1, 0, -c.mu),
                           (0, 1, -c.mu), (0, -1, -c.mu), (0, 0, -1)):
            r = np.zeros(n)
            r[base:base + 3] = (gx, gy, gz)
            rows.append(r)
            rhs.append(0.0)
    # tau = H_a qdd + C_a - (Jc' f)_a, bounded by the actuator ratings
    Ta = np.zeros((nj, n))
    Ta[:, :nv] = H[6:]
    if nc:
        Ta[:, nv:] = -Jc.T[6:]
    lim = model.torque_limits
    for i in range(nj):
        rows.append(Ta[i])
        rhs.append(lim[i] - C[6 + i])
        rows.append(-Ta[i])
        rhs.append(lim[i] + C[6 + i])

    problem = QpProblem(P=P, g=g, A=A, b=b,
                        G=np.array(rows), h=np.array(rhs))
    return WbcData(problem=problem, contact_frames=[c.frame for c in active],
                   H=H, C=C, Jc=Jc, cache=cache, task_rows=task_rows,
                   task_matrices=task_matrices)


def extract_torques(model: RobotModel, data: WbcData,
                    solution: QpSolution) -> np.ndarray:
    """Actuated-row torques of the dynamics at the QP optimum."""
    if solution.status == "infeasible":
        raise ValueError("cannot extract torques from an infeasible solution")
    nv = model.nv
    qdd = solution.z[:nv]
    f = solution.z[nv:]
    tau = data.H[6:] @ qdd + data.C[6:]
    if f.size:
        tau -= data.Jc.T[6:] @ f
    return tau


def contact_forces(model: RobotModel, data: WbcData,
                   solution: QpSolution) -> dict[str, np.ndarray]:
    nv = model.nv
    f = solution.z[nv:]
    return {name: f[3 * k:3 * k + 3] for k, name in enumerate(data.contact_frames)}


def task_residuals(model: RobotModel, data: WbcData,
                   solution: QpSolution) -> dict[str, float]:
    qdd = solution.z[:model.nv]
    out = {}
    for name, (J, bias, acc) in data.task_matrices.items():
        out[name] = float(np.linalg.norm(J @ qdd + bias - acc))
    return out


# ---------------------------------------------------------------------------
# inverse kinematics

@dataclass
class IkTarget:
    kind: str                      # point | orientation | com | posture
    value: np.ndarray              # position, quaternion, or joint vector
    frame: str | None = None
    joint_indices: np.ndarray | None = None
    weight: float | np.ndarray = 1.0   # scalar or per-row


@dataclass
class IkResult:
    theta: np.ndarray            # joint angles, limit-clamped
    q: np.ndarray                # full configuration including the solved base
    error: float
    iterations: int
    converged: bool
    diverged: bool = False


def _ik_stack(model, cache, targets, v0):
    Js, es = [], []
    for t in targets:
        task = TaskSpec(name="ik", kind=t.kind, frame=t.frame,
                        joint_indices=t.joint_indices, x_des=t.value)
        J, x, _ = _task_state(model, task, cache, v0)
        if t.kind == "orientation":
            e = orientation_error(t.value, x)
        else:
            e = np.asarray(t.value, dtype=float) - x
        w = np.broadcast_to(np.atleast_1d(np.asarray(t.weight, dtype=float)),
                            e.shape)
        Js.append(J * w[:, None])
        es.append(e * w)
    return np.vstack(Js), np.concatenate(es)


def ik_position(model: RobotModel, q: np.ndarray, targets: list[IkTarget],
                damping: float = 0.05, iters: int = 10,
                tol: float = 1e-6) -> IkResult:
    """Damped-least-squares position IK over the whole configuration.

    Iterates dq = J'(JJ' + lambda^2 I)^-1 e on the floating-base tangent,
    then discards the base part of nothing: base and joints both update so
    the targets stay consistent; joint angles clamp to their limits.
    Divergence (error growing three iterations in a row) returns the best
    iterate, flagged.
    """
    if damping < 0:
        raise ValueError("damping must be >= 0")
    q = np.array(q, dtype=float)
    v0 = np.zeros(model.nv)
    best_q, best_err = q.copy(), np.inf
    grow = 0
    last = np.inf
    it = 0
    for it in range(1, iters + 1):
        cache = compute_kinematics(model, q)
        J, e = _ik_stack(model, cache, targets, v0)
        err = float(np.linalg.norm(e))
        if err < best_err:
            best_err, best_q = err, q.copy()
        if err < tol:
            return IkResult(q[7:], q, err, it, True)
        grow = grow + 1 if err > last * (1 + 1e-12) else 0
        if grow >= 3:
            return IkResult(best_q[7:], best_q, best_err, it, False, diverged=True)
        last = err
        K = J @ J.T + damping**2 * np.eye(J.shape[0])
        dq = J.T @ np.linalg.solve(K, e)
        q = integrate_state(model, q, dq, 1.0)
        q[7:] = np.clip(q[7:], model.joint_limits[:, 0], model.joint_limits[:, 1])
    cache = compute_kinematics(model, q)
    _, e = _ik_stack(model, cache, targets, v0)
    err = float(np.linalg.norm(e))
    if err < best_err:
        best_err, best_q = err, q
    return IkResult(best_q[7:], best_q, best_err, it, best_err < tol)


def ik_velocity(J: np.ndarray, xd_des: np.ndarray,
                damping_fallback: float = 1e-3,
                rank_tol: float = 1e-8) -> tuple[np.ndarray, bool]:
    """Minimum-norm joint velocities through the Jacobian pseudo-inverse.

    Near rank deficiency the plain pseudo-inverse blows up, so a damped
    variant takes over; the flag reports when that happened.
    """
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    fallback = bool(s[-1] < rank_tol * max(1.0, s[0]))
    if fallback:
        inv = s / (s**2 + damping_fallback**2)
    else:
        inv = 1.0 / s
    return Vt.T @ (inv * (U.T @ xd_des)), fallback


def joint_command(theta_des, thetad_des, tau_des, theta, thetad,
                  kp, kd, tau_limits) -> np.ndarray:
    """Joint PD with torque feedforward, clamped to actuator ratings."""
    kp = np.asarray(kp, dtype=float)
    kd = np.asarray(kd, dtype=float)
    if np.any(kp < 0) or np.any(kd < 0):
        raise ValueError("gains must be non-negative")
    u = kp * (theta_des - theta) + kd * (thetad_des - thetad) + tau_des
    return np.clip(u, -np.asarray(tau_limits), np.asarray(tau_limits))
