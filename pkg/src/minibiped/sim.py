"""Physics harness: full-order dynamics with compliant ground contact.

Ground reaction at each contact point is a penetration spring-damper for
the normal force and an anchored tangential spring clamped to the friction
pyramid (the anchor slides when the clamp engages, giving stick-slip).
Integration is semi-implicit Euler at the control rate, with optional
substeps for stiff contact. External pushes queue as timed wrenches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    RobotModel,
    RobotState,
    compute_bias,
    compute_kinematics,
    integrate_state,
    mass_matrix,
    point_jacobian,
)


class SimError(RuntimeError):
    """Raised when the integrator produces a non-finite state."""


@dataclass
class ContactParams:
    stiffness: float = 3e4          # N/m normal
    damping: float = 300.0          # N*s/m per point
    tangent_stiffness: float = 3e4  # N/m
    tangent_damping: float = 300.0
    mu: float = 0.6
    force_threshold: float = 5.0    # N, contact flag level


@dataclass
class Disturbance:
    force: np.ndarray       # (3,) N, world frame
    frame: str
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass
class World:
    model: RobotModel
    state: RobotState
    ground_height: float = 0.0
    contact: ContactParams = field(default_factory=ContactParams)
    disturbances: list[Disturbance] = field(default_factory=list)
    seed: int = 0
    dt: float = 1e-3                # control period; integrator step = dt / substeps
    substeps: int = 1               # raise for very stiff scenarios
    anchors: dict[str, np.ndarray] = field(default_factory=dict)
    contact_forces: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def t(self) -> float:
        return self.state.t


def make_world(model: RobotModel, base_height: float | None = None,
               q: np.ndarray | None = None, **kw) -> World:
    if q is None:
        q = model.neutral_q(base_height if base_height is not None
                            else model.nominal_com_height)
    state = RobotState(q=np.asarray(q, dtype=float),
                       v=np.zeros(model.nv),
                       contacts=np.zeros(len(model.contact_points), dtype=bool))
    return World(model=model, state=state, **kw)


def apply_push(world: World, force, frame: str = "torso", start: float = 0.0,
               duration: float = 0.1) -> World:
    if duration <= 0:
        raise ValueError("push duration must be positive")
    if frame not in world.model.frames:
        raise KeyError(f"unknown frame {frame!r}")
    world.disturbances.append(Disturbance(
        force=np.asarray(force, dtype=float), frame=frame,
        start=float(start), duration=float(duration)))
    return world


def _external_wrench(world: World, cache, t: float) -> np.ndarray:
    model = world.model
    gen = np.zeros(model.nv)
    for d in world.disturbances:
        if d.start <= t < d.end:
            li, off = model.frames[d.frame]
            p = cache.p[li] + cache.R[li] @ off
            J = point_jacobian(model, cache, li, p)[0:3]
            gen += J.T @ d.force
    return gen


def sim_step(world: World, u: np.ndarray, dt: float) -> World:
    """Advance the world by one control period under joint torques u.

    Contact spring-dampers are integrated implicitly in velocity: the
    damping (and the stiffness accrued over the step) folds into the mass
    matrix, which keeps the stiff ground stable at the control rate. The
    friction/unilateral clamps are applied to the resulting forces, with
    an explicit velocity re-update on the (brief) steps where they engage.
    """
    model = world.model
    cp = world.contact
    u = np.asarray(u, dtype=float)
    if u.shape != (model.nq_joints,):
        raise ValueError("torque vector has wrong length")
    n_sub = max(1, world.substeps)
    h = dt / n_sub
    st = world.state
    for _ in range(n_sub):
        cache = compute_kinematics(model, st.q)
        H = mass_matrix(model, st.q, cache)
        dyn = compute_bias(model, cache, st.v)
        gen = _external_wrench(world, cache, st.t) - dyn.C
        gen[6:] += u

        # candidate contacts: penetrating points with their spring state
        names, Js, f_exp, pts = [], [], [], []
        for name in model.contact_points:
            li, off = model.frames[name]
            p = cache.p[li] + cache.R[li] @ off
            pen = world.ground_height - p[2]
            if pen <= 0.0:
                world.anchors.pop(name, None)
                continue
            anchor = world.anchors.get(name)
            if anchor is None:
                anchor = p[0:2].copy()
                world.anchors[name] = anchor
            names.append(name)
            pts.append(p)
            Js.append(point_jacobian(model, cache, li, p)[0:3])
            f_exp.append(np.array([
                -cp.tangent_stiffness * (p[0] - anchor[0]),
                -cp.tangent_stiffness * (p[1] - anchor[1]),
                cp.stiffness * pen,
            ]))

        forces = {n: np.zeros(3) for n in model.contact_points}
        flags = np.zeros(len(model.contact_points), dtype=bool)
        if names:
            Jc = np.vstack(Js)
            d_diag = np.tile([cp.tangent_damping + h * cp.tangent_stiffness,
                              cp.tangent_damping + h * cp.tangent_stiffness,
                              cp.damping + h * cp.stiffness], len(names))
            fe = np.concatenate(f_exp)
            A = H + h * (Jc.T * d_diag) @ Jc
            v_new = np.linalg.solve(A, H @ st.v + h * (gen + Jc.T @ fe))
            f = fe - d_diag * (Jc @ v_new)
            clamped = False
            for k, name in enumerate(names):
                fk = f[3 * k:3 * k + 3]
                if fk[2] <= 0.0:
                    fk[:] = 0.0
                    world.anchors.pop(name, None)
                    clamped = True
                    continue
                limit = cp.mu * fk[2]
                slid = False
                for a in range(2):
                    if abs(fk[a]) > limit:
                        fk[a] = math.copysign(limit, fk[a])
                        slid = True
                        clamped = True
                if slid:
                    vt = (Jc[3 * k:3 * k + 3] @ v_new)[0:2]
                    p_next = pts[k][0:2] + h * vt
                    world.anchors[name] = p_next + \
                        (fk[0:2] + cp.tangent_damping * vt) / cp.tangent_stiffness
            if clamped:
                v_new = st.v + h * np.linalg.solve(H, gen + Jc.T @ f)
            for k, name in enumerate(names):
                forces[name] = f[3 * k:3 * k + 3]
                flags[model.contact_points.index(name)] = \
                    f[3 * k + 2] > cp.force_threshold
        else:
            v_new = st.v + h * np.linalg.solve(H, gen)

        # midpoint velocity for the position update keeps ballistic arcs exact
        st.q = integrate_state(model, st.q, 0.5 * (st.v + v_new), h)
        st.v = v_new
        st.t += h
        st.contacts = flags
        world.contact_forces = forces
    if not (np.all(np.isfinite(st.q)) and np.all(np.isfinite(st.v))):
        raise SimError(f"non-finite state at t={st.t:.4f}: "
                       f"q={st.q!r} v={st.v!r}")
    return world
