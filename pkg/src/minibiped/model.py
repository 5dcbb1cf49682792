"""Floating-base rigid-body model: tree kinematics, Jacobians, dynamics.

Conventions:
  - generalized position q = [base xyz (3), base quat wxyz (4), joint angles]
  - generalized velocity v = [base linear world (3), base angular world (3),
    joint rates]; for the reference robot v has 6 + 18 = 24 entries
  - link frames are world-aligned at the zero configuration; each non-root
    link is connected to its parent by one revolute joint whose axis is a
    unit vector in the parent frame
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rotations import quat_integrate, quat_normalize, quat_to_matrix, skew

GRAVITY = 9.81


class ModelError(ValueError):
    """Raised for malformed or inconsistent model documents."""


@dataclass
class RobotModel:
    name: str
    link_names: list[str]
    parent_idx: np.ndarray          # (L,) int, -1 for root
    joint_names: list[str]          # per non-root link, "" if fixed
    joint_axis_local: np.ndarray    # (L, 3) unit axis in parent frame (root row zero)
    joint_origin_local: np.ndarray  # (L, 3) joint position in parent frame
    joint_qidx: np.ndarray          # (L,) index into actuated joint vector, -1 if none
    mass: np.ndarray                # (L,)
    com_local: np.ndarray           # (L, 3)
    inertia_local: np.ndarray       # (L, 3, 3) about link CoM, link frame
    frames: dict[str, tuple[int, np.ndarray]]   # name -> (link index, offset in link frame)
    contact_points: list[str]       # frame names, order defines contact flag layout
    joint_limits: np.ndarray        # (nj, 2) rad
    torque_limits: np.ndarray       # (nj,)
    nominal_posture: np.ndarray     # (nj,)
    nominal_com_height: float
    actuated_names: list[str] = field(default_factory=list)
    # derived, filled in __post_init__
    total_mass: float = 0.0
    n_links: int = 0
    nq_joints: int = 0
    ancestor_mask: np.ndarray = field(default=None, repr=False)  # (L, nj) bool
    _axis_skew: np.ndarray = field(default=None, repr=False)     # (L, 3, 3)
    _axis_skew2: np.ndarray = field(default=None, repr=False)    # (L, 3, 3)

    def __post_init__(self):
        self.n_links = len(self.link_names)
        self.nq_joints = int(self.joint_limits.shape[0])
        self.total_mass = float(np.sum(self.mass))
        mask = np.zeros((self.n_links, self.nq_joints), dtype=bool)
        for l in range(1, self.n_links):
            p = l
            while p != -1:
                qi = self.joint_qidx[p]
                if qi >= 0:
                    mask[l, qi] = True
                p = self.parent_idx[p]
        self.ancestor_mask = mask
        self._axis_skew = np.stack([skew(a) for a in self.joint_axis_local])
        self._axis_skew2 = np.stack([K @ K for K in self._axis_skew])

    @property
    def nq(self) -> int:
        return 7 + self.nq_joints

    @property
    def nv(self) -> int:
        return 6 + self.nq_joints

    def frame_names(self) -> list[str]:
        return list(self.frames.keys())

    def joint_index(self, name: str) -> int:
        return self.actuated_names.index(name)

    def neutral_q(self, base_height: float | None = None) -> np.ndarray:
        q = np.zeros(self.nq)
        q[3] = 1.0
        q[7:] = self.nominal_posture
        if base_height is not None:
            q[2] = base_height
        return q


@dataclass
class RobotState:
    q: np.ndarray                 # (7 + nj,)
    v: np.ndarray                 # (6 + nj,)
    contacts: np.ndarray          # (n contact points,) bool
    t: float = 0.0

    def copy(self) -> "RobotState":
        return RobotState(self.q.copy(), self.v.copy(), self.contacts.copy(), self.t)


def _as_unit(vec, what: str) -> np.ndarray:
    a = np.asarray(vec, dtype=float)
    n = float(np.linalg.norm(a))
    if a.shape != (3,) or n < 1e-9:
        raise ModelError(f"{what}: axis must be a non-zero 3-vector, got {vec}")
    return a / n


def build_model(doc: dict) -> RobotModel:
    """Validate a model description document and build the runtime model.

    See data/model.json for the schema; scripts/make_model.py generates it.
    """
    if not isinstance(doc, dict) or "links" not in doc:
        raise ModelError("model document must be a mapping with a 'links' list")
    links = doc["links"]
    names = [lk.get("name") for lk in links]
    if len(set(names)) != len(names):
        raise ModelError("duplicate link names")
    if any(not n for n in names):
        raise ModelError("every link needs a name")
    index = {n: i for i, n in enumerate(names)}

    roots = [lk for lk in links if lk.get("parent") is None]
    if len(roots) != 1:
        raise ModelError(f"expected exactly one root link, found {len(roots)}")
    if links[0].get("parent") is not None:
        raise ModelError("root link must come first")

    L = len(links)
    parent_idx = np.full(L, -1, dtype=int)
    joint_axis = np.zeros((L, 3))
    joint_origin = np.zeros((L, 3))
    joint_qidx = np.full(L, -1, dtype=int)
    joint_names = [""] * L
    mass = np.zeros(L)
    com_local = np.zeros((L, 3))
    inertia = np.zeros((L, 3, 3))
    actuated_names: list[str] = []
    limits: list[tuple[float, float]] = []
    torque_limits: list[float] = []

    for i, lk in enumerate(links):
        m = float(lk.get("mass", 0.0))
        if m <= 0.0:
            raise ModelError(f"link {names[i]}: mass must be > 0")
        mass[i] = m
        com_local[i] = np.asarray(lk.get("com", [0, 0, 0]), dtype=float)
        inr = np.asarray(lk.get("inertia"), dtype=float)
        if inr.shape == (3,):
            inr = np.diag(inr)
        if inr.shape != (3, 3):
            raise ModelError(f"link {names[i]}: inertia must be a 3-vector or 3x3")
        inertia[i] = inr

        parent = lk.get("parent")
        if parent is None:
            if lk.get("joint") is not None:
                raise ModelError("root link cannot have a joint")
            continue
        if parent not in index:
            raise ModelError(f"link {names[i]}: unknown parent {parent!r}")
        pi = index[parent]
        if pi >= i:
            raise ModelError(f"link {names[i]}: parent must precede child (tree order)")
        if parent == names[i]:
            raise ModelError(f"link {names[i]} is parented to itself")
        parent_idx[i] = pi

        joint = lk.get("joint")
        if joint is None:
            raise ModelError(f"link {names[i]}: non-root link needs a joint")
        joint_axis[i] = _as_unit(joint.get("axis"), f"joint of {names[i]}")
        joint_origin[i] = np.asarray(joint.get("origin", [0, 0, 0]), dtype=float)
        joint_names[i] = joint.get("name", f"{names[i]}_joint")
        if joint.get("actuated", True):
            lo, hi = (float(x) for x in joint["limits"])
            if lo >= hi:
                raise ModelError(
                    f"joint {joint_names[i]}: limit min {lo} must be < max {hi}")
            joint_qidx[i] = len(actuated_names)
            actuated_names.append(joint_names[i])
            limits.append((lo, hi))
            torque_limits.append(float(joint.get("torque_limit", math.inf)))

    # cycle check: walking to the root must terminate (guaranteed by parent<child
    # ordering above, but keep an explicit guard for hand-edited documents)
    for i in range(L):
        seen = set()
        p = i
        while p != -1:
            if p in seen:
                raise ModelError(f"cycle through link {names[i]}")
            seen.add(p)
            p = parent_idx[p]

    frames: dict[str, tuple[int, np.ndarray]] = {}
    for fr in doc.get("frames", []):
        if fr["link"] not in index:
            raise ModelError(f"frame {fr['name']}: unknown link {fr['link']!r}")
        frames[fr["name"]] = (index[fr["link"]], np.asarray(fr.get("offset", [0, 0, 0]), dtype=float))
    for i, n in enumerate(names):
        frames.setdefault(n, (i, np.zeros(3)))

    contact_points = list(doc.get("contact_points", []))
    for cp in contact_points:
        if cp not in frames:
            raise ModelError(f"contact point {cp!r} is not a frame")

    nj = len(actuated_names)
    nominal = np.zeros(nj)
    for name, val in doc.get("nominal_posture", {}).items():
        if name not in actuated_names:
            raise ModelError(f"nominal posture references unknown joint {name!r}")
        nominal[actuated_names.index(name)] = float(val)

    model = RobotModel(
        name=doc.get("name", "robot"),
        link_names=names,
        parent_idx=parent_idx,
        joint_names=joint_names,
        joint_axis_local=joint_axis,
        joint_origin_local=joint_origin,
        joint_qidx=joint_qidx,
        mass=mass,
        com_local=com_local,
        inertia_local=inertia,
        frames=frames,
        contact_points=contact_points,
        joint_limits=np.asarray(limits, dtype=float).reshape(nj, 2),
        torque_limits=np.asarray(torque_limits, dtype=float),
        nominal_posture=nominal,
        nominal_com_height=float(doc.get("nominal_com_height", 0.0)),
        actuated_names=actuated_names,
    )
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    if np.any(nominal < lo - 1e-9) or np.any(nominal > hi + 1e-9):
        raise ModelError("nominal posture violates joint limits")
    return model


def load_model(path: str | Path) -> RobotModel:
    with open(path) as f:
        return build_model(json.load(f))


def default_model_path() -> Path:
    return Path(__file__).parent / "data" / "model.json"


def load_default_model() -> RobotModel:
    return load_model(default_model_path())


# ---------------------------------------------------------------------------
# kinematics

@dataclass
class KinCache:
    """World-frame kinematic quantities for one configuration."""
    q: np.ndarray
    R: np.ndarray          # (L, 3, 3) link orientations
    p: np.ndarray          # (L, 3) link frame origins (joint positions)
    com: np.ndarray        # (L, 3) link CoM positions
    joint_axis: np.ndarray  # (L, 3) world joint axes (root row zero)
    jv: np.ndarray         # (L, 3, nv) link CoM linear Jacobians
    jw: np.ndarray         # (L, 3, nv) link angular Jacobians


def _rodrigues(K: np.ndarray, theta: float) -> np.ndarray:
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def _cross3(a, b):
    # np.cross has ~30us of axis bookkeeping per call; this path is hot
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


_EYE3 = np.eye(3)


def compute_kinematics(model: RobotModel, q: np.ndarray) -> KinCache:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.nq,):
        raise ValueError(f"q must have shape ({model.nq},), got {q.shape}")
    L, nj, nv = model.n_links, model.nq_joints, model.nv

    R = np.empty((L, 3, 3))
    p = np.empty((L, 3))
    R[0] = quat_to_matrix(quat_normalize(q[3:7]))
    p[0] = q[0:3]
    theta = q[7:]
    sin, cos = math.sin, math.cos
    for l in range(1, L):
        par = model.parent_idx[l]
        qi = model.joint_qidx[l]
        Rp = R[par]
        if qi >= 0:
            th = theta[qi]
            K = model._axis_skew[l]
            R[l] = Rp @ (_EYE3 + sin(th) * K + (1.0 - cos(th)) * model._axis_skew2[l])
        else:
            R[l] = Rp
        p[l] = p[par] + Rp @ model.joint_origin_local[l]

    com = p + np.einsum("lab,lb->la", R, model.com_local)
    # world joint axes live in the parent frame
    axis_w = np.zeros((L, 3))
    for l in range(1, L):
        axis_w[l] = R[model.parent_idx[l]] @ model.joint_axis_local[l]

    # batched link-CoM Jacobians
    jv = np.zeros((L, 3, nv))
    jw = np.zeros((L, 3, nv))
    jv[:, 0, 0] = jv[:, 1, 1] = jv[:, 2, 2] = 1.0
    rel = com - p[0]
    # base angular columns: e_a x rel, written out component-wise
    jv[:, 1, 3] = -rel[:, 2]
    jv[:, 2, 3] = rel[:, 1]
    jv[:, 0, 4] = rel[:, 2]
    jv[:, 2, 4] = -rel[:, 0]
    jv[:, 0, 5] = -rel[:, 1]
    jv[:, 1, 5] = rel[:, 0]
    jw[:, 0, 3] = jw[:, 1, 4] = jw[:, 2, 5] = 1.0

    # per-joint columns: joint j drives link j-as-child; collect axis/origin per qidx
    ax_q = np.zeros((nj, 3))
    po_q = np.zeros((nj, 3))
    for l in range(1, L):
        qi = model.joint_qidx[l]
        if qi >= 0:
            ax_q[qi] = axis_w[l]
            po_q[qi] = p[l]
    diff = com[:, None, :] - po_q[None, :, :]           # (L, nj, 3)
    a0, a1, a2 = ax_q[:, 0], ax_q[:, 1], ax_q[:, 2]
    cols = np.empty((L, nj, 3))
    cols[:, :, 0] = a1 * diff[:, :, 2] - a2 * diff[:, :, 1]
    cols[:, :, 1] = a2 * diff[:, :, 0] - a0 * diff[:, :, 2]
    cols[:, :, 2] = a0 * diff[:, :, 1] - a1 * diff[:, :, 0]
    m3 = model.ancestor_mask[:, :, None]
    jv[:, :, 6:] = np.where(m3, cols, 0.0).transpose(0, 2, 1)
    jw[:, :, 6:] = np.where(m3, ax_q[None, :, :], 0.0).transpose(0, 2, 1)

    return KinCache(q=q, R=R, p=p, com=com, joint_axis=axis_w, jv=jv, jw=jw)


@dataclass
class FramePose:
    p: np.ndarray
    R: np.ndarray


def frame_pose(model: RobotModel, frame: str, cache: KinCache) -> FramePose:
    if frame not in model.frames:
        raise KeyError(f"unknown frame {frame!r}")
    li, off = model.frames[frame]
    return FramePose(cache.p[li] + cache.R[li] @ off, cache.R[li])


def forward_kinematics(model: RobotModel, q: np.ndarray) -> dict[str, FramePose]:
    cache = compute_kinematics(model, q)
    return {name: frame_pose(model, name, cache) for name in model.frames}


def point_jacobian(model: RobotModel, cache: KinCache, link_idx: int,
                   point_world: np.ndarray) -> np.ndarray:
    """6 x nv Jacobian (linear rows then angular rows) of a point on a link."""
    nv = model.nv
    J = np.zeros((6, nv))
    J[0:3, 0:3] = np.eye(3)
    J[0:3, 3:6] = -skew(point_world - cache.p[0])
    J[3:6, 3:6] = np.eye(3)
    l = link_idx
    while l != -1:
        qi = model.joint_qidx[l]
        if qi >= 0:
            a = cache.joint_axis[l]
            J[0:3, 6 + qi] = _cross3(a, point_world - cache.p[l])
            J[3:6, 6 + qi] = a
        l = model.parent_idx[l]
    return J


def frame_jacobian(model: RobotModel, q: np.ndarray, frame: str,
                   cache: KinCache | None = None) -> np.ndarray:
    if cache is None:
        cache = compute_kinematics(model, q)
    if frame not in model.frames:
        raise KeyError(f"unknown frame {frame!r}")
    li, off = model.frames[frame]
    return point_jacobian(model, cache, li, cache.p[li] + cache.R[li] @ off)


def com_state(model: RobotModel, q: np.ndarray, v: np.ndarray,
              cache: KinCache | None = None) -> tuple[np.ndarray, np.ndarray]:
    if cache is None:
        cache = compute_kinematics(model, q)
    w = model.mass / model.total_mass
    c = w @ cache.com
    jc = np.einsum("l,laj->aj", w, cache.jv)
    return c, jc @ np.asarray(v, dtype=float)


def com_jacobian(model: RobotModel, cache: KinCache) -> np.ndarray:
    w = model.mass / model.total_mass
    return np.einsum("l,laj->aj", w, cache.jv)


# ---------------------------------------------------------------------------
# dynamics

def _world_inertias(model: RobotModel, cache: KinCache) -> np.ndarray:
    return np.einsum("lab,lbc,ldc->lad", cache.R, model.inertia_local, cache.R)


def mass_matrix(model: RobotModel, q: np.ndarray,
                cache: KinCache | None = None) -> np.ndarray:
    """Generalized mass matrix H (nv x nv), symmetric positive definite."""
    if cache is None:
        cache = compute_kinematics(model, q)
    Iw = _world_inertias(model, cache)
    mjv = model.mass[:, None, None] * cache.jv
    H = np.einsum("laj,lak->jk", mjv, cache.jv)
    H += np.einsum("laj,lak->jk", np.einsum("lab,lbj->laj", Iw, cache.jw), cache.jw)
    return 0.5 * (H + H.T)


def _bias_accelerations(model: RobotModel, cache: KinCache,
                        v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-link angular velocity and zero-qdd bias accelerations (world)."""
    L = model.n_links
    omega = np.empty((L, 3))
    domega = np.zeros((L, 3))
    a_origin = np.zeros((L, 3))
    omega[0] = v[3:6]
    rates = v[6:]
    for l in range(1, L):
        par = model.parent_idx[l]
        qi = model.joint_qidx[l]
        r = cache.p[l] - cache.p[par]
        wp = omega[par]
        a_origin[l] = a_origin[par] + _cross3(domega[par], r) + \
            _cross3(wp, _cross3(wp, r))
        if qi >= 0:
            aw = cache.joint_axis[l]
            omega[l] = wp + aw * rates[qi]
            domega[l] = domega[par] + _cross3(wp, aw) * rates[qi]
        else:
            omega[l] = wp
            domega[l] = domega[par]
    return omega, domega, a_origin


@dataclass
class DynamicsBias:
    """Zero-acceleration kinematic bias terms plus the generalized C vector.

    The per-link quantities double as exact Jdot*v terms for task frames:
    a point fixed on link l has bias acceleration
    a_origin[l] + domega[l] x r + omega[l] x (omega[l] x r).
    """
    omega: np.ndarray      # (L, 3)
    domega: np.ndarray     # (L, 3)
    a_origin: np.ndarray   # (L, 3)
    a_com: np.ndarray      # (L, 3)
    C: np.ndarray          # (nv,)


def compute_bias(model: RobotModel, cache: KinCache, v: np.ndarray,
                 gravity: float = GRAVITY) -> DynamicsBias:
    v = np.asarray(v, dtype=float)
    omega, domega, a_origin = _bias_accelerations(model, cache, v)
    d = cache.com - cache.p
    a_com = a_origin + np.cross(domega, d) + np.cross(omega, np.cross(omega, d))
    g = np.array([0.0, 0.0, -gravity])
    F = model.mass[:, None] * (a_com - g)
    Iw = _world_inertias(model, cache)
    Iww = np.einsum("lab,lb->la", Iw, omega)
    N = np.einsum("lab,lb->la", Iw, domega) + np.cross(omega, Iww)
    C = np.einsum("laj,la->j", cache.jv, F) + np.einsum("laj,la->j", cache.jw, N)
    return DynamicsBias(omega=omega, domega=domega, a_origin=a_origin,
                        a_com=a_com, C=C)


def bias_forces(model: RobotModel, q: np.ndarray, v: np.ndarray,
                cache: KinCache | None = None, gravity: float = GRAVITY) -> np.ndarray:
    """Coriolis, centrifugal and gravity vector C(q, v) with H qdd + C = tau."""
    if cache is None:
        cache = compute_kinematics(model, q)
    return compute_bias(model, cache, v, gravity).C


def point_bias_acceleration(bias: DynamicsBias, cache: KinCache, link_idx: int,
                            point_world: np.ndarray) -> np.ndarray:
    """Jdot*v (linear) for a point fixed on a link."""
    r = point_world - cache.p[link_idx]
    w = bias.omega[link_idx]
    return bias.a_origin[link_idx] + _cross3(bias.domega[link_idx], r) + \
        _cross3(w, _cross3(w, r))


def com_bias_acceleration(model: RobotModel, bias: DynamicsBias) -> np.ndarray:
    """Jdot*v for the whole-body CoM."""
    return (model.mass / model.total_mass) @ bias.a_com


def integrate_state(model: RobotModel, q: np.ndarray, v: np.ndarray,
                    dt: float) -> np.ndarray:
    """Integrate generalized position by velocity v over dt."""
    out = np.array(q, dtype=float)
    out[0:3] += v[0:3] * dt
    out[3:7] = quat_integrate(q[3:7], v[3:6], dt)
    out[7:] += v[6:] * dt
    return out


def kinetic_energy(model: RobotModel, q: np.ndarray, v: np.ndarray,
                   cache: KinCache | None = None) -> float:
    H = mass_matrix(model, q, cache)
    return 0.5 * float(v @ H @ v)


def potential_energy(model: RobotModel, q: np.ndarray,
                     cache: KinCache | None = None,
                     gravity: float = GRAVITY) -> float:
    if cache is None:
        cache = compute_kinematics(model, q)
    return gravity * float(model.mass @ cache.com[:, 2])
