"""Model construction, kinematics and dynamics checks.

Jacobians are verified against central differences of the forward
kinematics; the dynamics against energy balance on simulated rollouts.
"""

import copy
import json
import math

import numpy as np
import pytest

from minibiped.model import (
    GRAVITY,
    ModelError,
    bias_forces,
    build_model,
    com_state,
    compute_kinematics,
    default_model_path,
    forward_kinematics,
    frame_jacobian,
    integrate_state,
    kinetic_energy,
    mass_matrix,
    potential_energy,
)
from minibiped.rotations import quat_log, quat_mul, quat_conj

from conftest import random_configuration, random_velocity

EPS = 1e-6


def load_doc():
    with open(default_model_path()) as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# document validation

def test_reference_model_mass_and_dofs(model):
    assert model.total_mass == pytest.approx(25.0)
    assert model.nq_joints == 18
    assert model.nv == 24
    knee = model.joint_limits[model.joint_index("l_knee")]
    assert np.allclose(np.degrees(knee), [-90.0, 0.0])


def test_hip_axes_45_135(model):
    doc = load_doc()
    by_name = {lk["name"]: lk for lk in doc["links"]}
    a1 = np.array(by_name["l_hip1_link"]["joint"]["axis"])
    a2 = np.array(by_name["l_hip2_link"]["joint"]["axis"])
    assert math.degrees(math.atan2(a1[2], a1[0])) == pytest.approx(45.0)
    assert math.degrees(math.atan2(a2[2], a2[0])) == pytest.approx(135.0)


def test_rejects_inverted_limits():
    doc = load_doc()
    for lk in doc["links"]:
        if lk["name"] == "l_shank":
            lk["joint"]["limits"] = [0.0, -math.pi / 2]
    with pytest.raises(ModelError, match="limit"):
        build_model(doc)


def test_rejects_self_parented_link():
    doc = load_doc()
    doc["links"][3]["parent"] = doc["links"][3]["name"]
    with pytest.raises(ModelError):
        build_model(doc)


def test_rejects_duplicate_links_and_bad_mass():
    doc = load_doc()
    doc["links"][2]["name"] = doc["links"][1]["name"]
    with pytest.raises(ModelError, match="duplicate"):
        build_model(doc)
    doc = load_doc()
    doc["links"][4]["mass"] = 0.0
    with pytest.raises(ModelError, match="mass"):
        build_model(doc)


def test_rejects_zero_axis_and_two_roots():
    doc = load_doc()
    doc["links"][1]["joint"]["axis"] = [0, 0, 0]
    with pytest.raises(ModelError, match="axis"):
        build_model(doc)
    doc = load_doc()
    doc["links"][5]["parent"] = None
    doc["links"][5].pop("joint")
    with pytest.raises(ModelError, match="root"):
        build_model(doc)


# ---------------------------------------------------------------------------
# forward kinematics

def test_zero_pose_feet_symmetric(model):
    fk = forward_kinematics(model, model.neutral_q(0.687))
    l, r = fk["l_sole"].p, fk["r_sole"].p
    assert l[0] == pytest.approx(r[0], abs=1e-12)
    assert l[1] == pytest.approx(-r[1], abs=1e-12)
    assert l[2] == pytest.approx(r[2], abs=1e-12)
    assert abs(l[1] - 0.09) < 1e-12


def test_base_translation_moves_every_frame(model):
    q = model.neutral_q(0.7)
    fk0 = forward_kinematics(model, q)
    q2 = q.copy()
    q2[0] += 0.1
    fk1 = forward_kinematics(model, q2)
    for name in model.frame_names():
        assert np.allclose(fk1[name].p - fk0[name].p, [0.1, 0, 0], atol=1e-14)


def test_knee_bend_matches_planar_two_link(model):
    # straight leg except knee at -45 deg: ankle drops to
    # thigh + shank*cos(45) below the hip, shank*sin(45) behind it
    q = model.neutral_q(0.7)
    q[7:] = 0.0
    q[7 + model.joint_index("l_knee")] = -math.pi / 4
    fk = forward_kinematics(model, q)
    hip = np.array([0.0, 0.09, 0.7 - 0.05])
    ankle_kin = fk["l_foot"].p
    assert ankle_kin[2] == pytest.approx(hip[2] - 0.30 - 0.30 * math.cos(math.pi / 4), abs=1e-12)
    assert ankle_kin[0] == pytest.approx(hip[0] - 0.30 * math.sin(math.pi / 4), abs=1e-12)


def test_unknown_frame_raises(model):
    with pytest.raises(KeyError):
        frame_jacobian(model, model.neutral_q(), "no_such_frame")


def test_dimension_mismatch_raises(model):
    with pytest.raises(ValueError):
        compute_kinematics(model, np.zeros(10))


MIRROR_FRAME = {"l_sole": "r_sole", "l_hand": "r_hand", "l_heel": "r_heel",
                "l_toe": "r_toe", "head": "head", "torso": "torso"}


def mirror_q(model, q):
    """Reflect a configuration about the sagittal plane."""
    out = q.copy()
    out[1] = -q[1]
    out[4], out[6] = -q[4], -q[6]   # flip quat x and z
    for i, name in enumerate(model.actuated_names):
        if name.startswith("l_"):
            j = model.joint_index("r_" + name[2:])
        elif name.startswith("r_"):
            j = model.joint_index("l_" + name[2:])
        else:
            j = i
        axis = model.joint_axis_local[np.where(model.joint_qidx == i)[0][0]]
        # pitch-type axes (y) keep their angle under mirroring, others flip
        sign = 1.0 if abs(axis[1]) > 0.9 else -1.0
        out[7 + j] = sign * q[7 + i]
    return out


def test_mirrored_configurations_give_mirrored_poses(model, rng):
    for _ in range(20):
        q = random_configuration(model, rng, base_motion=False)
        qm = mirror_q(model, q)
        fk, fkm = forward_kinematics(model, q), forward_kinematics(model, qm)
        for a, b in MIRROR_FRAME.items():
            pa, pb = fk[a].p, fkm[b].p
            assert np.allclose(pa * [1, -1, 1], pb, atol=1e-10)


# ---------------------------------------------------------------------------
# jacobians

def fd_frame_velocity(model, q, v, frame, eps=EPS):
    qp = integrate_state(model, q, v, eps)
    qm = integrate_state(model, q, v, -eps)
    fp, fm = forward_kinematics(model, qp)[frame], forward_kinematics(model, qm)[frame]
    lin = (fp.p - fm.p) / (2 * eps)
    # angular velocity from the relative rotation of the two perturbed frames
    import minibiped.rotations as rot
    qf = compute_kinematics(model, qp)
    dR = fp.R @ fm.R.T
    ang = np.array([dR[2, 1] - dR[1, 2], dR[0, 2] - dR[2, 0], dR[1, 0] - dR[0, 1]]) / (4 * eps)
    return np.concatenate([lin, ang])


@pytest.mark.parametrize("frame", ["l_sole", "r_toe", "l_hand", "head", "torso"])
def test_jacobian_matches_finite_differences(model, rng, frame):
    for _ in range(20):
        q = random_configuration(model, rng)
        v = random_velocity(model, rng)
        J = frame_jacobian(model, q, frame)
        ref = fd_frame_velocity(model, q, v, frame)
        assert np.allclose(J @ v, ref, rtol=1e-5, atol=1e-5)


def test_jacobian_fd_sweep_100_configurations(model, rng):
    ok = 0
    for _ in range(100):
        q = random_configuration(model, rng)
        v = random_velocity(model, rng)
        J = frame_jacobian(model, q, "l_sole")
        ref = fd_frame_velocity(model, q, v, "l_sole")
        scale = max(1.0, float(np.linalg.norm(ref)))
        ok += np.linalg.norm(J @ v - ref) / scale < 1e-5
    assert ok == 100


def test_base_frame_jacobian_structure(model):
    J = frame_jacobian(model, model.neutral_q(), "pelvis")
    assert np.allclose(J[0:3, 0:3], np.eye(3))
    assert np.allclose(J[3:6, 3:6], np.eye(3))
    assert np.allclose(J[:, 6:], 0.0)


def test_off_chain_columns_are_zero(model):
    J = frame_jacobian(model, model.neutral_q(), "l_sole")
    for name in ["r_knee", "head_yaw", "l_elbow", "r_hip1"]:
        assert np.allclose(J[:, 6 + model.joint_index(name)], 0.0)
    assert not np.allclose(J[:, 6 + model.joint_index("l_knee")], 0.0)


# ---------------------------------------------------------------------------
# CoM

def test_com_symmetric_pose_centered(model):
    c, _ = com_state(model, model.neutral_q(0.687), np.zeros(model.nv))
    assert abs(c[1]) < 1e-9


def test_com_velocity_zero_at_rest(model):
    _, cd = com_state(model, model.neutral_q(0.687), np.zeros(model.nv))
    assert np.allclose(cd, 0.0)


def test_com_velocity_matches_finite_differences(model, rng):
    for _ in range(20):
        q = random_configuration(model, rng)
        v = random_velocity(model, rng)
        _, cd = com_state(model, q, v)
        cp, _ = com_state(model, integrate_state(model, q, v, EPS), np.zeros(model.nv))
        cm, _ = com_state(model, integrate_state(model, q, v, -EPS), np.zeros(model.nv))
        assert np.allclose(cd, (cp - cm) / (2 * EPS), rtol=1e-5, atol=1e-5)


def test_nominal_com_height_recorded(model):
    q = model.neutral_q(0.686889)
    c, _ = com_state(model, q, np.zeros(model.nv))
    assert c[2] == pytest.approx(model.nominal_com_height, abs=1e-4)


# ---------------------------------------------------------------------------
# mass matrix and bias forces

def test_mass_matrix_symmetric_positive_definite(model, rng):
    for _ in range(100):
        H = mass_matrix(model, random_configuration(model, rng))
        assert np.max(np.abs(H - H.T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(H)) > 0.0


def test_mass_matrix_linear_block_is_total_mass(model, rng):
    for _ in range(10):
        H = mass_matrix(model, random_configuration(model, rng))
        assert np.allclose(H[0:3, 0:3], 25.0 * np.eye(3), atol=1e-9)


def test_gravity_wrench_at_rest(model):
    C = bias_forces(model, model.neutral_q(0.687), np.zeros(model.nv))
    assert C[2] == pytest.approx(25.0 * GRAVITY, abs=1e-9)   # 245.25 N
    assert np.allclose(C[0:2], 0.0, atol=1e-9)


def test_coriolis_is_quadratic_in_velocity(model, rng):
    for _ in range(10):
        q = random_configuration(model, rng)
        v = random_velocity(model, rng)
        g = bias_forces(model, q, np.zeros(model.nv))
        c1 = bias_forces(model, q, v) - g
        c2 = bias_forces(model, q, 2.0 * v) - g
        assert np.allclose(c2, 4.0 * c1, rtol=1e-8, atol=1e-8)


def test_hdot_minus_2c_skew_surrogate(model, rng):
    # d/dt(qdot' H qdot)/2 == qdot' C_coriolis qdot along the flow
    for _ in range(20):
        q = random_configuration(model, rng)
        v = random_velocity(model, rng)
        Hp = mass_matrix(model, integrate_state(model, q, v, EPS))
        Hm = mass_matrix(model, integrate_state(model, q, v, -EPS))
        hdot_quad = float(v @ ((Hp - Hm) / (2 * EPS)) @ v)
        c_cor = bias_forces(model, q, v) - bias_forces(model, q, np.zeros(model.nv))
        resid = hdot_quad - 2.0 * float(v @ c_cor)
        assert abs(resid) < 1e-6 * max(1.0, abs(hdot_quad))


def test_energy_rate_matches_applied_power(model, rng):
    # short rollout under random actuated torques: the change of KE + PE
    # must equal the work fed in through the joints
    q = model.neutral_q(0.9)
    v = random_velocity(model, rng, scale=0.3)
    dt = 1e-4
    tau = rng.normal(scale=2.0, size=model.nq_joints)
    e0 = kinetic_energy(model, q, v) + potential_energy(model, q)
    work = 0.0
    for _ in range(200):
        cache = compute_kinematics(model, q)
        H = mass_matrix(model, q, cache)
        C = bias_forces(model, q, v, cache)
        a = np.linalg.solve(H, np.concatenate([np.zeros(6), tau]) - C)
        vmid = v + 0.5 * dt * a
        work += dt * float(vmid[6:] @ tau)
        q = integrate_state(model, q, vmid, dt)
        v = v + dt * a
    e1 = kinetic_energy(model, q, v) + potential_energy(model, q)
    assert e1 - e0 == pytest.approx(work, rel=1e-3, abs=1e-4)
