#!/usr/bin/env python3
"""Generate the reference robot description (src/minibiped/data/model.json).

Masses, joint limits and actuator torque ratings follow the hardware build
sheet; link lengths and inertias are desk-scale design values (solid
cylinder/box approximations). Run after editing to regenerate the JSON.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

D = math.pi / 180.0

# geometry (m)
HIP_WIDTH = 0.18
THIGH = 0.30
SHANK = 0.30
ANKLE_HEIGHT = 0.05
FOOT_HEEL = -0.06   # x of heel relative to ankle
FOOT_TOE = 0.08     # x of toe relative to ankle; heel-to-toe 0.14
PELVIS_Z = THIGH + SHANK + ANKLE_HEIGHT + 0.05   # base origin height, straight legs
TORSO_H = 0.40
SHOULDER = (0.0, 0.17, 0.32)   # relative to pelvis origin
UPPER_ARM = 0.16
FOREARM = 0.20
NECK_Z = 0.40

# actuator output torque limits (N*m): KBMB 8, hip pitch 26.5,
# knee 26.5 through an extra 3:1 stage
TAU_KBMB = 8.0
TAU_HIP_PITCH = 26.5
TAU_KNEE = 79.5

COS45 = math.cos(45 * D)
SIN45 = math.sin(45 * D)


def cylinder(m, r, L):
    it = m * (3 * r * r + L * L) / 12.0
    return [it, it, 0.5 * m * r * r]


def box(m, dx, dy, dz):
    return [m * (dy * dy + dz * dz) / 12.0,
            m * (dx * dx + dz * dz) / 12.0,
            m * (dx * dx + dy * dy) / 12.0]


def sphere(m, r):
    i = 0.4 * m * r * r
    return [i, i, i]


def leg(side, sgn):
    hip1_lim = [-40 * D, 20 * D] if side == "l" else [-20 * D, 40 * D]
    hip2_lim = [-45 * D, 40 * D] if side == "l" else [-40 * D, 45 * D]
    return [
        {"name": f"{side}_hip1_link", "mass": 0.15, "com": [0, 0, 0],
         "inertia": sphere(0.15, 0.045), "parent": "pelvis",
         "joint": {"name": f"{side}_hip1", "axis": [COS45, 0, SIN45],
                   "origin": [0.0, sgn * HIP_WIDTH / 2, -0.05],
                   "limits": hip1_lim, "torque_limit": TAU_KBMB}},
        {"name": f"{side}_hip2_link", "mass": 0.15, "com": [0, 0, 0],
         "inertia": sphere(0.15, 0.045), "parent": f"{side}_hip1_link",
         "joint": {"name": f"{side}_hip2", "axis": [-COS45, 0, SIN45],
                   "origin": [0, 0, 0], "limits": hip2_lim,
                   "torque_limit": TAU_KBMB}},
        {"name": f"{side}_thigh", "mass": 1.0, "com": [0, 0, -THIGH / 2],
         "inertia": cylinder(1.0, 0.05, THIGH), "parent": f"{side}_hip2_link",
         "joint": {"name": f"{side}_hip_pitch", "axis": [0, 1, 0],
                   "origin": [0, 0, 0], "limits": [-130 * D, 55 * D],
                   "torque_limit": TAU_HIP_PITCH}},
        {"name": f"{side}_shank", "mass": 0.8, "com": [0, 0, -SHANK / 2],
         "inertia": cylinder(0.8, 0.04, SHANK), "parent": f"{side}_thigh",
         "joint": {"name": f"{side}_knee", "axis": [0, -1, 0],
                   "origin": [0, 0, -THIGH], "limits": [-90 * D, 0.0],
                   "torque_limit": TAU_KNEE}},
        {"name": f"{side}_foot", "mass": 0.4, "com": [0.01, 0, -0.03],
         "inertia": box(0.4, 0.14, 0.07, 0.05), "parent": f"{side}_shank",
         "joint": {"name": f"{side}_ankle", "axis": [0, 1, 0],
                   "origin": [0, 0, -SHANK], "limits": [-25 * D, 40 * D],
                   "torque_limit": TAU_KBMB}},
    ]


def arm(side, sgn):
    roll_lim = [-85 * D, 35 * D] if side == "l" else [-35 * D, 85 * D]
    return [
        {"name": f"{side}_shoulder_link", "mass": 0.2, "com": [0, 0, 0],
         "inertia": sphere(0.2, 0.04), "parent": "pelvis",
         "joint": {"name": f"{side}_shoulder_pitch", "axis": [0, 1, 0],
                   "origin": [SHOULDER[0], sgn * SHOULDER[1], SHOULDER[2]],
                   "limits": [-190 * D, 90 * D], "torque_limit": TAU_KBMB}},
        {"name": f"{side}_upper_arm", "mass": 0.6, "com": [0, 0, -UPPER_ARM / 2],
         "inertia": cylinder(0.6, 0.035, UPPER_ARM),
         "parent": f"{side}_shoulder_link",
         "joint": {"name": f"{side}_shoulder_roll", "axis": [-1, 0, 0],
                   "origin": [0, 0, 0], "limits": roll_lim,
                   "torque_limit": TAU_KBMB}},
        {"name": f"{side}_forearm", "mass": 0.7, "com": [0, 0, -FOREARM / 2],
         "inertia": cylinder(0.7, 0.03, FOREARM), "parent": f"{side}_upper_arm",
         "joint": {"name": f"{side}_elbow", "axis": [0, -1, 0],
                   "origin": [0, 0, -UPPER_ARM], "limits": [-25 * D, 115 * D],
                   "torque_limit": TAU_KBMB}},
    ]


def make_document():
    links = [
        {"name": "pelvis", "mass": 13.0, "com": [0, 0, 0.20],
         "inertia": box(13.0, 0.24, 0.28, 0.55), "parent": None},
        {"name": "head_pitch_link", "mass": 0.5, "com": [0, 0, 0.02],
         "inertia": sphere(0.5, 0.05), "parent": "pelvis",
         "joint": {"name": "head_pitch", "axis": [0, 1, 0],
                   "origin": [0, 0, NECK_Z], "limits": [-30 * D, 30 * D],
                   "torque_limit": TAU_KBMB}},
        {"name": "head", "mass": 3.5, "com": [0, 0, 0.15],
         "inertia": sphere(3.5, 0.14), "parent": "head_pitch_link",
         "joint": {"name": "head_yaw", "axis": [0, 0, 1],
                   "origin": [0, 0, 0], "limits": [-90 * D, 90 * D],
                   "torque_limit": TAU_KBMB}},
    ]
    links += arm("l", +1) + arm("r", -1) + leg("l", +1) + leg("r", -1)

    frames = [
        {"name": "torso", "link": "pelvis", "offset": [0, 0, 0.25]},
        {"name": "l_hand", "link": "l_forearm", "offset": [0, 0, -FOREARM]},
        {"name": "r_hand", "link": "r_forearm", "offset": [0, 0, -FOREARM]},
        {"name": "l_heel", "link": "l_foot", "offset": [FOOT_HEEL, 0, -ANKLE_HEIGHT]},
        {"name": "l_toe", "link": "l_foot", "offset": [FOOT_TOE, 0, -ANKLE_HEIGHT]},
        {"name": "r_heel", "link": "r_foot", "offset": [FOOT_HEEL, 0, -ANKLE_HEIGHT]},
        {"name": "r_toe", "link": "r_foot", "offset": [FOOT_TOE, 0, -ANKLE_HEIGHT]},
        {"name": "l_sole", "link": "l_foot",
         "offset": [(FOOT_HEEL + FOOT_TOE) / 2, 0, -ANKLE_HEIGHT]},
        {"name": "r_sole", "link": "r_foot",
         "offset": [(FOOT_HEEL + FOOT_TOE) / 2, 0, -ANKLE_HEIGHT]},
    ]

    # standing crouch: 12 deg knee-over-toe bend keeps the knees off their
    # straight-leg singularity while staying inside all limits
    a = 12 * D
    nominal = {}
    for s in ("l", "r"):
        nominal[f"{s}_hip_pitch"] = -a
        nominal[f"{s}_knee"] = -2 * a
        nominal[f"{s}_ankle"] = -a
        nominal[f"{s}_shoulder_roll"] = (-8 * D) if s == "l" else (8 * D)
        nominal[f"{s}_elbow"] = 15 * D

    return {
        "name": "minibiped",
        "links": links,
        "frames": frames,
        "contact_points": ["l_heel", "l_toe", "r_heel", "r_toe"],
        "nominal_posture": nominal,
        "nominal_com_height": 0.0,   # filled below from FK
    }


def main():
    from minibiped.model import build_model, compute_kinematics, com_state

    doc = make_document()
    model = build_model(doc)

    # measure the CoM height of the nominal stance with soles on the ground
    q = model.neutral_q()
    cache = compute_kinematics(model, q)
    sole_z = cache.p[model.frames["l_sole"][0]][2] + \
        (cache.R[model.frames["l_sole"][0]] @ model.frames["l_sole"][1])[2]
    q[2] -= sole_z
    cache = compute_kinematics(model, q)
    com, _ = com_state(model, q, np.zeros(model.nv), cache)
    doc["nominal_com_height"] = round(float(com[2]), 6)
    doc["nominal_base_height"] = round(float(q[2]), 6)

    out = Path(__file__).resolve().parents[1] / "src" / "minibiped" / "data" / "model.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {out}  (total mass {model.total_mass} kg, "
          f"CoM height {doc['nominal_com_height']} m)")


if __name__ == "__main__":
    main()
