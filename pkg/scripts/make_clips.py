#!/usr/bin/env python3
"""Author the gesture clip library (src/minibiped/data/clips/*.json).

Clips are keyframe tables smoothed with cubic Hermite interpolation and
sampled at 50 Hz. Each clip starts and ends at the rest posture. On the
real robot these come from posing the torque-disabled arms; here they are
authored, and `minibiped record` can capture new ones from the simulator.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from minibiped.behavior import UPPER_BODY_JOINTS  # noqa: E402

D = math.pi / 180.0
RATE = 50.0

# [head_pitch, head_yaw, l_sh_pitch, l_sh_roll, l_elbow, r_sh_pitch, r_sh_roll, r_elbow]
REST = np.array([0, 0, 0, -8 * D, 15 * D, 0, 8 * D, 15 * D])


def pose(**kw):
    p = REST.copy()
    for name, deg in kw.items():
        p[UPPER_BODY_JOINTS.index(name)] = deg * D
    return p


def smooth_track(keys, rate=RATE):
    """keys: list of (time, pose). Cubic Hermite with zero keyframe velocity."""
    t_end = keys[-1][0]
    n = int(round(t_end * rate)) + 1
    out = np.zeros((n, len(REST)))
    for i in range(n):
        t = i / rate
        k = 0
        while k + 1 < len(keys) - 1 and keys[k + 1][0] <= t:
            k += 1
        t0, p0 = keys[k]
        t1, p1 = keys[k + 1]
        s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        blend = 3 * s**2 - 2 * s**3
        out[i] = p0 * (1 - blend) + p1 * blend
    return out


def wave():
    up = dict(r_shoulder_pitch=-150, r_shoulder_roll=25, r_elbow=45)
    keys = [
        (0.0, REST),
        (0.8, pose(**up)),
        (1.2, pose(**{**up, "r_elbow": 85})),
        (1.6, pose(**{**up, "r_elbow": 25})),
        (2.0, pose(**{**up, "r_elbow": 85})),
        (2.4, pose(**{**up, "r_elbow": 25})),
        (2.8, pose(**up)),
        (3.6, REST),
    ]
    return smooth_track(keys)


def thumbs_up():
    keys = [
        (0.0, REST),
        (0.8, pose(r_shoulder_pitch=-70, r_elbow=70)),
        (2.0, pose(r_shoulder_pitch=-70, r_elbow=70)),
        (2.8, REST),
    ]
    return smooth_track(keys)


def cheer():
    arms_up = pose(l_shoulder_pitch=-160, r_shoulder_pitch=-160,
                   l_shoulder_roll=-20, r_shoulder_roll=20,
                   l_elbow=20, r_elbow=20, head_pitch=-15)
    keys = [
        (0.0, REST),
        (1.0, arms_up),
        (1.4, pose(l_shoulder_pitch=-140, r_shoulder_pitch=-140,
                   l_shoulder_roll=-20, r_shoulder_roll=20,
                   l_elbow=35, r_elbow=35, head_pitch=-15)),
        (1.8, arms_up),
        (2.6, pose(l_shoulder_pitch=-140, r_shoulder_pitch=-140,
                   l_shoulder_roll=-20, r_shoulder_roll=20,
                   l_elbow=35, r_elbow=35, head_pitch=-15)),
        (3.0, arms_up),
        (4.0, REST),
    ]
    return smooth_track(keys)


def look_around():
    keys = [
        (0.0, REST),
        (0.9, pose(head_yaw=60)),
        (2.0, pose(head_yaw=-60)),
        (2.9, pose(head_yaw=0, head_pitch=-18)),
        (3.8, REST),
    ]
    return smooth_track(keys)


def main():
    out_dir = Path(__file__).resolve().parents[1] / "src" / "minibiped" / "data" / "clips"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, samples in [("wave", wave()), ("thumbs_up", thumbs_up()),
                          ("cheer", cheer()), ("look_around", look_around())]:
        doc = {
            "name": name,
            "rate": RATE,
            "joints": UPPER_BODY_JOINTS,
            "loop": False,
            "samples": [[round(float(x), 6) for x in row] for row in samples],
        }
        path = out_dir / f"{name}.json"
        path.write_text(json.dumps(doc) + "\n")
        print(f"wrote {path} ({samples.shape[0]} samples, "
              f"{samples.shape[0] / RATE:.1f} s)")


if __name__ == "__main__":
    main()
