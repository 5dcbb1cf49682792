import numpy as np
import pytest

from minibiped.model import load_default_model


@pytest.fixture(scope="session")
def model():
    return load_default_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)


def random_configuration(model, rng, base_motion=True):
    """Random in-limit configuration with a random base pose."""
    q = np.zeros(model.nq)
    if base_motion:
        q[0:3] = rng.uniform(-0.5, 0.5, 3)
        quat = rng.normal(size=4)
        q[3:7] = quat / np.linalg.norm(quat)
    else:
        q[3] = 1.0
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    q[7:] = rng.uniform(lo, hi)
    return q


def random_velocity(model, rng, scale=1.0):
    return rng.normal(scale=scale, size=model.nv)
