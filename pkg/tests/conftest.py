import numpy as np
import pytest

from invdyn.model import JOINT_SPHERICAL, REVOLUTE_AXES, Pose, load_model
from invdyn.rotations import decode_6d


@pytest.fixture(scope="session")
def pendulum1():
    return load_model("pendulum1")


@pytest.fixture(scope="session")
def pendulum2():
    return load_model("pendulum2")


@pytest.fixture(scope="session")
def humanoid():
    return load_model("humanoid-lite")


def random_pose(model, rng, root_position=None, angle_scale=1.0):
    if root_position is None:
        root_position = rng.standard_normal(3)
    rots = []
    for joint in model.joint_types:
        if joint in REVOLUTE_AXES:
            rots.append(float(rng.uniform(-np.pi, np.pi) * angle_scale))
        else:
            rots.append(decode_6d(rng.standard_normal(6)))
    return Pose(np.asarray(root_position, dtype=float), rots)


def random_state(model, rng, vel_scale=1.0):
    pose = random_pose(model, rng)
    vel = rng.standard_normal(model.ndof) * vel_scale
    return pose, vel
