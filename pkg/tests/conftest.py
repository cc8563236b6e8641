import numpy as np
import pytest

from motionbridge import quat
from motionbridge.kinematics import SkeletonTopology
from motionbridge.pose import MotionClip, PoseSkeleton


def chain_topology(n=3, offset=(0.0, 0.0, 1.0)):
    """Straight chain of n joints, unit offsets along z by default."""
    offsets = np.tile(np.asarray(offset, dtype=float), (n, 1))
    offsets[0] = 0.0
    return SkeletonTopology(
        joint_names=[f"j{i}" for i in range(n)],
        parents=np.array([-1] + list(range(n - 1))),
        local_offsets=offsets,
    )


HUMANOID_NAMES = [
    "pelvis", "spine", "chest", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "r_hip",
]
HUMANOID_PARENTS = [-1, 0, 1, 2, 2, 4, 5, 2, 7, 8, 0, 0]
HUMANOID_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 0.2],
    [0.0, 0.0, 0.25],
    [0.0, 0.0, 0.25],
    [0.18, 0.0, 0.05],
    [0.28, 0.0, 0.0],
    [0.25, 0.0, 0.0],
    [-0.18, 0.0, 0.05],
    [-0.28, 0.0, 0.0],
    [-0.25, 0.0, 0.0],
    [0.1, 0.0, -0.1],
    [-0.1, 0.0, -0.1],
])


def humanoid_topology():
    """12-joint humanoid used throughout the collision/optimizer tests."""
    return SkeletonTopology(
        joint_names=list(HUMANOID_NAMES),
        parents=np.array(HUMANOID_PARENTS),
        local_offsets=HUMANOID_OFFSETS.copy(),
    )


@pytest.fixture
def chain3():
    return chain_topology(3)


@pytest.fixture
def humanoid():
    return humanoid_topology()


def random_unit_quaternion(rng):
    return quat.normalize(rng.normal(size=4))


def random_pose(rng, j, root_scale=1.0, identity_fraction=0.0):
    rots = np.stack([
        quat.IDENTITY.copy() if rng.random() < identity_fraction
        else random_unit_quaternion(rng)
        for _ in range(j)
    ])
    return PoseSkeleton(rng.normal(scale=root_scale, size=3), rots)


def identity_pose(j, root=(0.0, 0.0, 0.0)):
    return PoseSkeleton(np.asarray(root, dtype=float),
                        np.tile(quat.IDENTITY, (j, 1)))


def smooth_random_clip(rng, name, n_frames, j=12, root_scale=0.03,
                       rot_scale=0.06, fps=30.0, topology_ref=""):
    """Random-walk clip: root drifts, joints rotate by small increments.

    Produces the smooth frame-to-frame structure real motion has, which
    the banded transport prior expects.
    """
    root = np.zeros(3)
    rots = np.tile(quat.IDENTITY, (j, 1)).astype(float)
    frames = []
    for _ in range(n_frames):
        root = root + rng.normal(scale=root_scale, size=3)
        rots = np.stack([
            quat.normalize(quat.multiply(
                rots[i],
                quat.from_axis_angle(rng.normal(size=3),
                                     rng.normal(scale=rot_scale)),
            ))
            for i in range(j)
        ])
        frames.append(PoseSkeleton(root.copy(), rots.copy()))
    return MotionClip(name, fps, frames, topology_ref)


def monotone_clip(name, n_frames, j=6, speed=0.08, rot_step=0.06,
                  axis=(0.0, 0.0, 1.0), phase=0.0, fps=30.0):
    """Clip whose root and rotations advance monotonically with time."""
    axis = np.asarray(axis, dtype=float)
    frames = []
    for k in range(n_frames):
        root = np.array([speed * k, 0.1 * np.sin(0.3 * k + phase), 0.0])
        rots = np.stack([
            quat.from_axis_angle(axis, rot_step * k + 0.05 * jj)
            for jj in range(j)
        ])
        frames.append(PoseSkeleton(root, rots))
    return MotionClip(name, fps, frames, "")


def crossed_arms_pose(alpha, beta, tilt):
    """Humanoid pose with forearms crossed in front of the chest; the tilt
    keeps the arm axes slightly out of plane so penetration is finite."""
    rots = np.tile(quat.IDENTITY, (12, 1)).astype(float)
    rots[4] = quat.multiply(
        quat.from_axis_angle([0.0, 0.0, 1.0], np.pi / 2 + alpha),
        quat.from_axis_angle([0.0, 1.0, 0.0], tilt),
    )
    rots[7] = quat.from_axis_angle([0.0, 0.0, 1.0], -np.pi / 2 - beta)
    return PoseSkeleton(np.zeros(3), rots)
