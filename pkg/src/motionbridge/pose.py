"""Pose skeletons, motion clips, and the geodesic pose metric.

A pose is a root translation in R^3 plus J unit-quaternion joint rotations;
the pose space is the product manifold R^3 x SO(3)^J. The metric adds the
Euclidean root distance to a weighted sum of per-joint rotation arcs, so it
carries no bone lengths and is invariant to skeleton scale.
"""

from dataclasses import dataclass, field

import numpy as np

from . import quat
from .errors import DimensionMismatchError


@dataclass
class MetricConfig:
    """Weight of the rotation term in the pose metric."""

    w: float = 1.0

    def __post_init__(self):
        if self.w < 0:
            raise ValueError(f"rotation weight must be >= 0, got {self.w}")


@dataclass(eq=False)
class PoseSkeleton:
    """One motion frame: root translation plus J joint rotations.

    rotations has shape (J, 4) in (w, x, y, z) order.
    """

    root_translation: np.ndarray
    rotations: np.ndarray

    def __post_init__(self):
        self.root_translation = np.asarray(self.root_translation, dtype=float)
        self.rotations = np.asarray(self.rotations, dtype=float)
        if self.root_translation.shape != (3,):
            raise ValueError(
                f"root_translation must be a 3-vector, got shape {self.root_translation.shape}"
            )
        if self.rotations.ndim != 2 or self.rotations.shape[1] != 4:
            raise ValueError(
                f"rotations must have shape (J, 4), got {self.rotations.shape}"
            )

    @property
    def joint_count(self) -> int:
        return self.rotations.shape[0]

    def copy(self) -> "PoseSkeleton":
        return PoseSkeleton(self.root_translation.copy(), self.rotations.copy())


@dataclass(eq=False)
class MotionClip:
    """A named fixed-rate sequence of poses over one skeleton topology."""

    name: str
    fps: float
    frames: list[PoseSkeleton] = field(default_factory=list)
    topology_ref: str = ""

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not self.frames:
            raise ValueError("a clip needs at least one frame")
        j = self.frames[0].joint_count
        for i, f in enumerate(self.frames):
            if f.joint_count != j:
                raise DimensionMismatchError(
                    f"frame {i} has {f.joint_count} joints, expected {j}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def joint_count(self) -> int:
        return self.frames[0].joint_count

    def roots(self) -> np.ndarray:
        """Stacked root translations, shape (N, 3)."""
        return np.stack([f.root_translation for f in self.frames])

    def rotation_array(self) -> np.ndarray:
        """Stacked joint rotations, shape (N, J, 4)."""
        return np.stack([f.rotations for f in self.frames])


def pose_distance(a: PoseSkeleton, b: PoseSkeleton, cfg: MetricConfig | None = None) -> float:
    """Geodesic distance between two poses.

    Euclidean distance between roots plus w times the sum of per-joint
    rotation arcs. Zero iff the translations match and every rotation pair
    agrees up to sign.
    """
    cfg = cfg or MetricConfig()
    if a.joint_count != b.joint_count:
        raise DimensionMismatchError(
            f"poses have {a.joint_count} and {b.joint_count} joints"
        )
    d = float(np.linalg.norm(a.root_translation - b.root_translation))
    dots = np.abs(np.einsum("jk,jk->j", a.rotations, b.rotations))
    norms = np.linalg.norm(a.rotations, axis=1) * np.linalg.norm(b.rotations, axis=1)
    dots = np.clip(dots / norms, -1.0, 1.0)
    return d + cfg.w * float(np.sum(2.0 * np.arccos(dots)))


def interpolate_pose(
    s: PoseSkeleton, t: PoseSkeleton, tau: float, cfg: MetricConfig | None = None
) -> PoseSkeleton:
    """Pose at parameter tau on the geodesic from s to t.

    The root interpolates linearly; each joint rotation follows SLERP. At
    tau=0 the result equals s exactly, at tau=1 it equals t up to sign.
    """
    if s.joint_count != t.joint_count:
        raise DimensionMismatchError(
            f"poses have {s.joint_count} and {t.joint_count} joints"
        )
    root = (1.0 - tau) * s.root_translation + tau * t.root_translation
    rots = np.stack([
        quat.slerp(s.rotations[j], t.rotations[j], tau) for j in range(s.joint_count)
    ])
    return PoseSkeleton(root, rots)
