"""Skeleton topology, forward kinematics, and collision-primitive radii."""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import quat
from .errors import DimensionMismatchError, TopologyError
from .pose import PoseSkeleton


@dataclass(eq=False)
class SkeletonTopology:
    """Joint hierarchy: names, parent indices (-1 for root), local offsets.

    Parents must be topologically sorted (parents[j] < j), which forces the
    root to index 0. The root's local offset is conventionally zero: the
    root's world translation comes from the pose, not the topology.
    """

    joint_names: list[str]
    parents: np.ndarray
    local_offsets: np.ndarray

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=int)
        self.local_offsets = np.asarray(self.local_offsets, dtype=float)
        j = len(self.joint_names)
        if self.parents.shape != (j,):
            raise TopologyError(
                f"parents has shape {self.parents.shape}, expected ({j},)"
            )
        if self.local_offsets.shape != (j, 3):
            raise TopologyError(
                f"local_offsets has shape {self.local_offsets.shape}, expected ({j}, 3)"
            )
        roots = np.flatnonzero(self.parents == -1)
        if len(roots) != 1:
            raise TopologyError(f"expected exactly one root, found {len(roots)}")
        for idx in range(j):
            p = self.parents[idx]
            if p >= idx:
                raise TopologyError(
                    f"parents must be topologically sorted: parents[{idx}] = {p}"
                )
            if p < -1:
                raise TopologyError(f"invalid parent index {p} at joint {idx}")
        if not np.all(np.isfinite(self.local_offsets)):
            raise TopologyError("local offsets must be finite")

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def children(self, j: int) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.parents == j)]

    def bones(self) -> list[tuple[int, int]]:
        """(parent, child) pairs, one per non-root joint, in child order."""
        return [(int(self.parents[j]), j) for j in range(self.joint_count)
                if self.parents[j] != -1]

    def fingerprint(self) -> str:
        """Stable content hash used as a topology identifier in clips."""
        doc = {
            "joints": list(self.joint_names),
            "parents": [int(p) for p in self.parents],
            "offsets": [[float(v) for v in row] for row in self.local_offsets],
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(eq=False)
class JointRadii:
    """Per-joint sphere radii plus the bone-length scale factor rho."""

    radii: np.ndarray
    rho: float

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


def forward_kinematics(topology: SkeletonTopology, pose: PoseSkeleton) -> np.ndarray:
    """World positions of every joint, shape (J, 3).

    Local transforms compose root-to-leaf in the column-vector convention.
    The root transform carries the pose's root translation directly; local
    offsets translate each child within its parent's frame.
    """
    positions, _ = fk_with_rotations(topology, pose.root_translation, pose.rotations)
    return positions


def fk_with_rotations(
    topology: SkeletonTopology, root_translation: np.ndarray, rotations: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Forward kinematics returning positions (J, 3) and global rotation
    matrices (J, 3, 3); the matrices feed the analytic gradient."""
    j = topology.joint_count
    if rotations.shape[0] != j:
        raise DimensionMismatchError(
            f"pose has {rotations.shape[0]} joints, topology has {j}"
        )
    positions = np.empty((j, 3))
    globals_ = np.empty((j, 3, 3))
    positions[0] = root_translation
    globals_[0] = quat.to_matrix(rotations[0])
    for idx in range(1, j):
        p = topology.parents[idx]
        positions[idx] = positions[p] + globals_[p] @ topology.local_offsets[idx]
        globals_[idx] = globals_[p] @ quat.to_matrix(rotations[idx])
    return positions, globals_


def compute_radii(
    topology: SkeletonTopology, positions: np.ndarray, rho: float = 0.04
) -> JointRadii:
    """Sphere radii proportional to bone lengths at the given world pose.

    Non-root joints use rho times the world distance to the parent. The
    root uses rho times its local-offset length when that is nonzero;
    with the usual zero root offset it falls back to rho times the mean
    child bone length so root collision is not silently disabled.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    j = topology.joint_count
    radii = np.empty(j)
    for idx in range(1, j):
        radii[idx] = rho * float(
            np.linalg.norm(positions[idx] - positions[topology.parents[idx]])
        )
    root_offset = float(np.linalg.norm(topology.local_offsets[0]))
    if root_offset > 0.0:
        radii[0] = rho * root_offset
    else:
        kids = topology.children(0)
        if kids:
            lengths = [float(np.linalg.norm(positions[c] - positions[0])) for c in kids]
            radii[0] = rho * float(np.mean(lengths))
        else:
            radii[0] = 0.0
    return JointRadii(radii, rho)
