"""Sphere/capsule penetration energies over a posed skeleton.

Joints become spheres, bones become capsules whose radius is the parent
joint's sphere radius. Energies sum squared hinge penetrations over
non-adjacent primitive pairs; adjacency is captured once per topology in
exclusion masks.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .kinematics import JointRadii, SkeletonTopology, compute_radii, fk_with_rotations
from .pose import PoseSkeleton

# Determinant threshold below which segment directions count as parallel.
_PARALLEL_EPS = 1e-9
# Squared-length threshold below which a segment degenerates to a point.
_POINT_EPS = 1e-12


@dataclass(frozen=True)
class ClosestPointResult:
    """Closest-approach parameters s, t in [0, 1] and distance between
    two closed segments; the distance is measured between the points the
    parameters select."""

    s: float
    t: float
    distance: float


@dataclass(frozen=True)
class ExclusionMasks:
    """Primitive pairs skipped by the energies.

    Sphere pairs are excluded for parent-child and grandparent-grandchild
    relations (siblings stay in); capsule pairs are excluded when the two
    bones share a joint.
    """

    sphere_pairs_excluded: frozenset
    capsule_pairs_excluded: frozenset


@dataclass(frozen=True)
class EnergyReport:
    sphere_energy: float
    capsule_energy: float
    total: float
    lambda_capsule: float


def build_exclusion_masks(topology: SkeletonTopology) -> ExclusionMasks:
    """Precompute the topology-invariant sphere and capsule masks."""
    parents = topology.parents
    j = topology.joint_count
    sphere = set()
    for a in range(j):
        for b in range(a + 1, j):
            pa, pb = parents[a], parents[b]
            if pb == a or pa == b:
                sphere.add((a, b))
                continue
            if (pb != -1 and parents[pb] == a) or (pa != -1 and parents[pa] == b):
                sphere.add((a, b))
    bones = topology.bones()
    capsule = set()
    for a in range(len(bones)):
        for b in range(a + 1, len(bones)):
            if set(bones[a]) & set(bones[b]):
                capsule.add((a, b))
    return ExclusionMasks(frozenset(sphere), frozenset(capsule))


def segment_distance(p1, q1, p2, q2) -> ClosestPointResult:
    """Global minimum distance between closed segments [p1,q1] and [p2,q2].

    Closed-form solve of the quadratic in (s, t) with clamping to the unit
    square: the unclamped stationary point is s=(be-cd)/D, t=(ae-bd)/D over
    D=ac-b^2; a clamped coordinate is re-solved against the other
    (s=(tb-d)/a, t=(sb+e)/c) and reclamped. Near-parallel directions
    (D < 1e-9) take the same coordinate passes starting from s=0, which
    reduces to projecting the offset onto the common direction. Zero-length
    segments degrade to point-segment or point-point distance.
    """
    p1x, p1y, p1z = (float(v) for v in p1)
    q1x, q1y, q1z = (float(v) for v in q1)
    p2x, p2y, p2z = (float(v) for v in p2)
    q2x, q2y, q2z = (float(v) for v in q2)
    ux, uy, uz = q1x - p1x, q1y - p1y, q1z - p1z
    vx, vy, vz = q2x - p2x, q2y - p2y, q2z - p2z
    wx, wy, wz = p1x - p2x, p1y - p2y, p1z - p2z

    a = ux * ux + uy * uy + uz * uz
    b = ux * vx + uy * vy + uz * vz
    c = vx * vx + vy * vy + vz * vz
    d = ux * wx + uy * wy + uz * wz
    e = vx * wx + vy * wy + vz * wz

    if a <= _POINT_EPS and c <= _POINT_EPS:
        s, t = 0.0, 0.0
    elif a <= _POINT_EPS:
        s = 0.0
        t = _clamp01(e / c)
    elif c <= _POINT_EPS:
        t = 0.0
        s = _clamp01(-d / a)
    else:
        det = a * c - b * b
        if det < _PARALLEL_EPS:
            s = 0.0
        else:
            s = _clamp01((b * e - c * d) / det)
        t = (s * b + e) / c
        if t < 0.0 or t > 1.0:
            t = _clamp01(t)
            s = _clamp01((t * b - d) / a)
            t = _clamp01((s * b + e) / c)

    cx = (p1x + s * ux) - (p2x + t * vx)
    cy = (p1y + s * uy) - (p2y + t * vy)
    cz = (p1z + s * uz) - (p2z + t * vz)
    return ClosestPointResult(s, t, math.sqrt(cx * cx + cy * cy + cz * cz))


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def sphere_energy(
    positions: np.ndarray, radii: JointRadii, masks: ExclusionMasks
) -> float:
    """Sum of squared sphere penetrations over masked-in joint pairs."""
    j = positions.shape[0]
    if radii.radii.shape[0] != j:
        raise DimensionMismatchError(
            f"{radii.radii.shape[0]} radii for {j} joint positions"
        )
    r = radii.radii
    total = 0.0
    for i in range(j):
        for k in range(i + 1, j):
            if (i, k) in masks.sphere_pairs_excluded:
                continue
            gap = r[i] + r[k] - float(np.linalg.norm(positions[i] - positions[k]))
            if gap > 0.0:
                total += gap * gap
    return total


def capsule_energy(
    positions: np.ndarray,
    topology: SkeletonTopology,
    radii: JointRadii,
    masks: ExclusionMasks,
) -> float:
    """Sum of squared capsule penetrations over masked-in bone pairs.

    Each bone spans parent to child; its capsule radius is the parent
    joint's sphere radius.
    """
    if positions.shape[0] != topology.joint_count:
        raise DimensionMismatchError(
            f"{positions.shape[0]} positions for {topology.joint_count} joints"
        )
    bones = topology.bones()
    r = radii.radii
    total = 0.0
    for i in range(len(bones)):
        pi, ci = bones[i]
        for k in range(i + 1, len(bones)):
            if (i, k) in masks.capsule_pairs_excluded:
                continue
            pk, ck = bones[k]
            res = segment_distance(positions[pi], positions[ci],
                                   positions[pk], positions[ck])
            gap = r[pi] + r[pk] - res.distance
            if gap > 0.0:
                total += gap * gap
    return total


def total_energy(
    pose: PoseSkeleton,
    topology: SkeletonTopology,
    masks: ExclusionMasks,
    rho: float = 0.04,
    lambda_capsule: float = 1.0,
) -> EnergyReport:
    """Run FK, recompute radii at the posed skeleton, and sum both
    penetration energies as sphere + lambda * capsule."""
    if lambda_capsule < 0:
        raise ValueError(f"lambda_capsule must be >= 0, got {lambda_capsule}")
    positions, _ = fk_with_rotations(topology, pose.root_translation, pose.rotations)
    radii = compute_radii(topology, positions, rho)
    e_sphere = sphere_energy(positions, radii, masks)
    e_capsule = capsule_energy(positions, topology, radii, masks)
    return EnergyReport(
        sphere_energy=e_sphere,
        capsule_energy=e_capsule,
        total=e_sphere + lambda_capsule * e_capsule,
        lambda_capsule=lambda_capsule,
    )
