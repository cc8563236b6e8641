"""Collision-free pose optimization.

Gradient descent on the product of unit-quaternion spheres: the ambient
energy gradient is projected onto the tangent space at each joint
(g - (q.g) q), a fixed-size step is taken, and the quaternions are
renormalized back onto the sphere. Root translation stays fixed; only
rotations move.

Two gradient modes exist. The analytic mode chains through forward
kinematics, the penetration energies, and the position-dependent radii;
the finite-difference mode is the slow reference both for tests and for
debugging, perturbing each raw quaternion component centrally.
"""

from dataclasses import dataclass, field

import numpy as np

from . import quat
from .collision import (
    ExclusionMasks,
    segment_distance,
    sphere_energy,
    capsule_energy,
)
from .errors import DivergenceError
from .kinematics import SkeletonTopology, compute_radii, fk_with_rotations
from .pose import PoseSkeleton

GRADIENT_MODES = ("analytic", "finite_difference")


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.05
    max_steps: int = 120
    energy_stop: float = 1e-6
    gradient_mode: str = "analytic"
    fd_step: float = 1e-6
    backtracking: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.energy_stop < 0:
            raise ValueError(f"energy_stop must be >= 0, got {self.energy_stop}")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if self.fd_step <= 0:
            raise ValueError(f"fd_step must be positive, got {self.fd_step}")


@dataclass
class OptimizationTrace:
    initial_energy: float
    final_energy: float
    steps_taken: int
    energy_history: list[float] = field(default_factory=list)
    converged_early: bool = False
    max_norm_error: float = 0.0


def _radius_gradients(topology, positions, rho):
    """Per-joint sparse gradients of the sphere radii w.r.t. positions.

    Returns a list indexed by joint: each entry is a list of
    (position_index, d radius / d position) pairs. Radii follow the
    bone-length rule, so each depends on at most a handful of positions.
    """
    j = topology.joint_count
    grads = [[] for _ in range(j)]
    for idx in range(1, j):
        p = topology.parents[idx]
        diff = positions[idx] - positions[p]
        length = float(np.linalg.norm(diff))
        if length > 0.0:
            n = diff / length
            grads[idx].append((idx, rho * n))
            grads[idx].append((p, -rho * n))
    if float(np.linalg.norm(topology.local_offsets[0])) == 0.0:
        kids = topology.children(0)
        if kids:
            inv = rho / len(kids)
            acc = np.zeros(3)
            for c in kids:
                diff = positions[c] - positions[0]
                length = float(np.linalg.norm(diff))
                if length > 0.0:
                    n = diff / length
                    grads[0].append((c, inv * n))
                    acc -= inv * n
            grads[0].append((0, acc))
    return grads


def _energy_and_position_grad(topology, positions, masks, rho, lambda_capsule):
    """Total penetration energy plus its gradient w.r.t. joint positions.

    The radii are treated as functions of the positions, so their chain
    terms are included; that is what makes this match raw componentwise
    finite differences.
    """
    j = topology.joint_count
    radii = compute_radii(topology, positions, rho)
    r = radii.radii
    rgrads = _radius_gradients(topology, positions, rho)
    grad_x = np.zeros((j, 3))
    e_sphere = 0.0
    for i in range(j):
        for k in range(i + 1, j):
            if (i, k) in masks.sphere_pairs_excluded:
                continue
            diff = positions[i] - positions[k]
            dist = float(np.linalg.norm(diff))
            gap = r[i] + r[k] - dist
            if gap <= 0.0:
                continue
            e_sphere += gap * gap
            coef = 2.0 * gap
            if dist > 0.0:
                n = diff / dist
                grad_x[i] -= coef * n
                grad_x[k] += coef * n
            for pos_idx, g in rgrads[i]:
                grad_x[pos_idx] += coef * g
            for pos_idx, g in rgrads[k]:
                grad_x[pos_idx] += coef * g

    bones = topology.bones()
    e_capsule = 0.0
    for i in range(len(bones)):
        pi, ci = bones[i]
        for k in range(i + 1, len(bones)):
            if (i, k) in masks.capsule_pairs_excluded:
                continue
            pk, ck = bones[k]
            res = segment_distance(positions[pi], positions[ci],
                                   positions[pk], positions[ck])
            gap = r[pi] + r[pk] - res.distance
            if gap <= 0.0:
                continue
            e_capsule += gap * gap
            coef = 2.0 * gap * lambda_capsule
            if res.distance > 0.0:
                xa = positions[pi] + res.s * (positions[ci] - positions[pi])
                xb = positions[pk] + res.t * (positions[ck] - positions[pk])
                n = (xa - xb) / res.distance
                grad_x[pi] -= coef * (1.0 - res.s) * n
                grad_x[ci] -= coef * res.s * n
                grad_x[pk] += coef * (1.0 - res.t) * n
                grad_x[ck] += coef * res.t * n
            for pos_idx, g in rgrads[pi]:
                grad_x[pos_idx] += coef * g
            for pos_idx, g in rgrads[pk]:
                grad_x[pos_idx] += coef * g
    return e_sphere, e_capsule, grad_x


def _backprop_positions_to_rotations(topology, rotations, globals_, grad_x):
    """Chain a position-space gradient back to raw quaternion components."""
    j = topology.joint_count
    x_bar = grad_x.copy()
    g_bar = np.zeros((j, 3, 3))
    grad_q = np.zeros((j, 4))
    for idx in range(j - 1, 0, -1):
        p = topology.parents[idx]
        local_r = quat.to_matrix(rotations[idx])
        parent_global = globals_[p]
        r_bar = parent_global.T @ g_bar[idx]
        grad_q[idx] = np.einsum("krc,rc->k", quat.matrix_jacobian(rotations[idx]), r_bar)
        x_bar[p] += x_bar[idx]
        g_bar[p] += np.outer(x_bar[idx], topology.local_offsets[idx])
        g_bar[p] += g_bar[idx] @ local_r.T
    grad_q[0] = np.einsum("krc,rc->k", quat.matrix_jacobian(rotations[0]), g_bar[0])
    return grad_q


def _raw_energy(topology, root, rotations, masks, rho, lambda_capsule):
    positions, _ = fk_with_rotations(topology, root, rotations)
    if not np.all(np.isfinite(positions)):
        # the squared hinge would silently swallow NaN positions
        return float("nan")
    radii = compute_radii(topology, positions, rho)
    return (sphere_energy(positions, radii, masks)
            + lambda_capsule * capsule_energy(positions, topology, radii, masks))


def energy_gradient(
    pose: PoseSkeleton,
    topology: SkeletonTopology,
    masks: ExclusionMasks,
    rho: float = 0.04,
    lambda_capsule: float = 1.0,
    mode: str = "analytic",
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Gradient of total penetration energy w.r.t. each raw quaternion.

    Shape (J, 4), components ordered (w, x, y, z). Collision-free poses
    yield an exactly zero gradient (the squared hinge is inactive).
    """
    if mode not in GRADIENT_MODES:
        raise ValueError(f"mode must be one of {GRADIENT_MODES}")
    root = pose.root_translation
    rotations = pose.rotations
    if mode == "analytic":
        positions, globals_ = fk_with_rotations(topology, root, rotations)
        _, _, grad_x = _energy_and_position_grad(
            topology, positions, masks, rho, lambda_capsule
        )
        return _backprop_positions_to_rotations(topology, rotations, globals_, grad_x)
    grad = np.zeros_like(rotations)
    for j in range(rotations.shape[0]):
        for k in range(4):
            bumped = rotations.copy()
            bumped[j, k] += fd_step
            e_plus = _raw_energy(topology, root, bumped, masks, rho, lambda_capsule)
            bumped[j, k] -= 2.0 * fd_step
            e_minus = _raw_energy(topology, root, bumped, masks, rho, lambda_capsule)
            grad[j, k] = (e_plus - e_minus) / (2.0 * fd_step)
    return grad


def optimize_pose(
    pose: PoseSkeleton,
    topology: SkeletonTopology,
    masks: ExclusionMasks,
    cfg: OptimizerConfig | None = None,
    rho: float = 0.04,
    lambda_capsule: float = 1.0,
) -> tuple[PoseSkeleton, OptimizationTrace]:
    """Drive a pose's rotations to a collision-free configuration.

    Each step: evaluate energy, stop early if below the threshold,
    otherwise take a tangent-projected gradient step and renormalize.
    Raises DivergenceError (with the partial trace attached) if the
    energy ever leaves the finite range.
    """
    cfg = cfg or OptimizerConfig()
    root = pose.root_translation.copy()
    q = pose.rotations.copy()
    q = q / np.linalg.norm(q, axis=1, keepdims=True)

    def energy_of(rots):
        return _raw_energy(topology, root, rots, masks, rho, lambda_capsule)

    def gradient_of(rots):
        if cfg.gradient_mode == "analytic":
            positions, globals_ = fk_with_rotations(topology, root, rots)
            _, _, grad_x = _energy_and_position_grad(
                topology, positions, masks, rho, lambda_capsule
            )
            return _backprop_positions_to_rotations(topology, rots, globals_, grad_x)
        probe = PoseSkeleton(root, rots)
        return energy_gradient(probe, topology, masks, rho, lambda_capsule,
                               mode="finite_difference", fd_step=cfg.fd_step)

    history: list[float] = []
    max_norm_error = 0.0
    converged_early = False
    steps_taken = 0

    energy = energy_of(q)
    history.append(energy)
    if not np.isfinite(energy):
        raise DivergenceError(
            "non-finite energy at the initial pose",
            trace=OptimizationTrace(energy, energy, 0, history, False, 0.0),
        )
    if energy < cfg.energy_stop:
        converged_early = True
    else:
        for _ in range(cfg.max_steps):
            grad = gradient_of(q)
            radial = np.einsum("jk,jk->j", q, grad)
            g_proj = grad - radial[:, None] * q
            lr = cfg.learning_rate
            while True:
                q_new = q - lr * g_proj
                q_new = q_new / np.linalg.norm(q_new, axis=1, keepdims=True)
                new_energy = energy_of(q_new)
                if not cfg.backtracking or new_energy <= energy or lr < 1e-12:
                    break
                lr *= 0.5
            if not np.isfinite(new_energy):
                trace = OptimizationTrace(
                    history[0], new_energy, steps_taken + 1, history + [new_energy],
                    False, max_norm_error,
                )
                raise DivergenceError("energy diverged during optimization", trace=trace)
            q = q_new
            steps_taken += 1
            energy = new_energy
            history.append(energy)
            max_norm_error = max(
                max_norm_error,
                float(np.max(np.abs(np.linalg.norm(q, axis=1) - 1.0))),
            )
            if energy < cfg.energy_stop:
                converged_early = True
                break

    trace = OptimizationTrace(
        initial_energy=history[0],
        final_energy=history[-1],
        steps_taken=steps_taken,
        energy_history=history,
        converged_early=converged_early,
        max_norm_error=max_norm_error,
    )
    return PoseSkeleton(root, q), trace
