"""motionbridge: synthesize intermediate skeletal motion clips between
walking references and a single target clip.

Core pieces: a geodesic pose metric on R^3 x SO(3)^J, order-preserving
Wasserstein alignment of clips, projection of soft plans onto hard frame
assignments, SLERP-based geodesic sampling, and collision-free pose
optimization over sphere/capsule penetration energies.
"""

__version__ = "0.1.0"

from .alignment import AlignmentResult, OpwParams, TransportPlan, opw_align
from .assignment import AssignmentMatrix, assignment_score, soft_to_hard
from .collision import (
    EnergyReport,
    ExclusionMasks,
    build_exclusion_masks,
    capsule_energy,
    segment_distance,
    sphere_energy,
    total_energy,
)
from .errors import (
    ClipFormatError,
    DimensionMismatchError,
    DivergenceError,
    EmptyInputError,
    MotionBridgeError,
    NumericOverflowError,
    TopologyError,
    UnsupportedFeatureError,
)
from .kinematics import JointRadii, SkeletonTopology, compute_radii, forward_kinematics
from .optimizer import OptimizationTrace, OptimizerConfig, energy_gradient, optimize_pose
from .pipeline import (
    GeneratedSet,
    GenerationConfig,
    default_tau_schedule,
    generate,
    rank_references,
    root_aligned,
)
from .pose import MetricConfig, MotionClip, PoseSkeleton, interpolate_pose, pose_distance

__all__ = [
    "__version__",
    "AlignmentResult", "OpwParams", "TransportPlan", "opw_align",
    "AssignmentMatrix", "assignment_score", "soft_to_hard",
    "EnergyReport", "ExclusionMasks", "build_exclusion_masks",
    "capsule_energy", "segment_distance", "sphere_energy", "total_energy",
    "ClipFormatError", "DimensionMismatchError", "DivergenceError",
    "EmptyInputError", "MotionBridgeError", "NumericOverflowError",
    "TopologyError", "UnsupportedFeatureError",
    "JointRadii", "SkeletonTopology", "compute_radii", "forward_kinematics",
    "OptimizationTrace", "OptimizerConfig", "energy_gradient", "optimize_pose",
    "GeneratedSet", "GenerationConfig", "default_tau_schedule", "generate",
    "rank_references", "root_aligned",
    "MetricConfig", "MotionClip", "PoseSkeleton", "interpolate_pose",
    "pose_distance",
]
