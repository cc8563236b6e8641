"""End-to-end generation of intermediate motion clips.

Reference clips are ranked by their order-preserving Wasserstein distance
to the target, the best Q are kept, each soft plan is projected to a hard
frame assignment, and for every interpolation level tau a full-length clip
is built by walking the target frames and interpolating each one against
its assigned reference frame. Every generated frame then runs through the
collision-free optimizer; frames that stay penetrating (or diverge) are
flagged rather than aborting the batch.

All clips are root-aligned first (translated so the first frame's root sits
at the origin); otherwise absolute world position would dominate the
transport cost. Outputs are therefore in root-aligned coordinates.
"""

from dataclasses import dataclass, field

from .alignment import AlignmentResult, OpwParams, opw_align
from .assignment import soft_to_hard
from .errors import DimensionMismatchError, DivergenceError, EmptyInputError
from .kinematics import SkeletonTopology
from .collision import build_exclusion_masks
from .optimizer import OptimizerConfig, optimize_pose
from .pose import MetricConfig, MotionClip, PoseSkeleton, interpolate_pose


def default_tau_schedule(samples: int = 6) -> list[float]:
    """Evenly spaced interior interpolation levels k/(samples+1)."""
    return [k / (samples + 1.0) for k in range(1, samples + 1)]


@dataclass
class GenerationConfig:
    q_nearest: int = 10
    samples_per_clip: int = 6
    tau_schedule: list[float] = field(default_factory=default_tau_schedule)
    opw: OpwParams = field(default_factory=OpwParams)
    metric: MetricConfig = field(default_factory=MetricConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    rho: float = 0.04
    lambda_capsule: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.q_nearest < 1:
            raise ValueError(f"q_nearest must be >= 1, got {self.q_nearest}")
        if self.samples_per_clip < 1:
            raise ValueError(
                f"samples_per_clip must be >= 1, got {self.samples_per_clip}"
            )
        if len(self.tau_schedule) != self.samples_per_clip:
            raise ValueError(
                f"tau_schedule has {len(self.tau_schedule)} entries for "
                f"{self.samples_per_clip} samples per clip"
            )
        for i, tau in enumerate(self.tau_schedule):
            if not 0.0 < tau < 1.0:
                raise ValueError(f"tau_schedule[{i}] = {tau} is outside (0, 1)")
            if i > 0 and tau <= self.tau_schedule[i - 1]:
                raise ValueError("tau_schedule must be strictly increasing")


@dataclass
class FrameRecord:
    """Per-frame optimization outcome kept in the provenance manifest."""

    frame: int
    initial_energy: float
    final_energy: float
    steps_taken: int
    converged_early: bool
    flagged: bool


@dataclass
class ClipProvenance:
    clip_name: str
    source_name: str
    tau: float
    opw_distance: float
    assignment_pairs: list[tuple[int, int]]
    frames: list[FrameRecord]

    @property
    def flagged_frames(self) -> list[int]:
        return [rec.frame for rec in self.frames if rec.flagged]


@dataclass
class GeneratedSet:
    clips: list[MotionClip]
    provenance: list[ClipProvenance]

    @property
    def flagged_frame_count(self) -> int:
        return sum(len(p.flagged_frames) for p in self.provenance)


def root_aligned(clip: MotionClip) -> MotionClip:
    """Translate a clip so its first frame's root sits at the origin."""
    origin = clip.frames[0].root_translation
    frames = [
        PoseSkeleton(f.root_translation - origin, f.rotations.copy())
        for f in clip.frames
    ]
    return MotionClip(clip.name, clip.fps, frames, clip.topology_ref)


def rank_references(
    refs: list[MotionClip],
    target: MotionClip,
    cfg: GenerationConfig | None = None,
) -> list[tuple[MotionClip, AlignmentResult]]:
    """References sorted by ascending OPW distance to the target.

    Clips are root-aligned before the distance computation. At most
    q_nearest survive; equal distances break alphabetically by clip name.
    Topology mismatches name the offending clip.
    """
    cfg = cfg or GenerationConfig()
    if not refs:
        raise EmptyInputError("no reference clips given")
    for ref in refs:
        if ref.joint_count != target.joint_count or (
            ref.topology_ref and target.topology_ref
            and ref.topology_ref != target.topology_ref
        ):
            raise DimensionMismatchError(
                f"reference clip '{ref.name}' does not share the target's topology"
            )
    aligned_target = root_aligned(target)
    scored = [
        (ref, opw_align(root_aligned(ref), aligned_target, cfg.opw, cfg.metric))
        for ref in refs
    ]
    scored.sort(key=lambda pair: (pair[1].distance, pair[0].name))
    return scored[: min(cfg.q_nearest, len(scored))]


def generate(
    refs: list[MotionClip],
    target: MotionClip,
    topology: SkeletonTopology,
    cfg: GenerationConfig | None = None,
) -> GeneratedSet:
    """Build min(Q, |refs|) * samples_per_clip intermediate clips.

    Each selected reference contributes one clip per tau level, named
    "{ref}__tau{tau}". Clip length and fps copy the target. Frames whose
    optimization diverges or ends above the energy threshold are flagged
    in the provenance and emitted as-is.
    """
    cfg = cfg or GenerationConfig()
    if target.joint_count != topology.joint_count:
        raise DimensionMismatchError(
            f"target has {target.joint_count} joints, topology has "
            f"{topology.joint_count}"
        )
    masks = build_exclusion_masks(topology)
    aligned_target = root_aligned(target)
    ranked = rank_references(refs, target, cfg)

    clips: list[MotionClip] = []
    provenance: list[ClipProvenance] = []
    for ref, result in ranked:
        aligned_ref = root_aligned(ref)
        gamma = soft_to_hard(result.plan)
        source_for = gamma.source_for_target()
        for tau in cfg.tau_schedule:
            name = f"{ref.name}__tau{tau:.6g}"
            frames: list[PoseSkeleton] = []
            records: list[FrameRecord] = []
            for m in range(len(aligned_target.frames)):
                blended = interpolate_pose(
                    aligned_ref.frames[source_for[m]],
                    aligned_target.frames[m],
                    tau,
                    cfg.metric,
                )
                try:
                    final, trace = optimize_pose(
                        blended, topology, masks, cfg.optimizer,
                        rho=cfg.rho, lambda_capsule=cfg.lambda_capsule,
                    )
                    flagged = trace.final_energy >= cfg.optimizer.energy_stop
                    frames.append(final)
                    records.append(FrameRecord(
                        frame=m,
                        initial_energy=trace.initial_energy,
                        final_energy=trace.final_energy,
                        steps_taken=trace.steps_taken,
                        converged_early=trace.converged_early,
                        flagged=flagged,
                    ))
                except DivergenceError as err:
                    frames.append(blended)
                    trace = err.trace
                    records.append(FrameRecord(
                        frame=m,
                        initial_energy=trace.initial_energy if trace else float("nan"),
                        final_energy=trace.final_energy if trace else float("nan"),
                        steps_taken=trace.steps_taken if trace else 0,
                        converged_early=False,
                        flagged=True,
                    ))
            clips.append(MotionClip(name, target.fps, frames, target.topology_ref))
            provenance.append(ClipProvenance(
                clip_name=name,
                source_name=ref.name,
                tau=tau,
                opw_distance=result.distance,
                assignment_pairs=list(gamma.pairs),
                frames=records,
            ))
    return GeneratedSet(clips=clips, provenance=provenance)
