"""Pydantic request/response models for the HTTP API.

Clips travel inline as the same document shape the native file format
uses; converters map between payloads and the domain types.
"""

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..alignment import OpwParams
from ..kinematics import SkeletonTopology
from ..motion_io import clip_to_document, document_to_clip
from ..optimizer import OptimizerConfig
from ..pipeline import GenerationConfig, default_tau_schedule
from ..pose import MetricConfig, MotionClip


class FramePayload(BaseModel):
    root_translation: list[float] = Field(min_length=3, max_length=3)
    rotations: list[list[float]]


class ClipPayload(BaseModel):
    name: str
    fps: float
    joints: list[str]
    parents: list[int]
    offsets: list[list[float]]
    frames: list[FramePayload]

    def to_domain(self) -> tuple[MotionClip, SkeletonTopology]:
        return document_to_clip(self.model_dump())

    @classmethod
    def from_domain(cls, clip: MotionClip, topology: SkeletonTopology) -> "ClipPayload":
        return cls.model_validate(clip_to_document(clip, topology))


class OpwParamsModel(BaseModel):
    lambda1: float = 50.0
    lambda2: float = 0.1
    delta: float = 1.0
    max_iters: int = 20
    tolerance: float = 0.0

    def to_domain(self) -> OpwParams:
        return OpwParams(**self.model_dump())


class MetricModel(BaseModel):
    w: float = 1.0

    def to_domain(self) -> MetricConfig:
        return MetricConfig(w=self.w)


class OptimizerModel(BaseModel):
    learning_rate: float = 0.05
    max_steps: int = 120
    energy_stop: float = 1e-6
    gradient_mode: Literal["analytic", "finite_difference"] = "analytic"
    fd_step: float = 1e-6
    backtracking: bool = False

    def to_domain(self) -> OptimizerConfig:
        return OptimizerConfig(**self.model_dump())


class GenerationModel(BaseModel):
    q_nearest: int = 10
    samples_per_clip: int = 6
    tau_schedule: Optional[list[float]] = None
    opw: OpwParamsModel = Field(default_factory=OpwParamsModel)
    metric: MetricModel = Field(default_factory=MetricModel)
    optimizer: OptimizerModel = Field(default_factory=OptimizerModel)
    rho: float = 0.04
    lambda_capsule: float = 1.0
    seed: int = 0

    def to_domain(self) -> GenerationConfig:
        schedule = self.tau_schedule
        if schedule is None:
            schedule = default_tau_schedule(self.samples_per_clip)
        return GenerationConfig(
            q_nearest=self.q_nearest,
            samples_per_clip=self.samples_per_clip,
            tau_schedule=list(schedule),
            opw=self.opw.to_domain(),
            metric=self.metric.to_domain(),
            optimizer=self.optimizer.to_domain(),
            rho=self.rho,
            lambda_capsule=self.lambda_capsule,
            seed=self.seed,
        )


class DistanceRequest(BaseModel):
    reference: ClipPayload
    target: ClipPayload
    opw: OpwParamsModel = Field(default_factory=OpwParamsModel)
    metric: MetricModel = Field(default_factory=MetricModel)
    mode: Literal["standard", "log"] = "standard"
    root_align: bool = True


class DistanceResponse(BaseModel):
    distance: float
    marginal_error: float
    iterations_used: int
    regularized_objective: float


class AlignResponse(DistanceResponse):
    plan: list[list[float]]


class ProjectRequest(BaseModel):
    plan: list[list[float]]


class ProjectResponse(BaseModel):
    n_sources: int
    n_targets: int
    pairs: list[tuple[int, int]]
    score: float


class GenerateRequest(BaseModel):
    references: list[ClipPayload]
    target: ClipPayload
    config: GenerationModel = Field(default_factory=GenerationModel)


class FrameRecordModel(BaseModel):
    frame: int
    initial_energy: float
    final_energy: float
    steps_taken: int
    converged_early: bool
    flagged: bool


class ProvenanceModel(BaseModel):
    clip_name: str
    source_name: str
    tau: float
    opw_distance: float
    assignment_pairs: list[tuple[int, int]]
    frames: list[FrameRecordModel]


class GenerateResponse(BaseModel):
    clips: list[ClipPayload]
    provenance: list[ProvenanceModel]
    flagged_frames: int


class CheckRequest(BaseModel):
    clip: ClipPayload
    rho: float = 0.04
    lambda_capsule: float = 1.0
    threshold: float = 1e-6


class FrameEnergyModel(BaseModel):
    frame: int
    sphere_energy: float
    capsule_energy: float
    total: float


class CheckResponse(BaseModel):
    frames: list[FrameEnergyModel]
    max_total: float
    all_below_threshold: bool


class OptimizeRequest(BaseModel):
    clip: ClipPayload
    optimizer: OptimizerModel = Field(default_factory=OptimizerModel)
    rho: float = 0.04
    lambda_capsule: float = 1.0


class TraceSummaryModel(BaseModel):
    frame: int
    initial_energy: float
    final_energy: float
    steps_taken: int
    converged_early: bool


class OptimizeResponse(BaseModel):
    clip: ClipPayload
    traces: list[TraceSummaryModel]
    flagged_frames: int


class HealthResponse(BaseModel):
    status: str
    version: str


def plan_matrix_from_payload(rows: list[list[float]]) -> np.ndarray:
    if not rows or not rows[0]:
        raise ValueError("plan must be a nonempty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("plan rows have inconsistent lengths")
    return np.array(rows, dtype=float)
