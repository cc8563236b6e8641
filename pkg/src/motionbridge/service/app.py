"""FastAPI service exposing the motion pipeline.

The handler functions hold all the logic; the route functions only wrap
them in HTTP. The CLI calls the same handlers in-process, so local runs
and the service return identical results.
"""

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..alignment import TransportPlan, opw_align
from ..assignment import assignment_score, soft_to_hard
from ..collision import build_exclusion_masks, total_energy
from ..errors import MotionBridgeError
from ..pipeline import generate, root_aligned
from ..optimizer import optimize_pose
from .schemas import (
    AlignResponse,
    CheckRequest,
    CheckResponse,
    ClipPayload,
    DistanceRequest,
    DistanceResponse,
    FrameEnergyModel,
    FrameRecordModel,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    OptimizeRequest,
    OptimizeResponse,
    ProjectRequest,
    ProjectResponse,
    ProvenanceModel,
    TraceSummaryModel,
    plan_matrix_from_payload,
)


def handle_distance(req: DistanceRequest) -> DistanceResponse:
    result = _aligned_result(req)
    return DistanceResponse(
        distance=result.distance,
        marginal_error=result.marginal_error,
        iterations_used=result.iterations_used,
        regularized_objective=result.regularized_objective,
    )


def handle_align(req: DistanceRequest) -> AlignResponse:
    result = _aligned_result(req)
    return AlignResponse(
        distance=result.distance,
        marginal_error=result.marginal_error,
        iterations_used=result.iterations_used,
        regularized_objective=result.regularized_objective,
        plan=[[float(v) for v in row] for row in result.plan.matrix],
    )


def _aligned_result(req: DistanceRequest):
    ref, _ = req.reference.to_domain()
    target, _ = req.target.to_domain()
    if req.root_align:
        ref = root_aligned(ref)
        target = root_aligned(target)
    return opw_align(ref, target, req.opw.to_domain(), req.metric.to_domain(),
                     mode=req.mode)


def handle_project(req: ProjectRequest) -> ProjectResponse:
    matrix = plan_matrix_from_payload(req.plan)
    plan = TransportPlan.uniform(matrix)
    gamma = soft_to_hard(plan)
    return ProjectResponse(
        n_sources=matrix.shape[0],
        n_targets=matrix.shape[1],
        pairs=list(gamma.pairs),
        score=assignment_score(plan, gamma),
    )


def handle_generate(req: GenerateRequest) -> GenerateResponse:
    target, topology = req.target.to_domain()
    refs = [payload.to_domain()[0] for payload in req.references]
    cfg = req.config.to_domain()
    result = generate(refs, target, topology, cfg)
    clips = [ClipPayload.from_domain(clip, topology) for clip in result.clips]
    provenance = [
        ProvenanceModel(
            clip_name=p.clip_name,
            source_name=p.source_name,
            tau=p.tau,
            opw_distance=p.opw_distance,
            assignment_pairs=p.assignment_pairs,
            frames=[FrameRecordModel(**vars(rec)) for rec in p.frames],
        )
        for p in result.provenance
    ]
    return GenerateResponse(
        clips=clips,
        provenance=provenance,
        flagged_frames=result.flagged_frame_count,
    )


def handle_check(req: CheckRequest) -> CheckResponse:
    clip, topology = req.clip.to_domain()
    masks = build_exclusion_masks(topology)
    frames = []
    for idx, pose in enumerate(clip.frames):
        report = total_energy(pose, topology, masks, rho=req.rho,
                              lambda_capsule=req.lambda_capsule)
        frames.append(FrameEnergyModel(
            frame=idx,
            sphere_energy=report.sphere_energy,
            capsule_energy=report.capsule_energy,
            total=report.total,
        ))
    max_total = max(f.total for f in frames)
    return CheckResponse(
        frames=frames,
        max_total=max_total,
        all_below_threshold=max_total < req.threshold,
    )


def handle_optimize(req: OptimizeRequest) -> OptimizeResponse:
    clip, topology = req.clip.to_domain()
    masks = build_exclusion_masks(topology)
    cfg = req.optimizer.to_domain()
    out_frames = []
    traces = []
    flagged = 0
    for idx, pose in enumerate(clip.frames):
        final, trace = optimize_pose(pose, topology, masks, cfg,
                                     rho=req.rho,
                                     lambda_capsule=req.lambda_capsule)
        out_frames.append(final)
        traces.append(TraceSummaryModel(
            frame=idx,
            initial_energy=trace.initial_energy,
            final_energy=trace.final_energy,
            steps_taken=trace.steps_taken,
            converged_early=trace.converged_early,
        ))
        if trace.final_energy >= cfg.energy_stop:
            flagged += 1
    out_clip = type(clip)(clip.name, clip.fps, out_frames, clip.topology_ref)
    return OptimizeResponse(
        clip=ClipPayload.from_domain(out_clip, topology),
        traces=traces,
        flagged_frames=flagged,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="motionbridge",
        version=__version__,
        description="Intermediate motion clip generation between walking "
                    "references and a target clip",
    )

    def run(handler, req):
        try:
            return handler(req)
        except (MotionBridgeError, ValueError) as err:
            raise HTTPException(status_code=422, detail=str(err))

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/distance", response_model=DistanceResponse)
    def distance(req: DistanceRequest):
        return run(handle_distance, req)

    @app.post("/align", response_model=AlignResponse)
    def align(req: DistanceRequest):
        return run(handle_align, req)

    @app.post("/project", response_model=ProjectResponse)
    def project(req: ProjectRequest):
        return run(handle_project, req)

    @app.post("/generate", response_model=GenerateResponse)
    def generate_route(req: GenerateRequest):
        return run(handle_generate, req)

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest):
        return run(handle_check, req)

    @app.post("/optimize", response_model=OptimizeResponse)
    def optimize(req: OptimizeRequest):
        return run(handle_optimize, req)

    return app


app = create_app()
