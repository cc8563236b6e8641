"""Command-line client for the motion pipeline.

Every subcommand builds the same request models the HTTP API uses and
dispatches them either in-process (default) or to a running service via
--server. Files are read and written on the client side.

Exit codes: 0 success, 1 a threshold or flagged-frame failure, 2 usage or
parse errors.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import MotionBridgeError
from .motion_io import (
    load_clip_any,
    load_run_config,
    read_plan,
    write_assignment,
    write_clip,
    write_plan,
)
from .assignment import AssignmentMatrix
from .alignment import TransportPlan
from .service import schemas
from .service.app import (
    handle_align,
    handle_check,
    handle_distance,
    handle_generate,
    handle_optimize,
    handle_project,
)

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2

_LOCAL_HANDLERS = {
    "/distance": (handle_distance, schemas.DistanceResponse),
    "/align": (handle_align, schemas.AlignResponse),
    "/project": (handle_project, schemas.ProjectResponse),
    "/generate": (handle_generate, schemas.GenerateResponse),
    "/check": (handle_check, schemas.CheckResponse),
    "/optimize": (handle_optimize, schemas.OptimizeResponse),
}


class _Backend:
    """Dispatches requests locally or to a remote service."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, route: str, request):
        handler, response_model = _LOCAL_HANDLERS[route]
        if self.server is None:
            return handler(request)
        import httpx

        resp = httpx.post(
            self.server + route,
            json=request.model_dump(),
            timeout=3600.0,
        )
        if resp.status_code != 200:
            raise MotionBridgeError(
                f"server returned {resp.status_code}: {resp.text}"
            )
        return response_model.model_validate(resp.json())


def _clip_payload(path: Path) -> schemas.ClipPayload:
    clip, topology = load_clip_any(path)
    return schemas.ClipPayload.from_domain(clip, topology)


def _opw_model(args) -> schemas.OpwParamsModel:
    return schemas.OpwParamsModel(
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        delta=args.delta,
        max_iters=args.max_iters,
        tolerance=args.tolerance,
    )


def _add_opw_flags(parser):
    parser.add_argument("--lambda1", type=float, default=50.0,
                        help="temporal-locality weight")
    parser.add_argument("--lambda2", type=float, default=0.1,
                        help="entropic/KL weight")
    parser.add_argument("--delta", type=float, default=1.0,
                        help="prior standard deviation")
    parser.add_argument("--max-iters", type=int, default=20,
                        help="Sinkhorn iteration budget")
    parser.add_argument("--tolerance", type=float, default=0.0,
                        help="early-stop marginal violation (0 = run all iterations)")
    parser.add_argument("--w", type=float, default=1.0,
                        help="rotation weight in the pose metric")
    parser.add_argument("--mode", choices=["standard", "log"], default="standard",
                        help="Sinkhorn arithmetic mode")
    parser.add_argument("--no-root-align", action="store_true",
                        help="skip first-frame root alignment")


def _distance_request(args) -> schemas.DistanceRequest:
    return schemas.DistanceRequest(
        reference=_clip_payload(Path(args.reference)),
        target=_clip_payload(Path(args.target)),
        opw=_opw_model(args),
        metric=schemas.MetricModel(w=args.w),
        mode=args.mode,
        root_align=not args.no_root_align,
    )


def cmd_distance(args, backend: _Backend) -> int:
    resp = backend.call("/distance", _distance_request(args))
    print(f"distance {resp.distance!r}")
    print(f"marginal_error {resp.marginal_error!r}")
    print(f"iterations {resp.iterations_used}")
    return EXIT_OK


def cmd_align(args, backend: _Backend) -> int:
    resp = backend.call("/align", _distance_request(args))
    plan = TransportPlan.uniform(np.array(resp.plan))
    write_plan(Path(args.out), plan, comments=[
        "motionbridge transport plan",
        f"distance {resp.distance!r}",
        f"marginal_error {resp.marginal_error!r}",
    ])
    print(f"distance {resp.distance!r}")
    print(f"wrote plan to {args.out}")
    return EXIT_OK


def cmd_project(args, backend: _Backend) -> int:
    plan = read_plan(Path(args.plan))
    req = schemas.ProjectRequest(plan=[[float(v) for v in row]
                                       for row in plan.matrix])
    resp = backend.call("/project", req)
    matrix = np.zeros((resp.n_sources, resp.n_targets), dtype=int)
    for src, tgt in resp.pairs:
        matrix[src, tgt] = 1
    gamma = AssignmentMatrix(matrix=matrix, pairs=[tuple(p) for p in resp.pairs])
    write_assignment(Path(args.out), gamma, comments=[
        "motionbridge hard assignment",
        f"score {resp.score!r}",
    ])
    print(f"score {resp.score!r}")
    print(f"wrote assignment to {args.out}")
    return EXIT_OK


def cmd_generate(args, backend: _Backend) -> int:
    run_cfg = load_run_config(Path(args.config))
    ref_paths = sorted(
        p for p in run_cfg.references_dir.iterdir()
        if p.suffix.lower() in (".json", ".bvh")
    )
    if not ref_paths:
        raise MotionBridgeError(
            f"no reference clips found in {run_cfg.references_dir}"
        )
    gen = run_cfg.generation
    req = schemas.GenerateRequest(
        references=[_clip_payload(p) for p in ref_paths],
        target=_clip_payload(run_cfg.target_clip),
        config=schemas.GenerationModel(
            q_nearest=gen.q_nearest,
            samples_per_clip=gen.samples_per_clip,
            tau_schedule=list(gen.tau_schedule),
            opw=schemas.OpwParamsModel(
                lambda1=gen.opw.lambda1, lambda2=gen.opw.lambda2,
                delta=gen.opw.delta, max_iters=gen.opw.max_iters,
                tolerance=gen.opw.tolerance,
            ),
            metric=schemas.MetricModel(w=gen.metric.w),
            optimizer=schemas.OptimizerModel(
                learning_rate=gen.optimizer.learning_rate,
                max_steps=gen.optimizer.max_steps,
                energy_stop=gen.optimizer.energy_stop,
                gradient_mode=gen.optimizer.gradient_mode,
                fd_step=gen.optimizer.fd_step,
                backtracking=gen.optimizer.backtracking,
            ),
            rho=gen.rho,
            lambda_capsule=gen.lambda_capsule,
            seed=gen.seed,
        ),
    )
    resp = backend.call("/generate", req)

    out_dir = run_cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    for payload in resp.clips:
        clip, topology = payload.to_domain()
        write_clip(out_dir / f"{clip.name}.json", clip, topology)
    manifest = {
        "versions": {
            "motionbridge": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "config": req.config.model_dump(),
        "inputs": {
            "references": [p.name for p in ref_paths],
            "target": run_cfg.target_clip.name,
        },
        "clips": [p.model_dump() for p in resp.provenance],
        "flagged_frames": resp.flagged_frames,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(resp.clips)} clips to {out_dir}")
    print(f"flagged_frames {resp.flagged_frames}")
    return EXIT_OK if resp.flagged_frames == 0 else EXIT_THRESHOLD


def cmd_check(args, backend: _Backend) -> int:
    req = schemas.CheckRequest(
        clip=_clip_payload(Path(args.clip)),
        rho=args.rho,
        lambda_capsule=args.lambda_capsule,
        threshold=args.threshold,
    )
    resp = backend.call("/check", req)
    for f in resp.frames:
        print(f"frame {f.frame}: sphere {f.sphere_energy!r} "
              f"capsule {f.capsule_energy!r} total {f.total!r}")
    print(f"max_total {resp.max_total!r}")
    return EXIT_OK if resp.all_below_threshold else EXIT_THRESHOLD


def cmd_optimize(args, backend: _Backend) -> int:
    req = schemas.OptimizeRequest(
        clip=_clip_payload(Path(args.clip)),
        optimizer=schemas.OptimizerModel(
            learning_rate=args.learning_rate,
            max_steps=args.max_steps,
            energy_stop=args.energy_stop,
            gradient_mode=args.gradient_mode,
        ),
        rho=args.rho,
        lambda_capsule=args.lambda_capsule,
    )
    resp = backend.call("/optimize", req)
    clip, topology = resp.clip.to_domain()
    write_clip(Path(args.out), clip, topology)
    for t in resp.traces:
        print(f"frame {t.frame}: energy {t.initial_energy!r} -> "
              f"{t.final_energy!r} in {t.steps_taken} steps")
    print(f"wrote optimized clip to {args.out}")
    print(f"flagged_frames {resp.flagged_frames}")
    return EXIT_OK if resp.flagged_frames == 0 else EXIT_THRESHOLD


def cmd_serve(args, _backend: _Backend) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionbridge",
        description="Generate intermediate motion clips between walking "
                    "references and a target clip",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--server", default=None,
                        help="base URL of a running motionbridge service; "
                             "default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="print the OPW distance between two clips")
    p.add_argument("reference")
    p.add_argument("target")
    _add_opw_flags(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("align", help="write the soft transport plan between two clips")
    p.add_argument("reference")
    p.add_argument("target")
    p.add_argument("--out", required=True, help="output plan document")
    _add_opw_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("project", help="project a soft plan onto a hard assignment")
    p.add_argument("plan")
    p.add_argument("--out", required=True, help="output assignment document")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("generate", help="run the full generation pipeline")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("check", help="report per-frame penetration energies")
    p.add_argument("clip")
    p.add_argument("--rho", type=float, default=0.04)
    p.add_argument("--lambda-capsule", type=float, default=1.0,
                   dest="lambda_capsule")
    p.add_argument("--threshold", type=float, default=1e-6)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("optimize", help="optimize a clip's frames collision-free")
    p.add_argument("clip")
    p.add_argument("--out", required=True, help="output clip document")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--max-steps", type=int, default=120)
    p.add_argument("--energy-stop", type=float, default=1e-6)
    p.add_argument("--gradient-mode", choices=["analytic", "finite_difference"],
                   default="analytic")
    p.add_argument("--rho", type=float, default=0.04)
    p.add_argument("--lambda-capsule", type=float, default=1.0,
                   dest="lambda_capsule")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else EXIT_USAGE
    backend = _Backend(args.server)
    try:
        return args.func(args, backend)
    except FileNotFoundError as err:
        print(f"error: file not found: {err.filename or err}", file=sys.stderr)
        return EXIT_USAGE
    except (MotionBridgeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
