"""File formats: native clip documents, a BVH subset, matrix documents,
and the pipeline run configuration.

The native clip format is a single self-describing JSON document that
embeds the topology next to the frames, so a clip travels as one file.
Quaternions are stored (w, x, y, z). Floats are written with Python's
shortest round-trip repr, so reading back recovers bit-identical values.

Plan and assignment matrices use a line-oriented text format: optional
'#' comment lines, one "N M" dimensions header, then N rows of M values.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import quat
from .alignment import OpwParams, TransportPlan
from .assignment import AssignmentMatrix
from .errors import ClipFormatError, UnsupportedFeatureError
from .kinematics import SkeletonTopology
from .optimizer import OptimizerConfig
from .pipeline import GenerationConfig, default_tau_schedule
from .pose import MetricConfig, MotionClip, PoseSkeleton

# Read-side renormalization warns when a quaternion is further than this
# from unit norm.
_NORM_WARN = 1e-3


# ---------------------------------------------------------------------------
# Native clip format


def clip_to_document(clip: MotionClip, topology: SkeletonTopology) -> dict:
    return {
        "name": clip.name,
        "fps": float(clip.fps),
        "joints": list(topology.joint_names),
        "parents": [int(p) for p in topology.parents],
        "offsets": [[float(v) for v in row] for row in topology.local_offsets],
        "frames": [
            {
                "root_translation": [float(v) for v in f.root_translation],
                "rotations": [[float(v) for v in q] for q in f.rotations],
            }
            for f in clip.frames
        ],
    }


def document_to_clip(doc: dict) -> tuple[MotionClip, SkeletonTopology]:
    for key in ("name", "fps", "joints", "parents", "offsets", "frames"):
        if key not in doc:
            raise ClipFormatError(f"clip document is missing field '{key}'")
    joints = doc["joints"]
    j = len(joints)
    if len(doc["parents"]) != j:
        raise ClipFormatError(
            f"{len(doc['parents'])} parents for {j} joints"
        )
    if len(doc["offsets"]) != j:
        raise ClipFormatError(
            f"{len(doc['offsets'])} offsets for {j} joints"
        )
    for i, off in enumerate(doc["offsets"]):
        if len(off) != 3:
            raise ClipFormatError(f"offset {i} is not a 3-vector")
    topology = SkeletonTopology(
        joint_names=[str(n) for n in joints],
        parents=np.array(doc["parents"], dtype=int),
        local_offsets=np.array(doc["offsets"], dtype=float),
    )
    if not doc["frames"]:
        raise ClipFormatError("clip document has no frames")
    frames = []
    for idx, frame in enumerate(doc["frames"]):
        if "root_translation" not in frame or "rotations" not in frame:
            raise ClipFormatError(f"frame {idx} is missing a required field")
        root = np.array(frame["root_translation"], dtype=float)
        if root.shape != (3,):
            raise ClipFormatError(f"frame {idx} root_translation is not a 3-vector")
        rots = frame["rotations"]
        if len(rots) != j:
            raise ClipFormatError(
                f"frame {idx} has {len(rots)} rotations for {j} joints"
            )
        for q_idx, q in enumerate(rots):
            if len(q) != 4:
                raise ClipFormatError(
                    f"frame {idx} rotation {q_idx} is not a 4-vector"
                )
        rotations = np.array(rots, dtype=float)
        norms = np.linalg.norm(rotations, axis=1)
        if np.any(norms < 1e-9):
            raise ClipFormatError(f"frame {idx} contains a zero-norm quaternion")
        deviation = np.max(np.abs(norms - 1.0))
        if deviation > _NORM_WARN:
            warnings.warn(
                f"frame {idx} of clip '{doc['name']}': renormalizing "
                f"quaternions off unit norm by up to {deviation:.2e}"
            )
        if deviation > 1e-9:
            # canonical data stays bit-identical across the file boundary
            rotations = rotations / norms[:, None]
        frames.append(PoseSkeleton(root, rotations))
    fps = float(doc["fps"])
    if fps <= 0:
        raise ClipFormatError(f"fps must be positive, got {fps}")
    clip = MotionClip(str(doc["name"]), fps, frames, topology.fingerprint())
    return clip, topology


def write_clip(path, clip: MotionClip, topology: SkeletonTopology) -> None:
    doc = clip_to_document(clip, topology)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_clip(path) -> tuple[MotionClip, SkeletonTopology]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ClipFormatError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}")
    if not isinstance(doc, dict):
        raise ClipFormatError(f"{path}: expected a JSON object at top level")
    try:
        return document_to_clip(doc)
    except ClipFormatError as err:
        raise ClipFormatError(f"{path}: {err}") from None


# ---------------------------------------------------------------------------
# Matrix documents (transport plans and hard assignments)


def write_matrix(path, matrix: np.ndarray, comments: list[str] | None = None) -> None:
    matrix = np.asarray(matrix)
    lines = [f"# {c}" for c in (comments or [])]
    lines.append(f"{matrix.shape[0]} {matrix.shape[1]}")
    for row in matrix:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    rows = []
    dims = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if dims is None:
            parts = line.split()
            if len(parts) != 2:
                raise ClipFormatError(
                    f"{path}:{lineno}: expected dimensions header 'N M'"
                )
            try:
                dims = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise ClipFormatError(f"{path}:{lineno}: non-integer dimensions")
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError:
            raise ClipFormatError(f"{path}:{lineno}: non-numeric matrix entry")
    if dims is None:
        raise ClipFormatError(f"{path}: missing dimensions header")
    if len(rows) != dims[0] or any(len(r) != dims[1] for r in rows):
        raise ClipFormatError(
            f"{path}: matrix body does not match header {dims[0]}x{dims[1]}"
        )
    return np.array(rows, dtype=float)


def write_plan(path, plan: TransportPlan, comments: list[str] | None = None) -> None:
    write_matrix(path, plan.matrix, comments)


def read_plan(path) -> TransportPlan:
    matrix = read_matrix(path)
    if np.any(matrix < 0):
        raise ClipFormatError(f"{path}: transport plan has negative entries")
    return TransportPlan.uniform(matrix)


def write_assignment(path, gamma: AssignmentMatrix,
                     comments: list[str] | None = None) -> None:
    write_matrix(path, gamma.matrix.astype(float), comments)


def read_assignment(path) -> AssignmentMatrix:
    matrix = read_matrix(path)
    if not np.all(np.isin(matrix, (0.0, 1.0))):
        raise ClipFormatError(f"{path}: assignment entries must be 0 or 1")
    binary = matrix.astype(int)
    if not np.all(binary.sum(axis=0) == 1):
        raise ClipFormatError(f"{path}: every assignment column must sum to 1")
    pairs = [(int(np.flatnonzero(binary[:, m])[0]), m)
             for m in range(binary.shape[1])]
    return AssignmentMatrix(matrix=binary, pairs=pairs)


# ---------------------------------------------------------------------------
# BVH subset


_ROTATION_AXES = {"Xrotation": "x", "Yrotation": "y", "Zrotation": "z"}
_POSITION_INDEX = {"Xposition": 0, "Yposition": 1, "Zposition": 2}
_AXIS_VECTORS = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


def _euler_to_quaternion(axes: str, degrees: list[float]) -> np.ndarray:
    """Compose per-channel axis rotations, in channel order, into one
    quaternion. BVH stores degrees and applies channels left to right."""
    q = quat.IDENTITY.copy()
    for axis, angle in zip(axes, degrees):
        q = quat.multiply(q, quat.from_axis_angle(_AXIS_VECTORS[axis],
                                                  math.radians(angle)))
    return quat.normalize(q)


@dataclass
class _BvhJoint:
    name: str
    parent: int
    offset: np.ndarray
    rotation_axes: str = ""
    position_slots: list[tuple[int, int]] = field(default_factory=list)
    rotation_slot: int = -1


def read_bvh_subset(path) -> tuple[MotionClip, SkeletonTopology]:
    """Parse the rigid-offset Euler subset of BVH.

    Supported: HIERARCHY/MOTION sections, one OFFSET per joint, rotation
    channels in any of the six orders, position channels on any joint
    mapped to the root translation only for the root (elsewhere they are
    unsupported), End Sites dropped. Angles are degrees. Anything outside
    this subset raises UnsupportedFeatureError naming the joint.
    """
    path = Path(path)
    tokens = path.read_text(encoding="utf-8").split()
    if not tokens or tokens[0].upper() != "HIERARCHY":
        raise ClipFormatError(f"{path}: missing HIERARCHY section")

    joints: list[_BvhJoint] = []
    pos = 1
    channel_cursor = 0
    stack: list[int] = []

    def expect(token):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != token:
            found = tokens[pos] if pos < len(tokens) else "<eof>"
            raise ClipFormatError(f"{path}: expected '{token}', found '{found}'")
        pos += 1

    while pos < len(tokens):
        tok = tokens[pos]
        upper = tok.upper()
        if upper in ("ROOT", "JOINT"):
            pos += 1
            name = tokens[pos]
            pos += 1
            parent = stack[-1] if stack else -1
            if upper == "ROOT" and joints:
                raise UnsupportedFeatureError(
                    f"{path}: multiple ROOT declarations are not supported"
                )
            joints.append(_BvhJoint(name=name, parent=parent, offset=np.zeros(3)))
            expect("{")
            stack.append(len(joints) - 1)
        elif upper == "END":
            # End Site: consume its block and drop it.
            pos += 2  # END + "Site"
            expect("{")
            depth = 1
            while depth > 0:
                if tokens[pos] == "{":
                    depth += 1
                elif tokens[pos] == "}":
                    depth -= 1
                pos += 1
        elif upper == "OFFSET":
            pos += 1
            vals = [float(tokens[pos + k]) for k in range(3)]
            pos += 3
            joints[stack[-1]].offset = np.array(vals)
        elif upper == "CHANNELS":
            pos += 1
            count = int(tokens[pos])
            pos += 1
            names = tokens[pos:pos + count]
            pos += count
            joint = joints[stack[-1]]
            rot_axes = ""
            rot_start = -1
            for k, ch in enumerate(names):
                if ch in _ROTATION_AXES:
                    if rot_start == -1:
                        rot_start = channel_cursor + k
                    elif channel_cursor + k != rot_start + len(rot_axes):
                        raise UnsupportedFeatureError(
                            f"{path}: joint '{joint.name}' has non-contiguous "
                            f"rotation channels"
                        )
                    rot_axes += _ROTATION_AXES[ch]
                elif ch in _POSITION_INDEX:
                    if joint.parent != -1:
                        raise UnsupportedFeatureError(
                            f"{path}: joint '{joint.name}' has position channels "
                            f"on a non-root joint"
                        )
                    joint.position_slots.append(
                        (channel_cursor + k, _POSITION_INDEX[ch])
                    )
                else:
                    raise UnsupportedFeatureError(
                        f"{path}: joint '{joint.name}' has unsupported channel "
                        f"'{ch}'"
                    )
            if len(rot_axes) not in (0, 3):
                raise UnsupportedFeatureError(
                    f"{path}: joint '{joint.name}' must have exactly 0 or 3 "
                    f"rotation channels, found {len(rot_axes)}"
                )
            joint.rotation_axes = rot_axes
            joint.rotation_slot = rot_start
            channel_cursor += count
        elif tok == "}":
            pos += 1
            stack.pop()
        elif upper == "MOTION":
            pos += 1
            break
        else:
            raise ClipFormatError(f"{path}: unexpected token '{tok}' in hierarchy")

    if stack:
        raise ClipFormatError(f"{path}: unbalanced braces in hierarchy")
    if not joints:
        raise ClipFormatError(f"{path}: no joints declared")

    expect("Frames:")
    frame_count = int(tokens[pos])
    pos += 1
    expect("Frame")
    expect("Time:")
    frame_time = float(tokens[pos])
    pos += 1
    if frame_time <= 0:
        raise ClipFormatError(f"{path}: frame time must be positive")

    values = [float(v) for v in tokens[pos:]]
    if len(values) != frame_count * channel_cursor:
        raise ClipFormatError(
            f"{path}: expected {frame_count * channel_cursor} motion values, "
            f"found {len(values)}"
        )

    frames = []
    for f in range(frame_count):
        row = values[f * channel_cursor:(f + 1) * channel_cursor]
        root = np.zeros(3)
        for slot, axis_idx in joints[0].position_slots:
            root[axis_idx] = row[slot]
        rotations = np.empty((len(joints), 4))
        for j, joint in enumerate(joints):
            if joint.rotation_axes:
                angles = row[joint.rotation_slot:joint.rotation_slot + 3]
                rotations[j] = _euler_to_quaternion(joint.rotation_axes, angles)
            else:
                rotations[j] = quat.IDENTITY
        frames.append(PoseSkeleton(root, rotations))

    topology = SkeletonTopology(
        joint_names=[j.name for j in joints],
        parents=np.array([j.parent for j in joints], dtype=int),
        local_offsets=np.stack([j.offset for j in joints]),
    )
    clip = MotionClip(path.stem, 1.0 / frame_time, frames, topology.fingerprint())
    return clip, topology


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    """Generation settings plus the input/output paths for a pipeline run."""

    references_dir: Path
    target_clip: Path
    output_dir: Path
    generation: GenerationConfig
    topology_override: Path | None = None


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ClipFormatError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}")
    for key in ("references_dir", "target_clip", "output_dir"):
        if key not in doc:
            raise ClipFormatError(f"{path}: run config is missing '{key}'")
    base = path.parent
    refs_dir = (base / doc["references_dir"]).resolve()
    target_clip = (base / doc["target_clip"]).resolve()
    output_dir = (base / doc["output_dir"]).resolve()
    if not refs_dir.is_dir():
        raise ClipFormatError(f"{path}: references_dir '{refs_dir}' does not exist")
    if not target_clip.is_file():
        raise ClipFormatError(f"{path}: target_clip '{target_clip}' does not exist")
    override = None
    if doc.get("topology_override"):
        override = (base / doc["topology_override"]).resolve()
        if not override.is_file():
            raise ClipFormatError(
                f"{path}: topology_override '{override}' does not exist"
            )

    samples = int(doc.get("samples_per_clip", 6))
    tau_schedule = [float(v) for v in doc.get(
        "tau_schedule", default_tau_schedule(samples)
    )]
    opw_doc = doc.get("opw", {})
    optimizer_doc = doc.get("optimizer", {})
    generation = GenerationConfig(
        q_nearest=int(doc.get("q_nearest", 10)),
        samples_per_clip=samples,
        tau_schedule=tau_schedule,
        opw=OpwParams(
            lambda1=float(opw_doc.get("lambda1", 50.0)),
            lambda2=float(opw_doc.get("lambda2", 0.1)),
            delta=float(opw_doc.get("delta", 1.0)),
            max_iters=int(opw_doc.get("max_iters", 20)),
            tolerance=float(opw_doc.get("tolerance", 0.0)),
        ),
        metric=MetricConfig(w=float(doc.get("metric", {}).get("w", 1.0))),
        optimizer=OptimizerConfig(
            learning_rate=float(optimizer_doc.get("learning_rate", 0.05)),
            max_steps=int(optimizer_doc.get("max_steps", 120)),
            energy_stop=float(optimizer_doc.get("energy_stop", 1e-6)),
            gradient_mode=str(optimizer_doc.get("gradient_mode", "analytic")),
            fd_step=float(optimizer_doc.get("fd_step", 1e-6)),
            backtracking=bool(optimizer_doc.get("backtracking", False)),
        ),
        rho=float(doc.get("rho", 0.04)),
        lambda_capsule=float(doc.get("lambda_capsule", 1.0)),
        seed=int(doc.get("seed", 0)),
    )
    return RunConfig(
        references_dir=refs_dir,
        target_clip=target_clip,
        output_dir=output_dir,
        generation=generation,
        topology_override=override,
    )


def load_clip_any(path) -> tuple[MotionClip, SkeletonTopology]:
    """Dispatch on extension: .bvh via the BVH reader, everything else as
    a native clip document."""
    path = Path(path)
    if path.suffix.lower() == ".bvh":
        return read_bvh_subset(path)
    return read_clip(path)
