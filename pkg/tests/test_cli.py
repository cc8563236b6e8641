import json

import numpy as np

from motionbridge.cli import main
from motionbridge.motion_io import (
    read_assignment,
    read_clip,
    read_plan,
    write_clip,
)
from motionbridge.pose import MotionClip

from conftest import crossed_arms_pose, humanoid_topology, smooth_random_clip


def write_test_clip(path, name, n, seed, topo):
    rng = np.random.default_rng(seed)
    clip = smooth_random_clip(rng, name, n, topology_ref=topo.fingerprint())
    write_clip(path, clip, topo)
    return clip


def test_distance_self_small(tmp_path, capsys):
    topo = humanoid_topology()
    clip_path = tmp_path / "clip.json"
    write_test_clip(clip_path, "c", 6, 0, topo)
    code = main(["distance", str(clip_path), str(clip_path)])
    out = capsys.readouterr().out
    assert code == 0
    distance = float(out.splitlines()[0].split()[1])
    assert distance < 0.5
    assert "marginal_error" in out


def test_distance_missing_file(tmp_path, capsys):
    code = main(["distance", str(tmp_path / "nope.json"),
                 str(tmp_path / "nope.json")])
    assert code == 2


def test_unknown_flag_usage_error(tmp_path):
    assert main(["distance", "--bogus"]) == 2


def test_align_then_project_roundtrip(tmp_path, capsys):
    topo = humanoid_topology()
    ref = tmp_path / "ref.json"
    tgt = tmp_path / "tgt.json"
    write_test_clip(ref, "ref", 7, 1, topo)
    write_test_clip(tgt, "tgt", 5, 2, topo)
    plan_path = tmp_path / "plan.txt"
    assert main(["align", str(ref), str(tgt), "--out", str(plan_path)]) == 0
    plan = read_plan(plan_path)
    assert plan.shape == (7, 5)

    assign_path = tmp_path / "assign.txt"
    assert main(["project", str(plan_path), "--out", str(assign_path)]) == 0
    gamma = read_assignment(assign_path)
    assert gamma.matrix.shape == (7, 5)
    np.testing.assert_array_equal(gamma.matrix.sum(axis=0), np.ones(5, int))


def test_check_rest_pose_exit_zero(tmp_path, capsys):
    topo = humanoid_topology()
    clip_path = tmp_path / "rest.json"
    from conftest import identity_pose
    clip = MotionClip("rest", 30.0, [identity_pose(12)], topo.fingerprint())
    write_clip(clip_path, clip, topo)
    assert main(["check", str(clip_path)]) == 0
    out = capsys.readouterr().out
    assert "frame 0" in out
    assert "max_total 0.0" in out


def test_check_colliding_exit_one(tmp_path):
    topo = humanoid_topology()
    clip_path = tmp_path / "collide.json"
    clip = MotionClip("collide", 30.0, [crossed_arms_pose(0.3, 0.35, 0.08)],
                      topo.fingerprint())
    write_clip(clip_path, clip, topo)
    assert main(["check", str(clip_path), "--rho", "0.25"]) == 1


def test_optimize_writes_resolved_clip(tmp_path, capsys):
    topo = humanoid_topology()
    clip_path = tmp_path / "collide.json"
    out_path = tmp_path / "fixed.json"
    clip = MotionClip("collide", 30.0, [crossed_arms_pose(0.3, 0.35, 0.08)],
                      topo.fingerprint())
    write_clip(clip_path, clip, topo)
    code = main(["optimize", str(clip_path), "--out", str(out_path),
                 "--rho", "0.25"])
    assert code == 0
    assert main(["check", str(out_path), "--rho", "0.25"]) == 0


def make_generate_setup(tmp_path, n_refs=3, frames=6):
    topo = humanoid_topology()
    refs_dir = tmp_path / "refs"
    refs_dir.mkdir()
    for i in range(n_refs):
        write_test_clip(refs_dir / f"ref{i:02d}.json", f"ref{i:02d}",
                        frames + i, 10 + i, topo)
    write_test_clip(tmp_path / "target.json", "target", frames, 99, topo)
    cfg = {
        "references_dir": "refs",
        "target_clip": "target.json",
        "output_dir": "out",
        "q_nearest": 10,
        "samples_per_clip": 2,
        "tau_schedule": [0.3, 0.7],
        "optimizer": {"max_steps": 20},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    return cfg_path


def test_generate_writes_clips_and_manifest(tmp_path, capsys):
    cfg_path = make_generate_setup(tmp_path, n_refs=3)
    code = main(["generate", "--config", str(cfg_path)])
    out_dir = tmp_path / "out"
    clips = sorted(out_dir.glob("ref*__tau*.json"))
    # min(Q, 3) = 3 references, 2 samples each
    assert len(clips) == 6
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert len(manifest["clips"]) == 6
    assert manifest["flagged_frames"] >= 0
    assert code == (0 if manifest["flagged_frames"] == 0 else 1)
    for path in clips:
        clip, _ = read_clip(path)
        assert len(clip.frames) == 6


def test_generate_byte_identical_across_runs(tmp_path):
    cfg_path = make_generate_setup(tmp_path, n_refs=2)
    main(["generate", "--config", str(cfg_path)])
    first = {
        p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()
    }
    # rerun into the same directory
    main(["generate", "--config", str(cfg_path)])
    second = {
        p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()
    }
    assert first == second


def test_remote_dispatch_through_asgi(tmp_path, capsys, monkeypatch):
    """--server routes through HTTP; exercised against the app in-process."""
    from fastapi.testclient import TestClient
    import motionbridge.cli as cli
    from motionbridge.service.app import app

    test_client = TestClient(app)

    class FakeHttpx:
        @staticmethod
        def post(url, json=None, timeout=None):
            route = url.replace("http://fake", "")
            return test_client.post(route, json=json)

    monkeypatch.setattr(cli, "httpx", FakeHttpx, raising=False)
    import sys
    monkeypatch.setitem(sys.modules, "httpx", FakeHttpx)

    topo = humanoid_topology()
    clip_path = tmp_path / "clip.json"
    write_test_clip(clip_path, "c", 5, 3, topo)
    code = main(["--server", "http://fake", "distance",
                 str(clip_path), str(clip_path)])
    assert code == 0
    assert "distance" in capsys.readouterr().out


def test_version_flag():
    assert main(["--version"]) == 0
