import numpy as np
import pytest
from fastapi.testclient import TestClient

from motionbridge import __version__
from motionbridge.motion_io import clip_to_document
from motionbridge.service.app import app

from conftest import crossed_arms_pose, humanoid_topology, smooth_random_clip
from motionbridge.pose import MotionClip


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def clip_payload(rng, name="clip", n=6):
    topo = humanoid_topology()
    clip = smooth_random_clip(rng, name, n, topology_ref=topo.fingerprint())
    return clip_to_document(clip, topo)


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_distance_endpoint(client):
    rng = np.random.default_rng(0)
    body = {
        "reference": clip_payload(rng, "ref", 6),
        "target": clip_payload(rng, "tgt", 5),
    }
    resp = client.post("/distance", json=body)
    assert resp.status_code == 200
    out = resp.json()
    assert out["distance"] > 0.0
    assert out["iterations_used"] == 20
    assert out["marginal_error"] >= 0.0


def test_align_endpoint_returns_plan(client):
    rng = np.random.default_rng(1)
    body = {
        "reference": clip_payload(rng, "ref", 6),
        "target": clip_payload(rng, "tgt", 5),
    }
    resp = client.post("/align", json=body)
    assert resp.status_code == 200
    out = resp.json()
    plan = np.array(out["plan"])
    assert plan.shape == (6, 5)
    assert np.all(plan >= 0.0)
    assert abs(plan.sum() - 1.0) < 1e-6


def test_project_endpoint(client):
    resp = client.post("/project", json={"plan": [[0.7, 0.3], [0.2, 0.8]]})
    assert resp.status_code == 200
    out = resp.json()
    assert out["pairs"] == [[0, 0], [1, 1]]
    assert out["score"] == pytest.approx(1.5)
    assert (out["n_sources"], out["n_targets"]) == (2, 2)


def test_generate_endpoint(client):
    rng = np.random.default_rng(2)
    body = {
        "references": [clip_payload(rng, "r0", 6), clip_payload(rng, "r1", 7)],
        "target": clip_payload(rng, "tgt", 5),
        "config": {
            "q_nearest": 2,
            "samples_per_clip": 2,
            "tau_schedule": [0.3, 0.7],
            "optimizer": {"max_steps": 20},
        },
    }
    resp = client.post("/generate", json=body)
    assert resp.status_code == 200
    out = resp.json()
    assert len(out["clips"]) == 4
    assert len(out["provenance"]) == 4
    for clip in out["clips"]:
        assert len(clip["frames"]) == 5


def test_check_endpoint_rest_pose(client):
    rng = np.random.default_rng(3)
    resp = client.post("/check", json={"clip": clip_payload(rng, "c", 3)})
    assert resp.status_code == 200
    out = resp.json()
    assert len(out["frames"]) == 3


def test_check_endpoint_flags_collisions(client):
    topo = humanoid_topology()
    pose = crossed_arms_pose(0.3, 0.35, 0.08)
    clip = MotionClip("collide", 30.0, [pose], topo.fingerprint())
    body = {"clip": clip_to_document(clip, topo), "rho": 0.25}
    resp = client.post("/check", json=body)
    out = resp.json()
    assert out["all_below_threshold"] is False
    assert out["max_total"] > 0.0


def test_optimize_endpoint(client):
    topo = humanoid_topology()
    pose = crossed_arms_pose(0.3, 0.35, 0.08)
    clip = MotionClip("collide", 30.0, [pose], topo.fingerprint())
    body = {"clip": clip_to_document(clip, topo), "rho": 0.25}
    resp = client.post("/optimize", json=body)
    assert resp.status_code == 200
    out = resp.json()
    assert out["flagged_frames"] == 0
    assert out["traces"][0]["final_energy"] < 1e-6
    assert out["traces"][0]["initial_energy"] > 0.0


def test_validation_error_is_422(client):
    rng = np.random.default_rng(4)
    body = {
        "reference": clip_payload(rng, "ref", 4),
        "target": clip_payload(rng, "tgt", 4),
    }
    body["target"]["parents"] = body["target"]["parents"][:-1]
    resp = client.post("/distance", json=body)
    assert resp.status_code == 422
