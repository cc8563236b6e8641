"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they
complete.
"""

import itertools
import json
import math
import time

import numpy as np

from motionbridge import quat
from motionbridge.alignment import (
    OpwParams,
    TransportPlan,
    cost_matrix,
    gaussian_prior,
    idm_matrix,
    opw_align,
    sinkhorn_plan,
)
from motionbridge.assignment import soft_to_hard
from motionbridge.cli import main as cli_main
from motionbridge.collision import build_exclusion_masks, segment_distance, total_energy
from motionbridge.motion_io import read_bvh_subset, read_clip, write_clip
from motionbridge.optimizer import OptimizerConfig, energy_gradient, optimize_pose
from motionbridge.pose import MotionClip, interpolate_pose

from conftest import (
    crossed_arms_pose,
    humanoid_topology,
    monotone_clip,
    random_pose,
    smooth_random_clip,
)

from pathlib import Path

DATA = Path(__file__).parent / "data"
SQ2 = np.sqrt(2.0) / 2.0


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance {num}] {name}: {status} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


# -------------------------------------------------------------------------
# 1. Segment-distance oracle suite


def grid_oracle(p1, q1, p2, q2, k=1001):
    s = np.linspace(0.0, 1.0, k)
    x = p1[None, :] + s[:, None] * (q1 - p1)[None, :]
    y = p2[None, :] + s[:, None] * (q2 - p2)[None, :]
    d2 = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * (x @ y.T)
    return float(np.sqrt(np.maximum(d2, 0.0).min()))


ANALYTIC_SEGMENT_CASES = [
    # parallel offsets at varying separations
    (((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)), 1.0),
    (((0, 0, 0), (1, 0, 0), (0, 0.25, 0), (1, 0.25, 0)), 0.25),
    (((0, 0, 0), (2, 0, 0), (0.5, 0, 0.5), (1.5, 0, 0.5)), 0.5),
    (((0, 0, 0), (1, 0, 0), (0, 2, 0), (1, 2, 0)), 2.0),
    (((0, 0, 0), (3, 0, 0), (1, 1, 0), (2, 1, 0)), 1.0),
    (((0, 0, 0), (1, 0, 0), (3, 1, 0), (2, 1, 0)), np.sqrt(2.0)),
    # collinear configurations
    (((0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0)), 1.0),
    (((0, 0, 0), (1, 0, 0), (1.5, 0, 0), (4, 0, 0)), 0.5),
    (((0, 0, 0), (2, 0, 0), (1, 0, 0), (3, 0, 0)), 0.0),
    (((-1, 0, 0), (0, 0, 0), (0.75, 0, 0), (2, 0, 0)), 0.75),
    (((0, 0, 0), (1, 0, 0), (-3, 0, 0), (-2, 0, 0)), 2.0),
    # orthogonal skew configurations
    (((0, 0, 0), (1, 0, 0), (0.5, 1, -1), (0.5, 1, 1)), 1.0),
    (((0, 0, 0), (2, 0, 0), (1, -1, 0.5), (1, 1, 0.5)), 0.5),
    (((0, 0, 0), (1, 0, 0), (0.5, -2, 0.125), (0.5, 2, 0.125)), 0.125),
    (((-1, 0, 0), (1, 0, 0), (0, 0.75, -1), (0, 0.75, 1)), 0.75),
    (((0, 0, 0), (1, 0, 0), (2, -1, 0.5), (2, 1, 0.5)), np.sqrt(1.25)),
    # crossing and touching
    (((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0)), 0.0),
    (((0, 0, 0), (1, 1, 1), (1, 1, 1), (2, 0, 1)), 0.0),
    # degenerate points
    (((0, 0, 0), (0, 0, 0), (1, 1, 1), (1, 1, 1)), np.sqrt(3.0)),
    (((0, 0.5, 1), (0, 0.5, 1), (-1, 0, 0), (1, 0, 0)), np.sqrt(1.25)),
]


def test_acceptance_1_segment_distance_oracle():
    t0 = time.monotonic()
    assert len(ANALYTIC_SEGMENT_CASES) == 20
    worst_analytic = 0.0
    for segments, expected in ANALYTIC_SEGMENT_CASES:
        got = segment_distance(*segments).distance
        worst_analytic = max(worst_analytic, abs(got - expected))
    rng = np.random.default_rng(2718)
    worst_grid = 0.0
    for _ in range(1000):
        p1, q1, p2, q2 = rng.uniform(-1.0, 1.0, size=(4, 3))
        got = segment_distance(p1, q1, p2, q2).distance
        worst_grid = max(worst_grid, abs(got - grid_oracle(p1, q1, p2, q2)))
    elapsed = time.monotonic() - t0
    ok = worst_analytic < 1e-9 and worst_grid < 5e-3 and elapsed < 30.0
    report(1, "segment-distance oracle suite", ok,
           f"(analytic err {worst_analytic:.1e}, grid err {worst_grid:.1e}, "
           f"{elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 2. Hungarian oracle suite


def exhaustive_best_score(matrix):
    n, m = matrix.shape
    best = -math.inf
    if n >= m:
        for perm in itertools.permutations(range(n), m):
            best = max(best, math.fsum(matrix[perm[j], j] for j in range(m)))
    else:
        reps = math.ceil(m / n)
        tiled = np.tile(matrix, (reps, 1))[:m, :]
        for perm in itertools.permutations(range(m)):
            best = max(best, math.fsum(tiled[perm[j], j] for j in range(m)))
    return best


def test_acceptance_2_hungarian_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(31337)
    checked = {"case1": 0, "case2": 0}
    exact = True
    for _ in range(220):
        n = int(rng.integers(1, 8))
        m = int(rng.integers(1, 8))
        matrix = rng.uniform(size=(n, m))
        gamma = soft_to_hard(TransportPlan.uniform(matrix))
        got = math.fsum(matrix[s, t] for s, t in gamma.pairs)
        if got != exhaustive_best_score(matrix):
            exact = False
            break
        checked["case1" if n >= m else "case2"] += 1
    elapsed = time.monotonic() - t0
    ok = exact and checked["case1"] > 0 and checked["case2"] > 0 and elapsed < 60.0
    report(2, "hungarian oracle suite", ok,
           f"({checked['case1']}+{checked['case2']} instances, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 3. Sinkhorn feasibility


def test_acceptance_3_sinkhorn_feasibility():
    rng = np.random.default_rng(777)
    converged_worst = 0.0
    paper_worst = 0.0
    p_paper = OpwParams()  # lambda1=50, lambda2=0.1, delta=1, 20 iterations
    convergent = OpwParams(lambda1=50.0, lambda2=4.0, delta=4.0,
                           max_iters=500, tolerance=1e-9)
    for _ in range(55):
        n = int(rng.integers(16, 65))
        m = int(rng.integers(16, 49))
        s = smooth_random_clip(rng, "s", n)
        t = smooth_random_clip(rng, "t", m)
        cost = cost_matrix(s, t)

        plan, _, _ = sinkhorn_plan(
            cost,
            idm_matrix(n, m, convergent),
            gaussian_prior(n, m, convergent),
            convergent.lambda2, convergent.max_iters, convergent.tolerance,
        )
        dev = max(np.abs(plan.sum(axis=1) - 1.0 / n).max(),
                  np.abs(plan.sum(axis=0) - 1.0 / m).max())
        converged_worst = max(converged_worst, dev)

        plan20, iters, _ = sinkhorn_plan(
            cost,
            idm_matrix(n, m, p_paper),
            gaussian_prior(n, m, p_paper),
            p_paper.lambda2, p_paper.max_iters, p_paper.tolerance,
        )
        assert iters == 20
        dev20 = max(np.abs(plan20.sum(axis=1) - 1.0 / n).max(),
                    np.abs(plan20.sum(axis=0) - 1.0 / m).max())
        paper_worst = max(paper_worst, dev20)
    ok = converged_worst < 1e-6 and paper_worst < 1e-2
    report(3, "sinkhorn feasibility", ok,
           f"(converged dev {converged_worst:.1e}, paper-mode dev "
           f"{paper_worst:.1e})")


# -------------------------------------------------------------------------
# 4. Order-preservation property


def test_acceptance_4_order_preservation():
    rng = np.random.default_rng(4242)
    band_ok = True
    wins = 0
    classical_gap_max = 0.0
    cls = OpwParams(lambda1=1e-12, lambda2=0.1, max_iters=500, tolerance=1e-9)
    for trial in range(10):
        n = int(rng.integers(18, 30))
        m = int(rng.integers(12, 24))
        axis = rng.normal(size=3)
        s = monotone_clip("s", n, speed=0.08 + 0.01 * trial, axis=axis)
        t = monotone_clip("t", m, speed=0.09, rot_step=0.07, axis=axis,
                          phase=0.4)
        res = opw_align(s, t)
        g = res.plan.matrix
        rows = (np.arange(1, n + 1) / n)[:, None]
        cols = (np.arange(1, m + 1) / m)[None, :]
        band = np.abs(rows - cols) < 0.15
        if g[band].sum() / g.sum() <= 0.70:
            band_ok = False

        perm = rng.permutation(m)
        shuffled = MotionClip("ts", t.fps, [t.frames[i] for i in perm], "")
        if res.distance < opw_align(s, shuffled).distance:
            wins += 1

        # classical entropic baseline is order-blind: its distance cannot
        # tell the shuffled copy apart
        d_o = cost_matrix(s, t)
        d_s = cost_matrix(s, shuffled)
        uniform = np.full((n, m), 1.0 / (n * m))
        h = idm_matrix(n, m, cls)
        p_o, _, _ = sinkhorn_plan(d_o, h, uniform, cls.lambda2, 500, 1e-9)
        p_s, _, _ = sinkhorn_plan(d_s, h, uniform, cls.lambda2, 500, 1e-9)
        classical_gap_max = max(
            classical_gap_max,
            abs(float((p_o * d_o).sum()) - float((p_s * d_s).sum())),
        )
    ok = band_ok and wins >= 9 and classical_gap_max < 1e-6
    report(4, "order preservation", ok,
           f"(band ok {band_ok}, ordered<shuffled {wins}/10, classical gap "
           f"{classical_gap_max:.1e})")


# -------------------------------------------------------------------------
# 5. Gradient check


def test_acceptance_5_gradient_check():
    t0 = time.monotonic()
    topo = humanoid_topology()
    masks = build_exclusion_masks(topo)
    rho = 0.25
    rng = np.random.default_rng(8675309)
    checked = 0
    all_close = True
    while checked < 100:
        pose = random_pose(rng, 12, root_scale=0.0, identity_fraction=0.3)
        if total_energy(pose, topo, masks, rho=rho).total <= 0.0:
            continue
        ga = energy_gradient(pose, topo, masks, rho=rho, mode="analytic")
        gf = energy_gradient(pose, topo, masks, rho=rho,
                             mode="finite_difference", fd_step=1e-6)
        if not np.allclose(ga, gf, rtol=1e-3, atol=1e-8):
            all_close = False
            break
        checked += 1
    elapsed = time.monotonic() - t0
    ok = all_close and checked == 100 and elapsed < 120.0
    report(5, "analytic vs finite-difference gradient", ok,
           f"({checked} colliding poses, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 6. Optimizer efficacy


def test_acceptance_6_optimizer_efficacy():
    topo = humanoid_topology()
    masks = build_exclusion_masks(topo)
    rho = 0.25
    cfg = OptimizerConfig()  # paper defaults: lr 0.05, 120 steps, stop 1e-6
    reached = 0
    reduced_all = True
    norms_ok = True
    for i in range(25):
        pose = crossed_arms_pose(
            alpha=0.25 + 0.02 * (i % 5),
            beta=0.30 + 0.02 * (i // 5),
            tilt=0.05 + 0.003 * i,
        )
        _, trace = optimize_pose(pose, topo, masks, cfg, rho=rho)
        assert trace.initial_energy > 0.0
        if trace.final_energy < 1e-6:
            reached += 1
        if trace.final_energy > 0.01 * trace.initial_energy:
            reduced_all = False
        if trace.max_norm_error > 1e-9:
            norms_ok = False
    ok = reached >= 20 and reduced_all and norms_ok
    report(6, "optimizer efficacy", ok,
           f"(reached<1e-6 in {reached}/25, all >=99% reduction "
           f"{reduced_all}, norms ok {norms_ok})")


# -------------------------------------------------------------------------
# 7. Geodesic sampling


def test_acceptance_7_geodesic_sampling():
    rng = np.random.default_rng(1618)
    worst = 0.0
    for _ in range(1000):
        q1 = quat.normalize(rng.normal(size=4))
        q2 = quat.normalize(rng.normal(size=4))
        tau = float(rng.uniform())
        full = quat.rotation_distance(q1, q2)
        part = quat.rotation_distance(q1, quat.slerp(q1, q2, tau))
        worst = max(worst, abs(part - tau * full))
    endpoints_exact = True
    for _ in range(50):
        s = random_pose(rng, 6)
        t = random_pose(rng, 6)
        at0 = interpolate_pose(s, t, 0.0)
        at1 = interpolate_pose(s, t, 1.0)
        if not (np.array_equal(at0.root_translation, s.root_translation)
                and np.array_equal(at0.rotations, s.rotations)
                and np.array_equal(at1.root_translation, t.root_translation)):
            endpoints_exact = False
            break
        for j in range(6):
            d = min(np.linalg.norm(at1.rotations[j] - t.rotations[j]),
                    np.linalg.norm(at1.rotations[j] + t.rotations[j]))
            if d > 1e-12:
                endpoints_exact = False
    ok = worst < 1e-6 and endpoints_exact
    report(7, "geodesic sampling proportionality", ok,
           f"(worst proportionality err {worst:.1e}, endpoints exact "
           f"{endpoints_exact})")


# -------------------------------------------------------------------------
# 8. Pipeline constants


def test_acceptance_8_pipeline_constants(tmp_path):
    t0 = time.monotonic()
    topo = humanoid_topology()
    fp = topo.fingerprint()
    rng = np.random.default_rng(6060)
    refs_dir = tmp_path / "refs"
    refs_dir.mkdir()
    for i in range(12):
        clip = smooth_random_clip(rng, f"walk{i:02d}",
                                  int(rng.integers(18, 30)),
                                  topology_ref=fp)
        write_clip(refs_dir / f"{clip.name}.json", clip, topo)
    target = smooth_random_clip(rng, "target", 20, topology_ref=fp)
    write_clip(tmp_path / "target.json", target, topo)

    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({
        "references_dir": "refs",
        "target_clip": "target.json",
        "output_dir": "out_a",
    }))
    cli_main(["generate", "--config", str(cfg_path)])

    cfg_path_b = tmp_path / "run_b.json"
    cfg_path_b.write_text(json.dumps({
        "references_dir": "refs",
        "target_clip": "target.json",
        "output_dir": "out_b",
    }))
    cli_main(["generate", "--config", str(cfg_path_b)])

    out_a = tmp_path / "out_a"
    out_b = tmp_path / "out_b"
    clips = sorted(p for p in out_a.iterdir() if p.name != "manifest.json")
    count_ok = len(clips) == 60

    manifest = json.loads((out_a / "manifest.json").read_text())
    flagged = {
        (c["clip_name"], rec["frame"])
        for c in manifest["clips"] for rec in c["frames"] if rec["flagged"]
    }
    masks = build_exclusion_masks(topo)
    lengths_ok = True
    energy_ok = True
    for path in clips:
        clip, _ = read_clip(path)
        if len(clip.frames) != 20:
            lengths_ok = False
        for m, frame in enumerate(clip.frames):
            if (clip.name, m) in flagged:
                continue
            if total_energy(frame, topo, masks, rho=0.04).total >= 1e-6:
                energy_ok = False

    bytes_a = {p.name: p.read_bytes() for p in out_a.iterdir()}
    bytes_b = {p.name: p.read_bytes() for p in out_b.iterdir()}
    identical = bytes_a == bytes_b
    elapsed = time.monotonic() - t0
    ok = count_ok and lengths_ok and energy_ok and identical and elapsed < 600.0
    report(8, "pipeline constants", ok,
           f"({len(clips)} clips, lengths ok {lengths_ok}, energies ok "
           f"{energy_ok}, byte-identical {identical}, {elapsed:.1f}s)")


# -------------------------------------------------------------------------
# 9. I/O round-trips


def test_acceptance_9_io_roundtrips(tmp_path):
    rng = np.random.default_rng(909)
    topo = humanoid_topology()
    clip = smooth_random_clip(rng, "walk", 6, topology_ref=topo.fingerprint())
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    write_clip(p1, clip, topo)
    clip2, topo2 = read_clip(p1)
    write_clip(p2, clip2, topo2)
    fixed_point = p1.read_bytes() == p2.read_bytes()

    golden_ok = True
    minimal, _ = read_bvh_subset(DATA / "golden_minimal.bvh")
    for frame in minimal.frames:
        if not np.allclose(frame.rotations, [[1, 0, 0, 0], [1, 0, 0, 0]],
                           atol=1e-15):
            golden_ok = False
    zxy, _ = read_bvh_subset(DATA / "golden_zxy.bvh")
    expected = [
        [SQ2, 0.0, 0.0, SQ2],
        [SQ2, SQ2, 0.0, 0.0],
        [SQ2, 0.0, SQ2, 0.0],
        [0.5, 0.5, 0.5, 0.5],
    ]
    for frame, e in zip(zxy.frames, expected):
        if not np.allclose(frame.rotations[0], e, atol=1e-12):
            golden_ok = False
    mixed, _ = read_bvh_subset(DATA / "golden_mixed.bvh")
    c225, s225 = np.cos(np.pi / 8), np.sin(np.pi / 8)
    checks = [
        (mixed.frames[0].rotations[1], [c225, s225, 0.0, 0.0]),
        (mixed.frames[0].rotations[2], [SQ2, SQ2, 0.0, 0.0]),
        (mixed.frames[1].rotations[0], [0.5, 0.5, 0.5, 0.5]),
        (mixed.frames[1].rotations[2], [SQ2, 0.0, 0.0, SQ2]),
    ]
    for got, expected_q in checks:
        if not np.allclose(got, expected_q, atol=1e-12):
            golden_ok = False

    ok = fixed_point and golden_ok
    report(9, "I/O round-trips", ok,
           f"(fixed point {fixed_point}, BVH goldens {golden_ok})")
