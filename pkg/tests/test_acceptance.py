"""Acceptance gate: one test per headline guarantee, each printing a
single PASS/FAIL line (run with -s or -rP to see them)."""

import os
import time

import numpy as np
import yaml

from clickseg import cli, synth
from clickseg.clicksim import bd_point, dbscan_labels, error_regions, select_region
from clickseg.evaluation import (
    EvalConfig,
    noc_accounting_4d,
    panoptic_quality,
    run_protocol,
)
from clickseg.loss import LossConfig, local_weights, total_loss
from clickseg.segment import BaselineSegmenter, NullSegmenter, OracleSegmenter
from clickseg.tracking import WindowPrediction, associate, stitch
from clickseg.spacetime import Window
from clickseg.types import ClassDef, Click

from test_clicksim import canonical, reference_dbscan
from test_evaluation import brute_force_pq
from test_tracking import optimal_matching


def report(name, ok):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, name


def test_oracle_pipeline_perfect_scores():
    """Oracle segmenter: IoU@1 = 1.000 and NoC@0.90 = 1.00 on >= 10
    random synthetic sequences, in under 10 seconds."""
    t0 = time.monotonic()
    ok = True
    for scene in range(10):
        spec = synth.random_scene_spec(scene, n_objects=4, n_scans=2)
        seq = synth.generate_synthetic(spec, scene)
        cfg = EvalConfig(ks=(1,), budget=10, mode="multi", seed=scene)
        rep = run_protocol(seq, OracleSegmenter(), cfg)
        ok &= abs(rep.iou_at_k[1] - 1.0) < 1e-12
        ok &= abs(rep.noc_at_q[0.90] - 1.0) < 1e-12
    elapsed = time.monotonic() - t0
    report("oracle-pipeline-perfect", ok and elapsed < 10.0)


def test_null_segmenter_exhausts_budget():
    """Null segmenter: NoC equals the full budget at every threshold."""
    spec = synth.random_scene_spec(1, n_objects=3, n_scans=2)
    seq = synth.generate_synthetic(spec, 1)
    cfg = EvalConfig(ks=(1,), budget=10, mode="multi", seed=1)
    rep = run_protocol(seq, NullSegmenter(), cfg)
    ok = all(abs(rep.noc_at_q[q] - 10.0) < 1e-12 for q in cfg.thresholds)
    report("null-noc-equals-budget", ok)


def test_boundary_distance_click_exact():
    """bd click matches exhaustive search on 200 random regions."""
    rng = np.random.default_rng(0)
    ok = True
    for _ in range(200):
        n = int(rng.integers(10, 500))
        xyz = rng.normal(size=(n, 3)) * rng.uniform(0.5, 5.0)
        m = int(rng.integers(1, n))
        members = np.sort(rng.choice(n, size=m, replace=False))
        comp = np.setdiff1d(np.arange(n), members)
        if len(comp) == 0:
            continue
        diffs = xyz[members][:, None, :] - xyz[comp][None, :, :]
        d2 = (diffs ** 2).sum(-1).min(axis=1)
        expected = members[int(np.argmax(d2))]
        ok &= bd_point(members, xyz) == expected
    report("bd-click-exact", ok)


def test_scale_invariant_region_selection():
    """The scale-invariant score picks the same region under x2/x5/x10
    replication on 100 instances, while max_size is biased to large
    objects."""
    rng = np.random.default_rng(3)
    ok = True
    for _ in range(100):
        gt = rng.integers(1, 5, size=80)
        pred = rng.integers(1, 5, size=80)
        if (gt == pred).all():
            continue
        base = select_region(error_regions(gt, pred), gt, pred, "si")
        for mult in (2, 5, 10):
            gtm, predm = np.repeat(gt, mult), np.repeat(pred, mult)
            rep = select_region(error_regions(gtm, predm), gtm, predm, "si")
            ok &= (rep.gt_id, rep.pred_id) == (base.gt_id, base.pred_id)
    # bias demonstration: tiny object at IoU 0 vs huge object at IoU 0.99
    gt = np.array([1] * 10000 + [2] * 10)
    pred = np.concatenate([[2] * 100, [1] * 9900, [1] * 10])
    regions = error_regions(gt, pred)
    si = select_region(regions, gt, pred, "si")
    ms = select_region(regions, gt, pred, "max_size")
    ok &= si.gt_id == 2 and ms.gt_id == 1
    report("scale-invariant-selection", ok)


def test_tracklet_click_accounting():
    """One click fixing a whole 4-scan tracklet yields per-scan NoC
    (1, 0, 0, 0)."""
    events = [{"t": 1, "kind": "click"}] + [
        {"t": 1, "kind": "threshold", "scan": s} for s in range(4)
    ]
    noc = noc_accounting_4d(events, [0, 1, 2, 3], budget=10)
    report("tracklet-noc-1000", noc == {0: 1, 1: 0, 2: 0, 3: 0})


def test_per_scan_reduction_is_byte_identical(tmp_path):
    """The per-scan protocol is exactly the windowed protocol at window
    length 1: identical report and trace files, byte for byte."""
    spec = dict(synth.random_scene_spec(9, n_objects=3, n_scans=3))
    outs = {}
    for name, mode, tau in (("multi", "multi", 1), ("fourd", "fourD", 1)):
        out = tmp_path / name
        doc = {"synthetic": spec, "scenes": 2, "mode": mode, "tau": tau,
               "seed": 5, "out": str(out), "eval": {"ks": [1, 2], "budget": 3}}
        cfg = tmp_path / f"{name}.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        assert cli.main(["simulate", "--config", str(cfg)]) == 0
        outs[name] = {
            f: open(os.path.join(str(out), f), "rb").read()
            for f in ("report.csv", "report.json", "trace.jsonl")
        }
    report("tau1-reduction-byte-identical", outs["multi"] == outs["fourd"])


def test_localized_loss_properties():
    """Loss invariants: weight boundary and midpoint values exact,
    near-zero total loss at certainty, strictly decreasing along a
    uniform-to-one-hot interpolation."""
    cfg = LossConfig()
    c = Click(position=(0.0, 0.0, 0.0), scan_index=0, object_id=1, order_k=0)

    def weight_at(x):
        return local_weights(np.array([[x, 0.0, 0.0]]), [c], cfg)[0]

    ok = weight_at(0.0) == cfg.w_max
    ok &= weight_at(cfg.delta) == cfg.w_min
    ok &= weight_at(cfg.delta / 2) == (cfg.w_max + cfg.w_min) / 2
    ok &= weight_at(10 * cfg.delta) == cfg.w_min

    gt = np.array([1, 1, 2, 2])
    w = np.ones(4)
    perfect = np.where(gt[:, None] == np.array([1, 2]), 1.0, 0.0)
    ok &= total_loss(perfect, gt, w, [1, 2], cfg) <= 1e-5

    uniform = np.full((4, 2), 0.5)
    losses = []
    for step in range(11):
        alpha = step / 10
        probs = (1 - alpha) * uniform + alpha * perfect
        losses.append(total_loss(probs, gt, w, [1, 2], cfg))
    ok &= all(a > b for a, b in zip(losses, losses[1:]))
    report("localized-loss-properties", ok)


def test_temporal_context_helps_baseline():
    """IoU@1 with the distance baseline is non-decreasing in the window
    length over tau in {1, 2, 4}."""
    spec = synth.random_scene_spec(13, n_objects=5, n_scans=4)
    seq = synth.generate_synthetic(spec, 13)
    scores = []
    for tau in (1, 2, 4):
        cfg = EvalConfig(ks=(1,), budget=10, mode="fourD", tau=tau, seed=13)
        rep = run_protocol(seq, BaselineSegmenter(), cfg)
        scores.append(rep.iou_at_k[1])
    ok = all(a <= b + 1e-9 for a, b in zip(scores, scores[1:]))
    report("temporal-context-monotone", ok)


def test_association_matches_optimal_matching():
    """Greedy overlap association equals exhaustive optimal matching on
    100 random scenes, and stitching keeps one id per tracklet."""
    ok = True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = 50
        lv = rng.integers(0, 6, size=n)
        rv = rng.permutation(6)[lv]
        flips = rng.random(n) < 0.2
        rv[flips] = rng.integers(0, 6, size=flips.sum())
        left = WindowPrediction(
            window=Window(start=0, length=1, overlap_scan=0),
            labels_per_scan={0: lv})
        right = WindowPrediction(
            window=Window(start=0, length=1, overlap_scan=None),
            labels_per_scan={0: rv})
        got = sorted(associate(left, right, 0).pairs)
        ok &= got == optimal_matching(lv, rv)
    left = WindowPrediction(
        window=Window(start=0, length=3, overlap_scan=2),
        labels_per_scan={t: np.array([1, 1, 0]) for t in range(3)})
    right = WindowPrediction(
        window=Window(start=2, length=3, overlap_scan=None),
        labels_per_scan={t: np.array([6, 6, 0]) for t in range(2, 5)})
    out = stitch([left, right])
    ids = {int(i) for t in range(5) for i in np.unique(out[t]) if i != 0}
    ok &= len(ids) == 1
    report("association-optimal", ok)


def test_density_clustering_matches_reference():
    """The density-clustering click strategy reproduces a naive
    reference implementation on 100 random instances."""
    ok = True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 5))
        centers = rng.uniform(-6, 6, size=(k, 3))
        xyz = np.vstack(
            [c + rng.normal(0, 0.3, size=(int(rng.integers(4, 30)), 3)) for c in centers]
        )
        got = dbscan_labels(xyz, eps=0.8, min_pts=4)
        want = reference_dbscan(xyz, eps=0.8, min_pts=4)
        ok &= canonical(got) == canonical(want)
    report("density-clustering-reference", ok)


def test_simulation_reproducible_across_workers(tmp_path):
    """Simulation outputs are byte-identical for 1, 2 and 4 workers."""
    spec = dict(synth.random_scene_spec(17, n_objects=3, n_scans=3))
    blobs = []
    for workers in (1, 2, 4):
        out = tmp_path / f"w{workers}"
        doc = {"synthetic": spec, "scenes": 4, "mode": "multi", "seed": 2,
               "workers": workers, "out": str(out),
               "eval": {"ks": [1, 2], "budget": 3}}
        cfg = tmp_path / f"w{workers}.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        assert cli.main(["simulate", "--config", str(cfg)]) == 0
        blobs.append({
            f: open(os.path.join(str(out), f), "rb").read()
            for f in ("report.csv", "report.json", "trace.jsonl")
        })
    report("worker-determinism", blobs[0] == blobs[1] == blobs[2])


def test_panoptic_quality_matches_bruteforce():
    """PQ/SQ/RQ agree with an exhaustive matcher on 50 random scenes."""
    cm = {10: ClassDef("car", True), 11: ClassDef("person", True),
          40: ClassDef("road", False)}
    ok = True
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = 100
        gt_sem = rng.choice([0, 10, 11, 40], size=n)
        gt_inst = np.where(np.isin(gt_sem, [10, 11]), rng.integers(1, 4, size=n), 0)
        pr_sem = rng.choice([0, 10, 11, 40], size=n)
        pr_inst = np.where(np.isin(pr_sem, [10, 11]), rng.integers(1, 4, size=n), 0)
        got = panoptic_quality(gt_sem, gt_inst, pr_sem, pr_inst, cm)
        want = brute_force_pq(gt_sem, gt_inst, pr_sem, pr_inst, cm)
        for sid in want:
            g = got["per_class"][sid]
            ok &= (g["TP"], g["FP"], g["FN"]) == (
                want[sid]["TP"], want[sid]["FP"], want[sid]["FN"])
            ok &= abs(g["PQ"] - want[sid]["PQ"]) < 1e-12
    report("panoptic-bruteforce", ok)
