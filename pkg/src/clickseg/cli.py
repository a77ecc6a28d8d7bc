"""Command-line orchestration: synthetic data generation, protocol
simulation, offline metrics, stitching, replay, label propagation and
the annotation server."""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np
import yaml

from . import ingest, report as report_mod, spacetime, synth, tracking
from .config import RunConfig, load_config, make_segmenter
from .errors import ClicksegError, ConfigError, InputError
from .evaluation import ObjectTable, panoptic_quality, run_protocol
from .types import Click, Sequence


def _load_spec(run_cfg: RunConfig) -> dict:
    spec = dict(run_cfg.synthetic or {})
    spec.pop("scenes", None)
    if "spec" in spec:
        with open(spec["spec"]) as fh:
            spec = yaml.safe_load(fh)
    return spec


def _scene_count(run_cfg: RunConfig) -> int:
    if run_cfg.dataset is not None:
        return 1
    return int((run_cfg.synthetic or {}).get("scenes", run_cfg.scenes))


def _build_scene(run_cfg: RunConfig, scene: int) -> Sequence:
    if run_cfg.dataset is not None:
        return ingest.load_sequence(run_cfg.dataset)
    spec = _load_spec(run_cfg)
    return synth.generate_synthetic(spec, run_cfg.seed + scene)


def _simulate_scene(args):
    run_cfg, scene, scripted = args
    sequence = _build_scene(run_cfg, scene)
    cfg = run_cfg.eval
    cfg.seed = run_cfg.seed + scene
    segmenter = make_segmenter(run_cfg)
    try:
        want_preds = run_cfg.mode == "fourD" and scripted is None
        out = run_protocol(
            sequence, segmenter, cfg, scripted=scripted, return_predictions=want_preds
        )
    finally:
        segmenter.close()
    if run_cfg.mode == "fourD" and scripted is None:
        rep, preds = out
        table = ObjectTable(sequence)
        meta = {
            "stuff_ids": sorted(
                oid for oid, (sid, inst) in table.meta.items() if inst == 0
            ),
            "semantic_of": {str(oid): sem for oid, (sem, _) in table.meta.items()},
            "n_scans": len(sequence),
        }
        pred_blobs = [
            (w.start, w.length, w.overlap_scan, labels) for w, labels in preds
        ]
        return scene, rep, (meta, pred_blobs)
    return scene, out, None


def cmd_simulate(run_cfg: RunConfig, trace_path: str | None = None) -> int:
    os.makedirs(run_cfg.out, exist_ok=True)
    scripted_by_scene = None
    if trace_path is not None:
        scripted_by_scene = _group_trace(report_mod.read_trace(trace_path))
    jobs = [
        (run_cfg, scene, scripted_by_scene.get(scene, {}) if scripted_by_scene is not None else None)
        for scene in range(_scene_count(run_cfg))
    ]
    if run_cfg.workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(run_cfg.workers) as pool:
            results = list(pool.map(_simulate_scene, jobs))
    else:
        results = [_simulate_scene(job) for job in jobs]
    results.sort(key=lambda r: r[0])
    merged = report_mod.merge_reports([(s, rep) for s, rep, _ in results], run_cfg.eval)
    with open(os.path.join(run_cfg.out, "report.csv"), "w") as fh:
        fh.write(report_mod.report_csv(merged, run_cfg.eval))
    with open(os.path.join(run_cfg.out, "report.json"), "w") as fh:
        fh.write(report_mod.report_json(merged))
    with open(os.path.join(run_cfg.out, "trace.jsonl"), "w") as fh:
        fh.write(report_mod.trace_jsonl(merged))
    for scene, _, preds in results:
        if preds is None:
            continue
        meta, blobs = preds
        scene_dir = os.path.join(run_cfg.out, "windows", f"scene_{scene:04d}")
        os.makedirs(scene_dir, exist_ok=True)
        with open(os.path.join(scene_dir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        for start, length, overlap, labels in blobs:
            np.savez(
                os.path.join(scene_dir, f"window_{start:06d}.npz"),
                start=start,
                length=length,
                overlap=-1 if overlap is None else overlap,
                **{f"scan_{t}": arr for t, arr in labels.items()},
            )
    print(f"wrote report for {len(merged.rows)} objects under {run_cfg.out}")
    return 0


def _group_trace(records: list[dict]) -> dict[int, dict[int, list[Click]]]:
    out: dict[int, dict[int, list[Click]]] = {}
    for rec in records:
        scene = int(rec.get("scene", 0))
        window = int(rec["window"])
        out.setdefault(scene, {}).setdefault(window, []).append(Click.from_dict(rec["click"]))
    return out


def load_window_predictions(scene_dir: str):
    meta_path = os.path.join(scene_dir, "meta.json")
    if not os.path.exists(meta_path):
        raise InputError(f"{scene_dir}: missing meta.json (run simulate in fourD mode)")
    with open(meta_path) as fh:
        meta = json.load(fh)
    preds = []
    for name in sorted(os.listdir(scene_dir)):
        if not name.startswith("window_"):
            continue
        data = np.load(os.path.join(scene_dir, name))
        start = int(data["start"])
        length = int(data["length"])
        overlap = int(data["overlap"])
        window = spacetime.Window(
            start=start, length=length, overlap_scan=None if overlap < 0 else overlap
        )
        labels = {t: data[f"scan_{t}"] for t in window.scan_range}
        preds.append(tracking.WindowPrediction(window=window, labels_per_scan=labels))
    if not preds:
        raise InputError(f"{scene_dir}: no window predictions found")
    return meta, preds


def cmd_stitch(windows_dir: str, out_dir: str, threshold: float = 0.5) -> int:
    scene_dirs = sorted(
        d for d in os.listdir(windows_dir) if d.startswith("scene_")
    ) or ["."]
    for scene_name in scene_dirs:
        scene_dir = os.path.join(windows_dir, scene_name)
        meta, preds = load_window_predictions(scene_dir)
        stitched = tracking.stitch(
            preds, threshold=threshold, stuff_ids=set(meta["stuff_ids"])
        )
        semantic_of = {int(k): v for k, v in meta["semantic_of"].items()}
        label_dir = os.path.join(out_dir, scene_name, "labels")
        os.makedirs(label_dir, exist_ok=True)
        for t, ids in sorted(stitched.items()):
            semantic = np.array([semantic_of.get(int(i), 0) for i in ids], dtype=np.int64)
            ingest.write_labels(
                os.path.join(label_dir, f"{t:06d}.label"), semantic, ids
            )
    print(f"stitched labels written under {out_dir}")
    return 0


def cmd_eval(dataset: str, pred_dir: str, out_path: str) -> int:
    sequence = ingest.load_sequence(dataset)
    per_scan = []
    for scan in sequence.scans:
        if not scan.has_labels:
            raise InputError(f"scan {scan.scan_index} has no ground-truth labels")
        label_path = os.path.join(pred_dir, f"{scan.scan_index:06d}.label")
        sem, inst = ingest.read_labels(label_path, scan.n_points)
        pq = panoptic_quality(scan.semantic, scan.instance, sem, inst, sequence.class_map)
        per_scan.append(
            {"scan": scan.scan_index, "PQ": pq["PQ"], "SQ": pq["SQ"], "RQ": pq["RQ"]}
        )
    summary = {
        "per_scan": per_scan,
        "mean": {
            m: float(np.mean([r[m] for r in per_scan])) for m in ("PQ", "SQ", "RQ")
        },
    }
    with open(out_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary["mean"]))
    return 0


def cmd_synth(spec_path: str, seed: int, out_dir: str) -> int:
    with open(spec_path) as fh:
        spec = yaml.safe_load(fh)
    sequence = synth.generate_synthetic(spec, seed)
    write_sequence(out_dir, sequence)
    print(f"wrote {len(sequence)} scans to {out_dir}")
    return 0


def write_sequence(out_dir: str, sequence: Sequence) -> None:
    velo = os.path.join(out_dir, "velodyne")
    labels = os.path.join(out_dir, "labels")
    os.makedirs(velo, exist_ok=True)
    os.makedirs(labels, exist_ok=True)
    pose_lines = []
    for scan in sequence.scans:
        ingest.write_scan(os.path.join(velo, f"{scan.scan_index:06d}.bin"), scan)
        if scan.has_labels:
            ingest.write_labels(
                os.path.join(labels, f"{scan.scan_index:06d}.label"),
                scan.semantic,
                scan.instance,
            )
        m = np.hstack([scan.pose.rotation, scan.pose.translation[:, None]])
        pose_lines.append(" ".join(repr(float(v)) for v in m.reshape(-1)))
    with open(os.path.join(out_dir, "poses.txt"), "w") as fh:
        fh.write("\n".join(pose_lines) + "\n")
    with open(os.path.join(out_dir, "calib.txt"), "w") as fh:
        fh.write("Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n")


def cmd_propagate(source_bin: str, source_label: str, target_bin: str, out_path: str) -> int:
    source = ingest.read_scan(source_bin, 0)
    sem, inst = ingest.read_labels(source_label, source.n_points)
    target = ingest.read_scan(target_bin, 0)
    out_sem, out_inst = ingest.propagate_labels_1nn(source.xyz, sem, inst, target.xyz)
    ingest.write_labels(out_path, out_sem, out_inst)
    print(f"propagated labels for {target.n_points} points to {out_path}")
    return 0


def cmd_serve(run_cfg: RunConfig, host: str, port: int) -> int:
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(run_cfg), host=host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clickseg", description="Interactive LiDAR segmentation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--dataset", help="dataset sequence root")
        p.add_argument("--out", help="output directory")
        p.add_argument("--mode", choices=("single", "multi", "fourD"))
        p.add_argument("--tau", type=int)
        p.add_argument("--voxel-size", type=float, dest="voxel_size")
        p.add_argument("--segmenter")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--scenes", type=int)

    p = sub.add_parser("synth", help="generate a synthetic labeled sequence")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="run the interactive protocol")
    add_config_args(p)

    p = sub.add_parser("eval", help="score existing prediction label files")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", default="eval.json")

    p = sub.add_parser("stitch", help="stitch window predictions into global ids")
    p.add_argument("--windows", required=True, help="windows dir from simulate")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("replay", help="re-score a click trace")
    p.add_argument("--trace", required=True)
    add_config_args(p)

    p = sub.add_parser("propagate", help="1-NN label transfer between scans")
    p.add_argument("--source-bin", required=True)
    p.add_argument("--source-label", required=True)
    p.add_argument("--target-bin", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the annotation session server")
    add_config_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)

    return parser


def _run_config_from_args(args) -> RunConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in ("dataset", "out", "mode", "tau", "voxel_size", "segmenter",
                    "seed", "workers", "scenes")
    }
    return load_config(getattr(args, "config", None), overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args.spec, args.seed, args.out)
        if args.command == "simulate":
            return cmd_simulate(_run_config_from_args(args))
        if args.command == "replay":
            return cmd_simulate(_run_config_from_args(args), trace_path=args.trace)
        if args.command == "eval":
            return cmd_eval(args.dataset, args.pred, args.out)
        if args.command == "stitch":
            return cmd_stitch(args.windows, args.out, args.threshold)
        if args.command == "propagate":
            return cmd_propagate(args.source_bin, args.source_label, args.target_bin, args.out)
        if args.command == "serve":
            return cmd_serve(_run_config_from_args(args), args.host, args.port)
        raise ConfigError(f"unknown command {args.command}")
    except ClicksegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
