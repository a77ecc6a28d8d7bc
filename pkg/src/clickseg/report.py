"""Deterministic report serialization: CSV table, JSON summary and the
replayable click-trace log (one JSON record per line)."""

from __future__ import annotations

import csv
import io
import json

from .evaluation import EvalConfig, MetricsReport


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def report_csv(report: MetricsReport, cfg: EvalConfig) -> str:
    """One row per (scene, scan, object, k) with the per-threshold NoC
    columns repeated."""
    buf = io.StringIO()
    qs = sorted(cfg.thresholds)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["scene", "window", "scan", "object", "class", "k", "iou"]
        + [f"noc@{q:g}" for q in qs]
    )
    for row in report.rows:
        for k in sorted(row["iou_at_k"]):
            writer.writerow(
                [
                    row.get("scene", 0),
                    row["window"],
                    row["scan"],
                    row["object"],
                    row["class"],
                    k,
                    _fmt(row["iou_at_k"][k]),
                ]
                + [_fmt(row["noc_at_q"][q]) for q in qs]
            )
    return buf.getvalue()


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.summary(), indent=2, sort_keys=True) + "\n"


def trace_jsonl(report: MetricsReport) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in report.trace)


def read_trace(path: str) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def merge_reports(reports: list[tuple[int, MetricsReport]], cfg: EvalConfig) -> MetricsReport:
    """Combine per-scene reports (sorted by scene key) into one, tagging
    rows and trace records with their scene."""
    import numpy as np

    rows, trace = [], []
    for scene, rep in sorted(reports, key=lambda x: x[0]):
        for row in rep.rows:
            row = dict(row)
            row["scene"] = scene
            rows.append(row)
        for rec in rep.trace:
            rec = dict(rec)
            rec["scene"] = scene
            trace.append(rec)
    iou_at_k = {k: float(np.mean([r["iou_at_k"][k] for r in rows])) for k in cfg.ks}
    noc_at_q = {q: float(np.mean([r["noc_at_q"][q] for r in rows])) for q in cfg.thresholds}
    per_class: dict[int, dict[int, float]] = {}
    for cls in sorted({r["class"] for r in rows}):
        cls_rows = [r for r in rows if r["class"] == cls]
        per_class[cls] = {
            k: float(np.mean([r["iou_at_k"][k] for r in cls_rows])) for k in cfg.ks
        }
    miou = {
        k: float(np.mean([per_class[c][k] for c in per_class])) if per_class else 0.0
        for k in cfg.ks
    }
    return MetricsReport(
        rows=rows,
        iou_at_k=iou_at_k,
        noc_at_q=noc_at_q,
        miou_at_k=miou,
        per_class_iou_at_k=per_class,
        trace=trace,
    )
