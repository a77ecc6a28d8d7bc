"""Sequence-consistent instance ids: associate predictions of
consecutive temporal windows on their shared scan and stitch window
segmentations into one global id space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .evaluation import iou
from .spacetime import Window


@dataclass
class WindowPrediction:
    """Per-scan object-id arrays (local point order) for one window."""

    window: Window
    labels_per_scan: dict[int, np.ndarray]

    def __post_init__(self):
        for t in self.window.scan_range:
            if t not in self.labels_per_scan:
                raise InputError(f"window {self.window.start}: missing scan {t}")


@dataclass
class IdMapping:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_left: list[int] = field(default_factory=list)
    unmatched_right: list[int] = field(default_factory=list)


def associate(
    left: WindowPrediction,
    right: WindowPrediction,
    overlap_scan: int,
    threshold: float = 0.5,
    stuff_ids: set[int] | None = None,
) -> IdMapping:
    """One-to-one id matching over the shared scan: greedy by descending
    IoU, accepting only IoU >= threshold. At threshold 0.5 the matching
    is unique regardless of greedy order. Stuff ids match by identity."""
    if overlap_scan not in left.labels_per_scan or overlap_scan not in right.labels_per_scan:
        raise InputError(f"overlap scan {overlap_scan} absent from a window")
    lv = np.asarray(left.labels_per_scan[overlap_scan])
    rv = np.asarray(right.labels_per_scan[overlap_scan])
    if len(lv) != len(rv):
        raise InputError("overlap scan point counts differ between windows")
    stuff_ids = stuff_ids or set()
    lids = [int(i) for i in np.unique(lv) if i != 0 and i not in stuff_ids]
    rids = [int(i) for i in np.unique(rv) if i != 0 and i not in stuff_ids]
    candidates = []
    for li in lids:
        lmask = lv == li
        for ri in rids:
            v = iou(rv == ri, lmask)
            if v >= threshold:
                candidates.append((v, li, ri))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    mapping = IdMapping()
    used_l: set[int] = set()
    used_r: set[int] = set()
    for v, li, ri in candidates:
        if li in used_l or ri in used_r:
            continue
        used_l.add(li)
        used_r.add(ri)
        mapping.pairs.append((li, ri))
    mapping.unmatched_left = [i for i in lids if i not in used_l]
    mapping.unmatched_right = [i for i in rids if i not in used_r]
    return mapping


def stitch(
    predictions: list[WindowPrediction],
    threshold: float = 0.5,
    stuff_ids: set[int] | None = None,
) -> dict[int, np.ndarray]:
    """Chain window predictions into per-scan segmentations with one
    global id space. Matched ids inherit the left id; unmatched
    right-side ids get fresh globals from a monotone counter; the shared
    scan keeps the left window's labels."""
    if not predictions:
        raise InputError("no window predictions")
    predictions = sorted(predictions, key=lambda p: p.window.start)
    for a, b in zip(predictions, predictions[1:]):
        if a.window.overlap_scan is None or b.window.start != a.window.overlap_scan:
            raise InputError(
                f"window chain broken between {a.window.start} and {b.window.start}"
            )
    stuff_ids = stuff_ids or set()
    max_local = 0
    for pred in predictions:
        for labels in pred.labels_per_scan.values():
            if len(labels):
                max_local = max(max_local, int(np.asarray(labels).max()))
    counter = max_local + 1

    out: dict[int, np.ndarray] = {}
    # first window: local ids are already globally fresh
    prev = predictions[0]
    prev_map = {
        int(i): int(i)
        for t in prev.window.scan_range
        for i in np.unique(prev.labels_per_scan[t])
        if i != 0
    }
    _emit(out, prev, prev_map, skip_scan=None)
    for nxt in predictions[1:]:
        overlap = prev.window.overlap_scan
        mapping = associate(prev, nxt, overlap, threshold, stuff_ids)
        nxt_map: dict[int, int] = {i: i for i in stuff_ids}
        for li, ri in mapping.pairs:
            nxt_map[ri] = prev_map[li]
        for ri in mapping.unmatched_right:
            nxt_map[ri] = counter
            counter += 1
        for t in nxt.window.scan_range:
            for i in np.unique(nxt.labels_per_scan[t]):
                i = int(i)
                if i != 0 and i not in nxt_map:
                    nxt_map[i] = counter
                    counter += 1
        _emit(out, nxt, nxt_map, skip_scan=overlap)  # left window owns the shared scan
        prev, prev_map = nxt, nxt_map
    return out


def _emit(out, pred: WindowPrediction, id_map: dict[int, int], skip_scan: int | None):
    for t in pred.window.scan_range:
        if t == skip_scan and t in out:
            continue
        labels = np.asarray(pred.labels_per_scan[t])
        remapped = labels.copy()
        for local, global_id in id_map.items():
            remapped[labels == local] = global_id
        out[t] = remapped
