"""Interactive evaluation protocol: run a segmenter against simulated
clicks and score IoU@k, NoC@q, per-class mIoU and panoptic quality,
with the tracklet-level click accounting of the 4D setup."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clicksim, spacetime
from .clicksim import ClickPolicy, SimState
from .errors import ConfigError, InputError
from .segment import WindowContext, Segmenter
from .types import Click, ClassDef, Sequence

DEFAULT_BUDGET = 10
DEFAULT_THRESHOLDS = (0.80, 0.85, 0.90)
DEFAULT_KS = (1, 2, 3, 4, 5, 10)
MODES = ("single", "multi", "fourD")


def iou(pred_members: np.ndarray, gt_members: np.ndarray) -> float:
    """|intersection| / |union| over boolean masks; empty/empty -> 1.0."""
    pred_members = np.asarray(pred_members, dtype=bool)
    gt_members = np.asarray(gt_members, dtype=bool)
    union = np.count_nonzero(pred_members | gt_members)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred_members & gt_members) / union


@dataclass
class EvalConfig:
    budget: int = DEFAULT_BUDGET
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    ks: tuple[int, ...] = DEFAULT_KS
    mode: str = "multi"
    tau: int = 1
    voxel_size: float = spacetime.DEFAULT_VOXEL_SIZE
    policy: ClickPolicy = field(default_factory=ClickPolicy)
    seed: int = 0
    click_space: str = "voxel"  # voxel | point

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if any(not (0 < q <= 1) for q in self.thresholds):
            raise ConfigError("thresholds must lie in (0, 1]")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode == "fourD" and self.tau < 1:
            raise ConfigError("fourD mode needs tau >= 1")
        if self.click_space not in ("voxel", "point"):
            raise ConfigError("click_space must be 'voxel' or 'point'")
        if max(self.ks) > self.budget:
            raise ConfigError("ks may not exceed the budget")


class ObjectTable:
    """Stable object ids over a sequence: each thing (semantic, instance)
    pair and each stuff class gets one id >= 1; 0 stays background."""

    def __init__(self, sequence: Sequence):
        things: set[tuple[int, int]] = set()
        stuff: set[int] = set()
        for scan in sequence.scans:
            if not scan.has_labels:
                continue
            sems = scan.semantic
            insts = scan.instance
            for sid in np.unique(sems):
                sid = int(sid)
                if sid == 0:
                    continue
                cdef = sequence.class_map.get(sid)
                if cdef is not None and cdef.is_thing:
                    for inst in np.unique(insts[sems == sid]):
                        if int(inst) > 0:
                            things.add((sid, int(inst)))
                else:
                    stuff.add(sid)
        self.id_of: dict[tuple[int, int], int] = {}
        self.meta: dict[int, tuple[int, int]] = {}  # oid -> (semantic, instance)
        oid = 1
        for sid, inst in sorted(things):
            self.id_of[(sid, inst)] = oid
            self.meta[oid] = (sid, inst)
            oid += 1
        for sid in sorted(stuff):
            self.id_of[(sid, 0)] = oid
            self.meta[oid] = (sid, 0)
            oid += 1
        self.class_map = sequence.class_map

    @property
    def max_id(self) -> int:
        return len(self.meta)

    def semantic_of(self, oid: int) -> int:
        return self.meta[oid][0]

    def map_points(self, semantic: np.ndarray, instance: np.ndarray) -> np.ndarray:
        out = np.zeros(len(semantic), dtype=np.int64)
        for (sid, inst), oid in self.id_of.items():
            if inst == 0:
                mask = semantic == sid
                cdef = self.class_map.get(sid)
                if cdef is not None and cdef.is_thing:
                    mask &= instance == 0
            else:
                mask = (semantic == sid) & (instance == inst)
            out[mask] = oid
        return out


def noc_accounting_4d(events: list[dict], scans: list[int], budget: int, q: float | None = None):
    """Tracklet click-counter automaton: 'click' events increment the
    counter; a 'threshold' event in a scan finalizes that scan's NoC at
    the counter value and resets it. Scans without a threshold event
    count the full budget."""
    noc = {int(s): budget for s in scans}
    counter = 0
    last_t = None
    for ev in events:
        t = ev.get("t")
        if t is not None:
            if last_t is not None and t < last_t:
                raise InputError("events out of order")
            last_t = t
        if ev["kind"] == "click":
            counter += 1
        elif ev["kind"] == "threshold":
            scan = int(ev["scan"])
            if scan not in noc:
                raise InputError(f"threshold event for unknown scan {scan}")
            noc[scan] = counter
            counter = 0
        else:
            raise InputError(f"unknown event kind {ev['kind']!r}")
    return noc


@dataclass
class WindowResult:
    window: spacetime.Window
    # (scan, oid) -> {k: iou}
    iou_at_k: dict[tuple[int, int], dict[int, float]]
    # (scan, oid) -> {q: noc}
    noc_at_q: dict[tuple[int, int], dict[float, float]]
    trace: list[dict]
    semantic_of: dict[int, int]


class _WindowSession:
    """State of one interactive window run: clicks, metric accounting."""

    def __init__(self, ctx: WindowContext, cfg: EvalConfig, window: spacetime.Window,
                 table: ObjectTable, count_all_clicks_for: int | None = None):
        self.ctx = ctx
        self.cfg = cfg
        self.window = window
        self.table = table
        self.count_all_clicks_for = count_all_clicks_for
        gt = ctx.gt_object_ids
        if gt is None:
            raise InputError("evaluation needs ground-truth object ids")
        self.gt = gt
        cloud = ctx.cloud
        self.tracklets = sorted(int(i) for i in np.unique(gt) if i != 0)
        # object instances: (scan, oid) pairs with at least one gt point
        self.instances: list[tuple[int, int]] = []
        self.scan_masks = {t: cloud.scan_index == t for t in window.scan_range}
        self.gt_masks = {}
        for oid in self.tracklets:
            omask = gt == oid
            for t in window.scan_range:
                m = omask & self.scan_masks[t]
                if m.any():
                    self.instances.append((t, oid))
                    self.gt_masks[(t, oid)] = m
        self.scans_of = {
            oid: [t for (t, o) in self.instances if o == oid] for oid in self.tracklets
        }
        self.budget_of = {oid: cfg.budget * len(self.scans_of[oid]) for oid in self.tracklets}
        self.clicks_spent = {oid: 0 for oid in self.tracklets}
        self.total_budget = sum(self.budget_of.values())
        self.events = {
            (oid, q): [] for oid in self.tracklets for q in cfg.thresholds
        }
        self.reached: set[tuple[int, int, float]] = set()  # (scan, oid, q)
        self.iou_at_k = {inst: {} for inst in self.instances}
        self.trace: list[dict] = []
        self.clicks: list[Click] = []
        self.pred = np.zeros(cloud.n_points, dtype=np.int64)
        self.time = 0
        if cfg.click_space == "voxel":
            self.click_xyz = ctx.grid.centers[ctx.grid.point_to_voxel]
        else:
            self.click_xyz = cloud.xyz

    def current_ious(self) -> dict[tuple[int, int], float]:
        out = {}
        for (t, oid), gmask in self.gt_masks.items():
            pmask = (self.pred == oid) & self.scan_masks[t]
            out[(t, oid)] = iou(pmask, gmask)
        return out

    def eligible(self) -> set[int]:
        return {o for o in self.tracklets if self.clicks_spent[o] < self.budget_of[o]}

    def apply_click(self, click: Click, segmenter: Segmenter) -> None:
        self.clicks.append(click)
        oid = click.object_id
        self.time += 1
        for o in self.tracklets:
            counted = o == oid or (
                self.count_all_clicks_for is not None and o == self.count_all_clicks_for
            )
            if counted:
                if o in self.clicks_spent:
                    self.clicks_spent[o] += 1
                for q in self.cfg.thresholds:
                    self.events[(o, q)].append({"t": self.time, "kind": "click"})
        self.pred = segmenter.predict(self.ctx, self.clicks)
        ious = self.current_ious()
        for q in self.cfg.thresholds:
            for t, oid2 in self.instances:  # ascending scan order per oid
                if (t, oid2, q) in self.reached:
                    continue
                if ious[(t, oid2)] >= q:
                    self.reached.add((t, oid2, q))
                    self.events[(oid2, q)].append(
                        {"t": self.time, "kind": "threshold", "scan": t}
                    )
        # IoU@k checkpoint: k clicks per object instance on average
        n_inst = len(self.instances)
        if n_inst and len(self.clicks) % n_inst == 0:
            k = len(self.clicks) // n_inst
            if k in self.cfg.ks:
                for inst in self.instances:
                    self.iou_at_k[inst][k] = ious[inst]
        self.trace.append(
            {
                "window": self.window.start,
                "click": click.to_dict(),
                "ious": {f"{t}:{o}": round(v, 12) for (t, o), v in sorted(ious.items())},
            }
        )

    def finalize(self) -> WindowResult:
        final_ious = self.current_ious()
        for inst in self.instances:
            have = self.iou_at_k[inst]
            for k in self.cfg.ks:
                if k not in have:
                    have[k] = final_ious[inst]
        noc = {inst: {} for inst in self.instances}
        for oid in self.tracklets:
            for q in self.cfg.thresholds:
                per_scan = noc_accounting_4d(
                    self.events[(oid, q)], self.scans_of[oid], self.cfg.budget
                )
                for t in self.scans_of[oid]:
                    noc[(t, oid)][q] = float(per_scan[t])
        semantic_of = {oid: self.table.semantic_of(oid) for oid in self.tracklets
                       if oid in self.table.meta}
        return WindowResult(
            window=self.window,
            iou_at_k=self.iou_at_k,
            noc_at_q=noc,
            trace=self.trace,
            semantic_of=semantic_of,
        )


def run_window(
    ctx: WindowContext,
    window: spacetime.Window,
    segmenter: Segmenter,
    cfg: EvalConfig,
    table: ObjectTable,
    rng: np.random.Generator,
    scripted_clicks: list[Click] | None = None,
) -> WindowResult:
    """One interactive session over a window. With scripted_clicks the
    click stream is replayed instead of simulated."""
    result, _ = _run_window_with_pred(ctx, window, segmenter, cfg, table, rng, scripted_clicks)
    return result


def _window_context(sequence: Sequence, window: spacetime.Window, cfg: EvalConfig,
                    table: ObjectTable) -> WindowContext:
    cloud = spacetime.window_cloud(sequence, window)
    grid = spacetime.voxelize(cloud, cfg.voxel_size)
    if cloud.semantic is None:
        raise InputError("sequence has no ground-truth labels")
    gt_ids = table.map_points(cloud.semantic, cloud.instance)
    return WindowContext(cloud=cloud, grid=grid, gt_object_ids=gt_ids)


@dataclass
class MetricsReport:
    """Aggregated evaluation output plus the full per-click trace."""

    rows: list[dict]  # per (scan, object): class, iou@k, noc@q
    iou_at_k: dict[int, float]
    noc_at_q: dict[float, float]
    miou_at_k: dict[int, float]
    per_class_iou_at_k: dict[int, dict[int, float]]
    trace: list[dict]

    def summary(self) -> dict:
        return {
            "n_objects": len(self.rows),
            "iou_at_k": {str(k): self.iou_at_k[k] for k in sorted(self.iou_at_k)},
            "noc_at_q": {f"{q:g}": self.noc_at_q[q] for q in sorted(self.noc_at_q)},
            "miou_at_k": {str(k): self.miou_at_k[k] for k in sorted(self.miou_at_k)},
            "per_class_iou_at_k": {
                str(c): {str(k): v for k, v in sorted(kv.items())}
                for c, kv in sorted(self.per_class_iou_at_k.items())
            },
        }


def aggregate(results: list[WindowResult], cfg: EvalConfig) -> MetricsReport:
    rows = []
    trace = []
    for res in sorted(results, key=lambda r: r.window.start):
        for (t, oid) in sorted(res.iou_at_k):
            rows.append(
                {
                    "window": res.window.start,
                    "scan": t,
                    "object": oid,
                    "class": res.semantic_of.get(oid, 0),
                    "iou_at_k": res.iou_at_k[(t, oid)],
                    "noc_at_q": res.noc_at_q[(t, oid)],
                }
            )
        trace.extend(res.trace)
    # interior overlap scans appear in two windows; the left window keeps
    # authority, so drop the right-window duplicate of each (scan, object)
    seen: set[tuple[int, int]] = set()
    unique_rows = []
    for row in rows:
        key = (row["scan"], row["object"])
        if key in seen:
            continue
        seen.add(key)
        unique_rows.append(row)
    rows = unique_rows

    iou_at_k = {
        k: float(np.mean([r["iou_at_k"][k] for r in rows])) if rows else 0.0
        for k in cfg.ks
    }
    noc_at_q = {
        q: float(np.mean([r["noc_at_q"][q] for r in rows])) if rows else 0.0
        for q in cfg.thresholds
    }
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


def miou_at_k(rows: list[dict], k: int):
    """Per-class mean IoU at k and the class-balanced headline mean."""
    per_class: dict[int, float] = {}
    for cls in sorted({r["class"] for r in rows}):
        vals = [r["iou_at_k"][k] for r in rows if r["class"] == cls]
        per_class[cls] = float(np.mean(vals))
    headline = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, headline


def run_protocol(
    sequence: Sequence,
    segmenter: Segmenter,
    cfg: EvalConfig,
    scripted: dict[int, list[Click]] | None = None,
    return_predictions: bool = False,
):
    """Full protocol over a sequence: windows (tau=1 for single/multi
    modes), interactive loop per window, aggregation. With
    return_predictions the final per-scan window predictions are
    returned alongside the report (for stitching)."""
    if not any(s.has_labels for s in sequence.scans):
        raise InputError("sequence has no ground-truth labels")
    table = ObjectTable(sequence)
    tau = cfg.tau if cfg.mode == "fourD" else 1
    wins = spacetime.windows(len(sequence), tau)
    results = []
    predictions = []
    if cfg.mode == "single":
        for window in wins:
            results.extend(_run_single_mode_window(sequence, window, segmenter, cfg, table))
    else:
        for window in wins:
            ctx = _window_context(sequence, window, cfg, table)
            rng = np.random.default_rng([cfg.seed, window.start])
            session_result, final_pred = _run_window_with_pred(
                ctx, window, segmenter, cfg, table, rng,
                scripted.get(window.start, []) if scripted is not None else None,
            )
            results.append(session_result)
            if return_predictions:
                predictions.append((window, ctx.cloud.split_per_scan(final_pred)))
    report = aggregate(results, cfg)
    if return_predictions:
        return report, predictions
    return report


def _run_window_with_pred(ctx, window, segmenter, cfg, table, rng, scripted_clicks):
    session = _WindowSession(ctx, cfg, window, table)
    if scripted_clicks is not None:
        for click in scripted_clicks:
            session.apply_click(click, segmenter)
    else:
        state = SimState()
        while len(session.clicks) < session.total_budget:
            eligible = session.eligible()
            if not eligible:
                break
            click = clicksim.next_click(
                session.gt, session.pred, session.click_xyz, ctx.cloud.scan_index,
                cfg.policy, rng, state, eligible_ids=eligible,
            )
            if click is None:
                break
            session.apply_click(click, segmenter)
    return session.finalize(), session.pred


def _run_single_mode_window(sequence, window, segmenter, cfg, table):
    """Single-object mode: one two-id session (target vs. background id)
    per object instance; clicks on either id count toward the budget."""
    ctx = _window_context(sequence, window, cfg, table)
    bg_id = table.max_id + 1
    out = []
    for oid in sorted(int(i) for i in np.unique(ctx.gt_object_ids) if i != 0):
        gt2 = np.where(ctx.gt_object_ids == oid, oid, bg_id)
        sub_ctx = WindowContext(cloud=ctx.cloud, grid=ctx.grid, gt_object_ids=gt2)
        session = _WindowSession(sub_ctx, cfg, window, table, count_all_clicks_for=oid)
        # background is an opponent id, not a budgeted object
        session.tracklets = [oid]
        session.instances = [(t, o) for (t, o) in session.instances if o == oid]
        session.scans_of = {oid: [t for t, _ in session.instances]}
        session.budget_of = {oid: cfg.budget}
        session.clicks_spent = {oid: 0}
        session.total_budget = cfg.budget
        session.iou_at_k = {inst: {} for inst in session.instances}
        rng = np.random.default_rng([cfg.seed, window.start, oid])
        state = SimState()
        state.clicked_objects.add(bg_id)  # no initial click on background
        while len(session.clicks) < cfg.budget:
            click = clicksim.next_click(
                session.gt, session.pred, session.click_xyz, ctx.cloud.scan_index,
                cfg.policy, rng, state,
            )
            if click is None:
                break
            session.apply_click(click, segmenter)
        res = session.finalize()
        res.iou_at_k = {k: v for k, v in res.iou_at_k.items() if k[1] == oid}
        res.noc_at_q = {k: v for k, v in res.noc_at_q.items() if k[1] == oid}
        out.append(res)
    return out


def panoptic_quality(
    gt_semantic: np.ndarray,
    gt_instance: np.ndarray,
    pred_semantic: np.ndarray,
    pred_instance: np.ndarray,
    class_map: dict[int, ClassDef],
):
    """Standard PQ/SQ/RQ at the IoU > 0.5 matching rule, averaged over
    classes. Stuff classes contribute one segment per class."""
    if not class_map:
        raise InputError("class map required")
    per_class = {}
    for sid, cdef in sorted(class_map.items()):
        gt_segs = _segments(gt_semantic, gt_instance, sid, cdef.is_thing)
        pred_segs = _segments(pred_semantic, pred_instance, sid, cdef.is_thing)
        if not gt_segs and not pred_segs:
            continue
        matched_pred: set[int] = set()
        tp_ious = []
        for gmask in gt_segs.values():
            for pid, pmask in pred_segs.items():
                if pid in matched_pred:
                    continue
                v = iou(pmask, gmask)
                if v > 0.5:
                    matched_pred.add(pid)
                    tp_ious.append(v)
                    break
        tp = len(tp_ious)
        fn = len(gt_segs) - tp
        fp = len(pred_segs) - tp
        denom = tp + 0.5 * fp + 0.5 * fn
        sq = float(np.sum(tp_ious) / tp) if tp else 0.0
        rq = tp / denom if denom else 0.0
        pq = float(np.sum(tp_ious) / denom) if denom else 0.0
        per_class[sid] = {"PQ": pq, "SQ": sq, "RQ": rq, "TP": tp, "FP": fp, "FN": fn}
    if not per_class:
        return {"PQ": 0.0, "SQ": 0.0, "RQ": 0.0, "per_class": {}}
    means = {m: float(np.mean([v[m] for v in per_class.values()])) for m in ("PQ", "SQ", "RQ")}
    means["per_class"] = per_class
    return means


def _segments(semantic, instance, sid, is_thing):
    semantic = np.asarray(semantic)
    instance = np.asarray(instance)
    cls_mask = semantic == sid
    if not cls_mask.any():
        return {}
    if not is_thing:
        return {0: cls_mask}
    segs = {}
    for inst in np.unique(instance[cls_mask]):
        if int(inst) == 0:
            continue
        segs[int(inst)] = cls_mask & (instance == inst)
    return segs
