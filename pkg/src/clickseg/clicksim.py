"""Click simulation: error regions between prediction and ground truth,
region ranking (size-max vs scale-invariant), and the intra-region click
strategies (boundary-dependent, centroid, random, density-cluster)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import ConfigError, InputError
from .types import Click

IOU_EPS = 1e-9

REGION_MODES = ("si", "max_size")
CLICK_KINDS = ("bd", "random", "centroid", "dbscan")


@dataclass(frozen=True)
class ErrorRegion:
    """Points of ground-truth object gt_id currently predicted as pred_id."""

    gt_id: int
    pred_id: int
    members: np.ndarray  # sorted point indices

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class ClickPolicy:
    region_selection: str = "si"
    initial_click: str = "centroid"
    refinement_click: str = "random"
    dbscan_eps: float = 0.5
    dbscan_min_pts: int = 5

    def __post_init__(self):
        if self.region_selection not in REGION_MODES:
            raise ConfigError(f"region_selection must be one of {REGION_MODES}")
        for kind in (self.initial_click, self.refinement_click):
            if kind not in CLICK_KINDS:
                raise ConfigError(f"click kind must be one of {CLICK_KINDS}")
        if self.refinement_click == "dbscan" or self.initial_click == "dbscan":
            if self.dbscan_eps <= 0 or self.dbscan_min_pts < 1:
                raise ConfigError("dbscan needs eps > 0 and min_pts >= 1")


def error_regions(gt: np.ndarray, pred: np.ndarray) -> list[ErrorRegion]:
    """Partition the disagreement set into per-(gt, pred) regions,
    ordered by (gt_id, pred_id)."""
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    if gt.shape != pred.shape:
        raise InputError("gt and pred cover different point sets")
    wrong = np.nonzero(gt != pred)[0]
    if len(wrong) == 0:
        return []
    pairs = np.column_stack([gt[wrong], pred[wrong]])
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    return [
        ErrorRegion(gt_id=int(gi), pred_id=int(pj), members=np.sort(wrong[inverse == r]))
        for r, (gi, pj) in enumerate(uniq)
    ]


def si_score(region_size: int, gt_size: int, iou: float) -> float:
    """Scale-invariant urgency: (|E| / |GT|) / IoU, with the IoU guarded
    by a small epsilon so untouched objects rank maximal."""
    if gt_size == 0:
        raise InputError("ground-truth object is empty")
    return (region_size / gt_size) / max(iou, IOU_EPS)


def object_iou(gt: np.ndarray, pred: np.ndarray, object_id: int) -> float:
    g = gt == object_id
    p = pred == object_id
    union = np.count_nonzero(g | p)
    if union == 0:
        return 1.0
    return np.count_nonzero(g & p) / union


def select_region(
    regions: list[ErrorRegion],
    gt: np.ndarray,
    pred: np.ndarray,
    mode: str = "si",
) -> ErrorRegion | None:
    """Highest-ranked error region, or None when converged. Ties keep
    the (lowest gt_id, lowest pred_id) region."""
    ranked = rank_regions(regions, gt, pred, mode)
    return ranked[0] if ranked else None


def rank_regions(
    regions: list[ErrorRegion],
    gt: np.ndarray,
    pred: np.ndarray,
    mode: str = "si",
) -> list[ErrorRegion]:
    if mode not in REGION_MODES:
        raise ConfigError(f"unknown region selection mode {mode!r}")
    if not regions:
        return []
    if mode == "max_size":
        scores = [float(len(r)) for r in regions]
    else:
        gt_sizes = {int(i): int(np.count_nonzero(gt == i)) for i in {r.gt_id for r in regions}}
        ious = {i: object_iou(gt, pred, i) for i in gt_sizes}
        scores = [si_score(len(r), gt_sizes[r.gt_id], ious[r.gt_id]) for r in regions]
    # stable sort; regions are already (gt_id, pred_id)-ordered
    order = sorted(range(len(regions)), key=lambda i: -scores[i])
    return [regions[i] for i in order]


def _make_click(
    point: int, xyz: np.ndarray, scan_index: np.ndarray, object_id: int, order_k: int, iteration: int
) -> Click:
    return Click(
        position=tuple(float(v) for v in xyz[point]),
        scan_index=int(scan_index[point]),
        object_id=int(object_id),
        order_k=order_k,
        iteration=iteration,
    )


def bd_point(members: np.ndarray, xyz: np.ndarray) -> int:
    """Member maximizing the squared distance to the nearest point
    outside the member set; ties keep the lowest point index."""
    members = np.asarray(members)
    if len(members) == 0:
        raise InputError("empty region")
    mask = np.ones(len(xyz), dtype=bool)
    mask[members] = False
    complement = np.nonzero(mask)[0]
    if len(complement) == 0:
        return centroid_point(members, xyz)
    d2 = kernels.min_dist2(xyz[members], xyz[complement])
    return int(members[np.argmax(d2)])


def centroid_point(members: np.ndarray, xyz: np.ndarray) -> int:
    """Member closest to the members' arithmetic mean; lowest-index ties."""
    members = np.asarray(members)
    if len(members) == 0:
        raise InputError("empty member set")
    mean = xyz[members].mean(axis=0)
    diff = xyz[members] - mean
    d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
    return int(members[np.argmin(d2)])


def random_point(members: np.ndarray, rng: np.random.Generator) -> int:
    members = np.asarray(members)
    if len(members) == 0:
        raise InputError("empty member set")
    return int(members[rng.integers(len(members))])


def dbscan_labels(xyz: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Classic density clustering: -1 noise, clusters numbered from 0 in
    order of their seed point index. Border points join the first
    cluster that reaches them (index-ordered expansion)."""
    n = len(xyz)
    labels = np.full(n, -2, dtype=np.int64)  # -2 unvisited
    tree = cKDTree(xyz)
    neighborhoods = tree.query_ball_point(xyz, r=eps)
    cluster = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        neigh = neighborhoods[i]
        if len(neigh) < min_pts:
            labels[i] = -1
            continue
        labels[i] = cluster
        queue = sorted(neigh)
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == -1:
                labels[j] = cluster  # border point
            if labels[j] != -2:
                continue
            labels[j] = cluster
            jn = neighborhoods[j]
            if len(jn) >= min_pts:
                queue.extend(sorted(jn))
        cluster += 1
    return labels


def dbscan_point(members: np.ndarray, xyz: np.ndarray, eps: float, min_pts: int) -> int:
    """Centroid of the largest density cluster of the members; all-noise
    falls back to the whole-set centroid. Largest-cluster ties keep the
    cluster containing the lower minimum point index."""
    members = np.sort(np.asarray(members))
    labels = dbscan_labels(xyz[members], eps, min_pts)
    best = None
    for c in range(labels.max() + 1 if labels.max() >= 0 else 0):
        sub = members[labels == c]
        key = (-len(sub), int(sub.min()))
        if best is None or key < best[0]:
            best = (key, sub)
    if best is None:
        return centroid_point(members, xyz)
    return centroid_point(best[1], xyz)


def region_click_point(
    region: ErrorRegion, xyz: np.ndarray, kind: str, rng: np.random.Generator, policy: ClickPolicy
) -> int:
    if kind == "bd":
        return bd_point(region.members, xyz)
    if kind == "centroid":
        return centroid_point(region.members, xyz)
    if kind == "random":
        return random_point(region.members, rng)
    if kind == "dbscan":
        return dbscan_point(region.members, xyz, policy.dbscan_eps, policy.dbscan_min_pts)
    raise ConfigError(f"unknown click kind {kind!r}")


@dataclass
class SimState:
    """Mutable per-session click bookkeeping."""

    order_k: int = 0
    iteration: int = 0
    clicked_objects: set[int] = field(default_factory=set)

    def next_order(self) -> int:
        k = self.order_k
        self.order_k += 1
        return k


def next_click(
    gt: np.ndarray,
    pred: np.ndarray,
    xyz: np.ndarray,
    scan_index: np.ndarray,
    policy: ClickPolicy,
    rng: np.random.Generator,
    state: SimState,
    eligible_ids: set[int] | None = None,
    initialize: bool = True,
) -> Click | None:
    """One step of the simulated annotator; None means converged.

    Objects without any click yet receive their ground-truth centroid
    click first (ascending object id); afterwards the top-ranked error
    region among eligible objects gets one refinement click.
    """
    all_ids = [int(i) for i in np.unique(gt) if i != 0]
    if eligible_ids is not None:
        all_ids = [i for i in all_ids if i in eligible_ids]
    if initialize:
        for oid in all_ids:
            if oid in state.clicked_objects:
                continue
            members = np.nonzero(gt == oid)[0]
            point = centroid_point(members, xyz)
            state.clicked_objects.add(oid)
            return _make_click(point, xyz, scan_index, oid, state.next_order(), state.iteration)
    regions = error_regions(gt, pred)
    regions = [r for r in regions if r.gt_id != 0 and (eligible_ids is None or r.gt_id in eligible_ids)]
    region = select_region(regions, gt, pred, policy.region_selection)
    if region is None:
        return None
    point = region_click_point(region, xyz, policy.refinement_click, rng, policy)
    state.clicked_objects.add(region.gt_id)
    return _make_click(
        point, xyz, scan_index, region.gt_id, state.next_order(), state.iteration
    )


def training_sample(
    gt: np.ndarray,
    pred: np.ndarray,
    xyz: np.ndarray,
    scan_index: np.ndarray,
    policy: ClickPolicy,
    max_regions: int,
    rng: np.random.Generator,
    iteration: int,
    state: SimState | None = None,
) -> list[Click]:
    """Training-time sampler: iteration 0 yields one centroid click per
    ground-truth object; later iterations click each of the top
    `max_regions` error regions once."""
    if max_regions < 1:
        raise ConfigError("max_regions must be >= 1")
    state = state or SimState(iteration=iteration)
    state.iteration = iteration
    clicks: list[Click] = []
    if iteration == 0:
        for oid in (int(i) for i in np.unique(gt) if i != 0):
            members = np.nonzero(gt == oid)[0]
            point = centroid_point(members, xyz)
            state.clicked_objects.add(oid)
            clicks.append(_make_click(point, xyz, scan_index, oid, state.next_order(), 0))
        return clicks
    regions = [r for r in error_regions(gt, pred) if r.gt_id != 0]
    for region in rank_regions(regions, gt, pred, policy.region_selection)[:max_regions]:
        point = region_click_point(region, xyz, policy.refinement_click, rng, policy)
        clicks.append(
            _make_click(point, xyz, scan_index, region.gt_id, state.next_order(), iteration)
        )
    return clicks
