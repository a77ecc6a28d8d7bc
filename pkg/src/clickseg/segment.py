"""Clicks to segmentations: response-map fusion, argmax masks, and the
built-in segmenters (distance baseline, ground-truth oracle, null)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError
from .spacetime import SpacetimeCloud, VoxelGrid
from .types import Click

BACKGROUND_ID = 0


@dataclass
class ResponseMap:
    """Per-click, per-voxel response scores."""

    responses: np.ndarray  # (K, N) float64
    click_objects: np.ndarray  # (K,) int64

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=np.float64)
        self.click_objects = np.asarray(self.click_objects, dtype=np.int64)
        if self.responses.shape[0] != len(self.click_objects):
            raise InputError("response rows and click objects differ in length")


@dataclass
class Heatmap:
    """Per-object, per-voxel scores; id_list ascending."""

    scores: np.ndarray  # (I, N)
    id_list: np.ndarray  # (I,)


def fuse_clicks(rmap: ResponseMap) -> Heatmap:
    """Per-voxel maximum over the responses of clicks sharing an object."""
    if rmap.responses.shape[0] < 1:
        raise InputError("need at least one click response")
    ids = np.unique(rmap.click_objects)
    scores = np.empty((len(ids), rmap.responses.shape[1]))
    for row, oid in enumerate(ids):
        scores[row] = rmap.responses[rmap.click_objects == oid].max(axis=0)
    return Heatmap(scores=scores, id_list=ids)


def predict_mask(heat: Heatmap) -> np.ndarray:
    """Hard per-voxel assignment: argmax over object rows, ties to the
    lowest id (id_list is ascending, argmax keeps the first row)."""
    if len(heat.id_list) < 1:
        raise InputError("heatmap has no object rows")
    return heat.id_list[np.argmax(heat.scores, axis=0)]


def baseline_respond(
    grid: VoxelGrid, clicks: list[Click], cutoff: float | None = None
) -> ResponseMap:
    """Negative Euclidean distance from each click to each voxel center;
    beyond the optional cutoff the response is -inf."""
    if not clicks:
        raise InputError("need at least one click")
    positions = np.array([c.position for c in clicks], dtype=np.float64)
    responses = kernels.response_matrix(positions, grid.centers)
    if cutoff is not None:
        responses = np.where(responses >= -cutoff, responses, -np.inf)
    return ResponseMap(
        responses=responses,
        click_objects=np.array([c.object_id for c in clicks], dtype=np.int64),
    )


def baseline_segment(
    grid: VoxelGrid, clicks: list[Click], cutoff: float | None = None
) -> np.ndarray:
    """fuse -> argmax over the baseline responses; voxels outside every
    click's cutoff get the id of the globally nearest click."""
    rmap = baseline_respond(grid, clicks, cutoff)
    voxel_ids = predict_mask(fuse_clicks(rmap))
    if cutoff is not None:
        uncovered = np.isinf(rmap.responses).all(axis=0)
        if uncovered.any():
            full = baseline_respond(grid, clicks, cutoff=None)
            nearest = np.argmax(full.responses[:, uncovered], axis=0)
            voxel_ids = voxel_ids.copy()
            voxel_ids[uncovered] = full.click_objects[nearest]
    return voxel_ids


def oracle_segment(gt_ids: np.ndarray, clicks: list[Click]) -> np.ndarray:
    """Ground-truth mask for every clicked object, background elsewhere."""
    gt_ids = np.asarray(gt_ids)
    pred = np.full_like(gt_ids, BACKGROUND_ID)
    clicked = {c.object_id for c in clicks}
    for oid in clicked:
        pred[gt_ids == oid] = oid
    return pred


def null_segment(n: int, clicks: list[Click] | None = None) -> np.ndarray:
    """All background, regardless of clicks."""
    return np.full(n, BACKGROUND_ID, dtype=np.int64)


@dataclass
class WindowContext:
    """Everything a segmenter may consult for one temporal window."""

    cloud: SpacetimeCloud
    grid: VoxelGrid
    gt_object_ids: np.ndarray | None = None  # per cloud point


class Segmenter:
    """Point-level segmenter contract: clicks in, per-point object ids out."""

    name = "base"

    def predict(self, ctx: WindowContext, clicks: list[Click]) -> np.ndarray:
        raise NotImplementedError

    def close(self) -> None:
        pass


class BaselineSegmenter(Segmenter):
    name = "baseline"

    def __init__(self, cutoff: float | None = None):
        self.cutoff = cutoff

    def predict(self, ctx: WindowContext, clicks: list[Click]) -> np.ndarray:
        if not clicks:
            return null_segment(ctx.cloud.n_points)
        voxel_ids = baseline_segment(ctx.grid, clicks, self.cutoff)
        return ctx.grid.broadcast(voxel_ids)


class OracleSegmenter(Segmenter):
    name = "oracle"

    def predict(self, ctx: WindowContext, clicks: list[Click]) -> np.ndarray:
        if ctx.gt_object_ids is None:
            raise InputError("oracle segmenter needs ground truth")
        return oracle_segment(ctx.gt_object_ids, clicks)


class NullSegmenter(Segmenter):
    name = "null"

    def predict(self, ctx: WindowContext, clicks: list[Click]) -> np.ndarray:
        return null_segment(ctx.cloud.n_points)


def snap_click_position(grid: VoxelGrid, position, max_radius: float | None = None):
    """Nearest voxel center to a raw position, or None when farther than
    max_radius."""
    pos = np.asarray(position, dtype=np.float64).reshape(1, 3)
    idx, d2 = kernels.nearest_neighbor(pos, grid.centers)
    if max_radius is not None and d2[0] > max_radius * max_radius:
        return None
    return int(idx[0])
