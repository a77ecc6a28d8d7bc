"""Spatio-temporal point clouds: ego-motion compensation, superimposition
of consecutive scans, voxelization and temporal windowing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .types import Scan, Sequence

DEFAULT_VOXEL_SIZE = 0.1  # meters


def to_global(scan: Scan) -> np.ndarray:
    """Scan coordinates mapped into the global frame: R p + t."""
    if not scan.pose.is_orthonormal():
        raise InputError("pose rotation is not orthonormal")
    return scan.pose.apply(scan.xyz)


@dataclass
class SpacetimeCloud:
    """Points of one temporal window in a shared frame, with per-point
    time and an invertible map back to (scan_index, local index)."""

    xyz: np.ndarray  # (M, 3)
    scan_index: np.ndarray  # (M,)
    origin_local: np.ndarray  # (M,) index within the source scan
    window_start: int
    window_length: int
    semantic: np.ndarray | None = None
    instance: np.ndarray | None = None

    @property
    def n_points(self) -> int:
        return len(self.xyz)

    def scan_mask(self, scan_index: int) -> np.ndarray:
        return self.scan_index == scan_index

    def split_per_scan(self, values: np.ndarray) -> dict[int, np.ndarray]:
        """Scatter a per-cloud-point array back into per-scan arrays
        ordered by local point index."""
        out: dict[int, np.ndarray] = {}
        for t in range(self.window_start, self.window_start + self.window_length):
            mask = self.scan_index == t
            local = self.origin_local[mask]
            scan_vals = np.empty(local.max() + 1 if len(local) else 0, dtype=values.dtype)
            scan_vals[local] = values[mask]
            out[t] = scan_vals
        return out


def superimpose(scans: list[Scan], anchor_first: bool = True) -> SpacetimeCloud:
    """Concatenate consecutive scans in a common frame.

    The anchor is the first scan's pose: all poses are re-expressed
    relative to it, keeping coordinate magnitudes small. Downstream
    results are translation-invariant, so the choice is internal.
    """
    if not scans:
        raise InputError("no scans to superimpose")
    indices = [s.scan_index for s in scans]
    if any(b != a + 1 for a, b in zip(indices, indices[1:])):
        raise InputError(f"scan_index gap in {indices}")
    anchor_inv = scans[0].pose.inverse() if anchor_first else None
    xyz_parts, t_parts, local_parts, sem_parts, inst_parts = [], [], [], [], []
    labeled = all(s.has_labels for s in scans)
    for scan in scans:
        pose = anchor_inv.compose(scan.pose) if anchor_inv is not None else scan.pose
        if not pose.is_orthonormal():
            raise InputError("pose rotation is not orthonormal")
        xyz_parts.append(pose.apply(scan.xyz))
        t_parts.append(np.full(scan.n_points, scan.scan_index, dtype=np.int64))
        local_parts.append(np.arange(scan.n_points, dtype=np.int64))
        if labeled:
            sem_parts.append(scan.semantic)
            inst_parts.append(scan.instance)
    return SpacetimeCloud(
        xyz=np.vstack(xyz_parts),
        scan_index=np.concatenate(t_parts),
        origin_local=np.concatenate(local_parts),
        window_start=indices[0],
        window_length=len(scans),
        semantic=np.concatenate(sem_parts) if labeled else None,
        instance=np.concatenate(inst_parts) if labeled else None,
    )


@dataclass
class VoxelGrid:
    """Floor-quantized cubic grid over a SpacetimeCloud."""

    voxel_size: float
    keys: np.ndarray  # (N, 3) int64, lexicographically sorted
    point_to_voxel: np.ndarray  # (M,) voxel index per cloud point
    centers: np.ndarray  # (N, 3) mean of member points
    scan_sets: list[np.ndarray] = field(repr=False)  # sorted scan indices per voxel

    @property
    def n_voxels(self) -> int:
        return len(self.keys)

    def broadcast(self, per_voxel: np.ndarray) -> np.ndarray:
        """Per-voxel values spread onto cloud points."""
        return per_voxel[self.point_to_voxel]


def voxelize(cloud: SpacetimeCloud, voxel_size: float = DEFAULT_VOXEL_SIZE) -> VoxelGrid:
    if voxel_size <= 0:
        raise ConfigError("voxel size must be positive")
    keys = np.floor(cloud.xyz / voxel_size).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n = len(uniq)
    counts = np.bincount(inverse, minlength=n).astype(np.float64)
    centers = np.zeros((n, 3))
    for d in range(3):
        centers[:, d] = np.bincount(inverse, weights=cloud.xyz[:, d], minlength=n)
    centers /= counts[:, None]
    pair = np.unique(np.column_stack([inverse, cloud.scan_index]), axis=0)
    scan_sets = [pair[pair[:, 0] == v, 1] for v in range(n)]
    return VoxelGrid(
        voxel_size=float(voxel_size),
        keys=uniq,
        point_to_voxel=inverse,
        centers=centers,
        scan_sets=scan_sets,
    )


@dataclass(frozen=True)
class Window:
    start: int
    length: int
    overlap_scan: int | None  # scan shared with the next window

    @property
    def scan_range(self) -> range:
        return range(self.start, self.start + self.length)


def windows(n_scans: int, tau: int) -> list[Window]:
    """Temporal windows of length tau with one shared boundary scan.

    tau=1 degenerates to one window per scan with no overlap (used by
    the evaluation reduction). A final partial window (length >= 2) is
    kept so every scan is covered.
    """
    if n_scans < 1:
        raise InputError("empty sequence")
    if tau < 1:
        raise ConfigError("tau must be >= 1")
    if tau == 1:
        return [Window(start=t, length=1, overlap_scan=None) for t in range(n_scans)]
    if n_scans < 2:
        raise InputError("need at least 2 scans for overlapping windows")
    out: list[Window] = []
    start = 0
    while start < n_scans - 1:
        length = min(tau, n_scans - start)
        nxt = start + length - 1
        out.append(
            Window(start=start, length=length, overlap_scan=nxt if nxt < n_scans - 1 else None)
        )
        start = nxt
    return out


def window_cloud(sequence: Sequence, window: Window) -> SpacetimeCloud:
    scans = [s for s in sequence.scans if s.scan_index in window.scan_range]
    if len(scans) != window.length:
        raise InputError(f"sequence is missing scans of window {window}")
    return superimpose(scans)
