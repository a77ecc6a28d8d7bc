"""SemanticKITTI-format sequence I/O and 1-NN label propagation.

Directory layout: <seq>/velodyne/NNNNNN.bin (4 float32 per point:
x, y, z, intensity, little-endian), <seq>/labels/NNNNNN.label (uint32
per point, semantic in the low 16 bits, instance in the high 16),
<seq>/poses.txt (12 reals per line, row-major 3x4), <seq>/calib.txt
(line "Tr: <12 reals>").
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels
from .errors import DataError, FormatError, InputError
from .types import ClassDef, Pose, Scan, Sequence

RECORD_SIZE = 16  # 4 x float32


def read_scan(path: str, scan_index: int, pose: Pose | None = None) -> Scan:
    """Decode one .bin sweep. Labels stay unset."""
    raw = np.fromfile(path, dtype=np.uint8)
    if len(raw) % RECORD_SIZE != 0:
        offset = len(raw) - (len(raw) % RECORD_SIZE)
        raise FormatError(
            f"{path}: trailing {len(raw) - offset} bytes at offset {offset} "
            f"(record size {RECORD_SIZE})"
        )
    data = raw.view("<f4").reshape(-1, 4).astype(np.float64)
    xyz = data[:, :3]
    if not np.isfinite(xyz).all():
        raise DataError(f"{path}: non-finite coordinate")
    return Scan(
        xyz=xyz,
        intensity=data[:, 3],
        pose=pose if pose is not None else Pose.identity(),
        scan_index=scan_index,
    )


def write_scan(path: str, scan: Scan) -> None:
    data = np.empty((scan.n_points, 4), dtype="<f4")
    data[:, :3] = scan.xyz
    data[:, 3] = scan.intensity
    data.tofile(path)


def decode_label(raw: int | np.ndarray):
    """Split packed uint32 labels into (semantic, instance)."""
    raw = np.asarray(raw, dtype=np.uint32)
    semantic = (raw & np.uint32(0xFFFF)).astype(np.int64)
    instance = (raw >> np.uint32(16)).astype(np.int64)
    if semantic.ndim == 0:
        return int(semantic), int(instance)
    return semantic, instance


def encode_label(semantic, instance) -> np.ndarray:
    semantic = np.asarray(semantic, dtype=np.uint32)
    instance = np.asarray(instance, dtype=np.uint32)
    return ((instance << np.uint32(16)) | (semantic & np.uint32(0xFFFF))).astype(
        np.uint32
    )


def read_labels(path: str, n_points: int | None = None):
    raw = np.fromfile(path, dtype="<u4")
    if n_points is not None and len(raw) != n_points:
        raise FormatError(f"{path}: {len(raw)} labels for {n_points} points")
    return decode_label(raw)


def write_labels(path: str, semantic, instance) -> None:
    encode_label(semantic, instance).astype("<u4").tofile(path)


def _parse_matrix_line(line: str, lineno: int, path: str) -> np.ndarray:
    parts = line.split()
    try:
        vals = [float(v) for v in parts]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: non-numeric pose entry") from exc
    if len(vals) != 12:
        raise FormatError(f"{path}:{lineno}: expected 12 values, got {len(vals)}")
    m = np.eye(4)
    m[:3, :] = np.asarray(vals).reshape(3, 4)
    return m


def read_calib(path: str) -> np.ndarray:
    """Sensor-to-vehicle transform from the 'Tr:' line, as a 4x4 matrix."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("Tr:") or line.startswith("Tr "):
                return _parse_matrix_line(line.split(":", 1)[1], lineno, path)
    raise FormatError(f"{path}: no 'Tr:' line")


def read_poses(poses_path: str, calib_path: str | None = None) -> list[Pose]:
    """Ego poses re-expressed in the LiDAR frame (Tr^-1 P Tr)."""
    tr = read_calib(calib_path) if calib_path else np.eye(4)
    tr_inv = np.linalg.inv(tr)
    poses = []
    with open(poses_path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            m = tr_inv @ _parse_matrix_line(line, lineno, poses_path) @ tr
            poses.append(Pose(m[:3, :3], m[:3, 3]).renormalized())
    return poses


def load_sequence(
    root: str, class_map: dict[int, ClassDef] | None = None, limit: int | None = None
) -> Sequence:
    """Read a full sequence directory (scans, labels if present, poses)."""
    velo_dir = os.path.join(root, "velodyne")
    label_dir = os.path.join(root, "labels")
    if not os.path.isdir(velo_dir):
        raise InputError(f"{velo_dir} does not exist")
    names = sorted(f for f in os.listdir(velo_dir) if f.endswith(".bin"))
    if limit is not None:
        names = names[:limit]
    poses_path = os.path.join(root, "poses.txt")
    calib_path = os.path.join(root, "calib.txt")
    poses = None
    if os.path.exists(poses_path):
        poses = read_poses(poses_path, calib_path if os.path.exists(calib_path) else None)
    scans = []
    for i, name in enumerate(names):
        pose = poses[i] if poses is not None else Pose.identity()
        scan = read_scan(os.path.join(velo_dir, name), i, pose)
        label_path = os.path.join(label_dir, name.replace(".bin", ".label"))
        if os.path.exists(label_path):
            scan.semantic, scan.instance = read_labels(label_path, scan.n_points)
        scans.append(scan)
    if class_map is None:
        class_map = infer_class_map(scans)
    return Sequence(scans=scans, class_map=class_map)


def infer_class_map(scans: list[Scan]) -> dict[int, ClassDef]:
    """Fallback class table: a class is a 'thing' if any of its points
    carries a nonzero instance id."""
    class_map: dict[int, ClassDef] = {}
    for scan in scans:
        if not scan.has_labels:
            continue
        for sid in np.unique(scan.semantic):
            sid = int(sid)
            has_inst = bool((scan.instance[scan.semantic == sid] > 0).any())
            prev = class_map.get(sid)
            if prev is None or (has_inst and not prev.is_thing):
                class_map[sid] = ClassDef(name=f"class_{sid}", is_thing=has_inst)
    return class_map


def propagate_labels_1nn(
    labeled_xyz: np.ndarray,
    semantic: np.ndarray,
    instance: np.ndarray,
    target_xyz: np.ndarray,
):
    """Transfer labels to target points from their Euclidean-nearest
    labeled point; ties keep the lowest labeled index."""
    labeled_xyz = np.asarray(labeled_xyz, dtype=np.float64).reshape(-1, 3)
    if len(labeled_xyz) == 0:
        raise InputError("labeled set is empty")
    idx, _ = kernels.nearest_neighbor(
        np.asarray(target_xyz, dtype=np.float64).reshape(-1, 3), labeled_xyz
    )
    return np.asarray(semantic)[idx], np.asarray(instance)[idx]
