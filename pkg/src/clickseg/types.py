"""Core domain types: poses, scans, sequences, clicks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InputError

ORTHO_TOL = 1e-6
ORTHO_FIX_TOL = 1e-4


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation (3x3) and translation (3,), meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def is_orthonormal(self, tol: float = ORTHO_TOL) -> bool:
        r = self.rotation
        return (
            np.allclose(r @ r.T, np.eye(3), atol=tol)
            and abs(np.linalg.det(r) - 1.0) <= tol
        )

    def renormalized(self) -> "Pose":
        """Project the rotation onto SO(3); raises if drift exceeds tolerance."""
        r = self.rotation
        drift = np.abs(r @ r.T - np.eye(3)).max()
        if drift > ORTHO_FIX_TOL:
            raise DataError(f"rotation drift {drift:.2e} exceeds {ORTHO_FIX_TOL:.0e}")
        u, _, vt = np.linalg.svd(r)
        fixed = u @ vt
        if np.linalg.det(fixed) < 0:
            raise DataError("rotation has negative determinant")
        return Pose(fixed, self.translation)

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        """Map points (N,3) into the parent frame: R p + t."""
        return np.asarray(xyz, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first, then `self`."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass
class Scan:
    """One LiDAR sweep in its sensor frame."""

    xyz: np.ndarray  # (N, 3) float64
    intensity: np.ndarray  # (N,) float64
    pose: Pose
    scan_index: int
    semantic: np.ndarray | None = None  # (N,) int64
    instance: np.ndarray | None = None  # (N,) int64

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
        if self.scan_index < 0:
            raise InputError("scan_index must be >= 0")
        if self.semantic is not None:
            self.semantic = np.asarray(self.semantic, dtype=np.int64).reshape(-1)
            self.instance = np.asarray(self.instance, dtype=np.int64).reshape(-1)
            if len(self.semantic) != len(self.xyz):
                raise InputError("labels length differs from point count")

    @property
    def n_points(self) -> int:
        return len(self.xyz)

    @property
    def has_labels(self) -> bool:
        return self.semantic is not None


@dataclass(frozen=True)
class ClassDef:
    name: str
    is_thing: bool


@dataclass
class Sequence:
    """Ordered scans plus the shared class table."""

    scans: list[Scan]
    class_map: dict[int, ClassDef] = field(default_factory=dict)

    def __post_init__(self):
        indices = [s.scan_index for s in self.scans]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InputError("scan_index must be strictly increasing")

    def __len__(self) -> int:
        return len(self.scans)


@dataclass(frozen=True)
class Click:
    """One interaction: a position in the global frame plus its metadata."""

    position: tuple[float, float, float]
    scan_index: int
    object_id: int
    order_k: int
    iteration: int = 0

    def __post_init__(self):
        if self.object_id < 1:
            raise InputError("object_id must be >= 1 (0 is reserved)")

    def to_dict(self) -> dict:
        return {
            "pos": [float(v) for v in self.position],
            "scan": int(self.scan_index),
            "object": int(self.object_id),
            "order": int(self.order_k),
            "iteration": int(self.iteration),
        }

    @staticmethod
    def from_dict(d: dict) -> "Click":
        return Click(
            position=tuple(float(v) for v in d["pos"]),
            scan_index=int(d["scan"]),
            object_id=int(d["object"]),
            order_k=int(d["order"]),
            iteration=int(d.get("iteration", 0)),
        )
