"""Interactive multi-object segmentation toolkit for spatio-temporal
LiDAR point clouds: ingest, superimposition, click simulation,
segmentation, evaluation, tracking, CLI and annotation server."""

from .kernels import BACKEND as KERNEL_BACKEND
from .types import ClassDef, Click, Pose, Scan, Sequence

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ClassDef",
    "Click",
    "Pose",
    "Scan",
    "Sequence",
    "__version__",
]
