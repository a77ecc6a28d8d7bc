"""Run configuration: one YAML document with sections mirroring the
module configs; CLI flags override individual keys."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from .clicksim import ClickPolicy
from .errors import ConfigError
from .evaluation import EvalConfig
from .loss import LossConfig

DATASET_ENV = "CLICKSEG_DATASET"

SEGMENTERS = ("baseline", "oracle", "null")


@dataclass
class RunConfig:
    dataset: str | None = None
    synthetic: dict | None = None  # inline spec or {"spec": path, "scenes": n}
    scenes: int = 1
    mode: str = "multi"
    tau: int = 1
    voxel_size: float = 0.1
    segmenter: str = "baseline"
    baseline_cutoff: float | None = None
    seed: int = 0
    out: str = "out"
    workers: int = 1
    snap_radius: float = 0.5
    eval: EvalConfig = field(default_factory=EvalConfig)
    policy: ClickPolicy = field(default_factory=ClickPolicy)
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        env_root = os.environ.get(DATASET_ENV)
        if env_root and self.synthetic is None:
            self.dataset = env_root
        if self.dataset is None and self.synthetic is None:
            raise ConfigError("config needs either 'dataset' or 'synthetic'")
        if self.dataset is not None and not os.path.isdir(self.dataset):
            raise ConfigError(f"dataset root {self.dataset!r} does not exist")
        if not self.segmenter.startswith("external:") and self.segmenter not in SEGMENTERS:
            raise ConfigError(
                f"segmenter must be one of {SEGMENTERS} or 'external:<endpoint>'"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # eval carries the protocol knobs; keep the shared ones in sync
        self.eval.mode = self.mode
        self.eval.tau = self.tau
        self.eval.voxel_size = self.voxel_size
        self.eval.seed = self.seed
        self.eval.policy = self.policy


def _build(section: dict | None, cls):
    return cls(**(section or {}))


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    doc: dict = {}
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a mapping")
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        eval_cfg = _build(doc.pop("eval", None), EvalConfig)
        policy = _build(doc.pop("policy", None), ClickPolicy)
        loss = _build(doc.pop("loss", None), LossConfig)
        return RunConfig(**doc, eval=eval_cfg, policy=policy, loss=loss)
    except TypeError as exc:
        raise ConfigError(f"bad config key: {exc}") from exc


def make_segmenter(cfg: RunConfig):
    from .segment import BaselineSegmenter, NullSegmenter, OracleSegmenter

    if cfg.segmenter == "baseline":
        return BaselineSegmenter(cutoff=cfg.baseline_cutoff)
    if cfg.segmenter == "oracle":
        return OracleSegmenter()
    if cfg.segmenter == "null":
        return NullSegmenter()
    if cfg.segmenter.startswith("external:"):
        from .external import ExternalSegmenter

        return ExternalSegmenter(cfg.segmenter[len("external:"):])
    raise ConfigError(f"unknown segmenter {cfg.segmenter!r}")
