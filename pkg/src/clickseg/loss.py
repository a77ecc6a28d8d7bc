"""Click-localized loss terms as pure functions: distance-based point
weights, softmax assignment, weighted cross-entropy and soft dice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, InputError
from .segment import Heatmap
from .types import Click

PROB_FLOOR = 1e-12


@dataclass
class LossConfig:
    lambda_ce: float = 1.0
    lambda_dice: float = 1.0
    w_max: float = 2.0
    w_min: float = 1.0
    delta: float = 2.0  # meters
    dice_eps: float = 1e-6

    def __post_init__(self):
        if not (self.w_max >= self.w_min > 0):
            raise ConfigError("need w_max >= w_min > 0")
        if self.delta <= 0 or self.dice_eps <= 0:
            raise ConfigError("delta and dice_eps must be positive")
        if self.lambda_ce < 0 or self.lambda_dice < 0:
            raise ConfigError("loss weights must be non-negative")


def local_weights(positions: np.ndarray, clicks: list[Click], cfg: LossConfig) -> np.ndarray:
    """Per-point weights decreasing linearly from w_max at a click to
    w_min at distance delta, w_min beyond. No clicks: all w_min."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if not clicks:
        return np.full(len(positions), cfg.w_min)
    click_pos = np.array([c.position for c in clicks], dtype=np.float64)
    d = np.sqrt(kernels.min_dist2(positions, click_pos))
    d_norm = np.minimum(d / cfg.delta, 1.0)
    return cfg.w_max - (cfg.w_max - cfg.w_min) * d_norm


def soft_assign(heat: Heatmap) -> np.ndarray:
    """Row-stochastic softmax over the id dimension, shape (N, I)."""
    if len(heat.id_list) < 1:
        raise InputError("heatmap has no object rows")
    scores = heat.scores.T  # (N, I)
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_shapes(probs, gt_ids, weights, id_list):
    probs = np.asarray(probs, dtype=np.float64)
    gt_ids = np.asarray(gt_ids)
    weights = np.asarray(weights, dtype=np.float64)
    if probs.shape[0] != len(gt_ids) or len(gt_ids) != len(weights):
        raise InputError("probs, gt_ids, weights must agree in length")
    id_list = np.asarray(id_list)
    id_to_row = {int(i): r for r, i in enumerate(id_list)}
    try:
        rows = np.array([id_to_row[int(g)] for g in gt_ids], dtype=np.int64)
    except KeyError as exc:
        raise InputError(f"gt id {exc.args[0]} has no probability row") from exc
    return probs, gt_ids, weights, rows


def weighted_ce(probs, gt_ids, weights, id_list) -> float:
    """(1/N) sum_p w_p * (-log p_true(p)), probabilities clamped below."""
    probs, gt_ids, weights, rows = _check_shapes(probs, gt_ids, weights, id_list)
    p_true = np.clip(probs[np.arange(len(rows)), rows], PROB_FLOOR, 1.0)
    return float(np.mean(weights * (-np.log(p_true))))


def weighted_dice(probs, gt_ids, weights, id_list, eps: float = 1e-6) -> float:
    """Weighted soft dice, averaged over ids present in the ground truth."""
    probs, gt_ids, weights, _ = _check_shapes(probs, gt_ids, weights, id_list)
    id_list = np.asarray(id_list)
    present = [int(i) for i in np.unique(gt_ids)]
    terms = []
    for oid in present:
        row = int(np.nonzero(id_list == oid)[0][0])
        p = probs[:, row]
        g = (gt_ids == oid).astype(np.float64)
        num = 2.0 * np.sum(weights * p * g) + eps
        den = np.sum(weights * (p + g)) + eps
        terms.append(1.0 - num / den)
    return float(np.mean(terms))


def total_loss(probs, gt_ids, weights, id_list, cfg: LossConfig) -> float:
    loss = 0.0
    if cfg.lambda_ce:
        loss += cfg.lambda_ce * weighted_ce(probs, gt_ids, weights, id_list)
    if cfg.lambda_dice:
        loss += cfg.lambda_dice * weighted_dice(probs, gt_ids, weights, id_list, cfg.dice_eps)
    return float(loss)
