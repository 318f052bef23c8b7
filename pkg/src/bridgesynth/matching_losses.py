"""Mask matching costs, Hungarian assignment and the layered mask/class loss.

Masks are 1D arrays over the same ``P`` points. Predictions carry a soft
foreground probability per point and a probability vector over the five
semantic classes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_EPS = 1e-7
NUM_CLASSES = 5


@dataclass(frozen=True)
class LossWeights:
    lambda_dice: float = 2.0
    lambda_bce: float = 5.0
    lambda_cl: float = 2.0

    def __post_init__(self):
        if min(self.lambda_dice, self.lambda_bce, self.lambda_cl) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class GroundTruthInstance:
    mask: np.ndarray
    label: int

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 1 or not np.all((mask == 0) | (mask == 1)):
            raise ValueError("ground-truth mask must be a 1D binary array")
        if not 0 <= int(self.label) < NUM_CLASSES:
            raise ValueError(f"class label must be in [0, {NUM_CLASSES})")
        object.__setattr__(self, "mask", mask.astype(np.float64))
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class Assignment:
    pairs: tuple
    unmatched_preds: tuple = ()
    unmatched_gts: tuple = ()

    @property
    def pred_indices(self):
        return [p for p, _ in self.pairs]

    @property
    def gt_indices(self):
        return [g for _, g in self.pairs]


def _soft_mask(pred, n=None):
    p = np.asarray(pred, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("masks must be 1D")
    if n is not None and len(p) != n:
        raise ValueError(f"mask length {len(p)} does not match {n}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("mask probabilities must lie in [0, 1]")
    return p


def dice_loss(pred, gt):
    """``1 - 2 sum(p g) / (sum(p) + sum(g))``; zero when both masks are empty."""
    p = _soft_mask(pred)
    g = _soft_mask(gt, len(p))
    denom = p.sum() + g.sum()
    if denom == 0:
        return 0.0
    return float(1.0 - 2.0 * np.dot(p, g) / denom)


def bce_mask_loss(pred, gt):
    """Mean binary cross-entropy over all points (foreground and background)."""
    p = np.clip(_soft_mask(pred), PROB_EPS, 1.0 - PROB_EPS)
    g = _soft_mask(gt, len(p))
    if len(p) == 0:
        return 0.0
    return float(-np.mean(g * np.log(p) + (1.0 - g) * np.log1p(-p)))


def ce_class_loss(class_probs, gt_class):
    probs = np.asarray(class_probs, dtype=np.float64)
    if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError("class_probs must be a probability vector")
    if not 0 <= gt_class < len(probs):
        raise ValueError("gt_class out of range")
    return float(-np.log(np.clip(probs[gt_class], PROB_EPS, 1.0 - PROB_EPS)))


def build_cost_matrix(preds, gts, weights=None):
    """Pairwise matching cost between predictions and ground-truth instances.

    ``preds`` is a list of ``(soft_mask, class_probs)``; entry ``(i, j)`` is
    ``lambda_dice * dice + lambda_bce * bce + lambda_cl * ce`` for prediction
    ``i`` against instance ``j``.
    """
    w = weights or LossWeights()
    masks = [np.asarray(m, dtype=np.float64) for m, _ in preds]
    sizes = {len(m) for m in masks} | {len(g.mask) for g in gts}
    if len(sizes) > 1:
        raise ValueError(f"all masks must share one point count, got {sorted(sizes)}")
    cost = np.zeros((len(preds), len(gts)))
    for i, (mask, probs) in enumerate(preds):
        for j, gt in enumerate(gts):
            cost[i, j] = (w.lambda_dice * dice_loss(mask, gt.mask)
                          + w.lambda_bce * bce_mask_loss(mask, gt.mask)
                          + w.lambda_cl * ce_class_loss(probs, gt.label))
    return cost


def hungarian_assign(cost):
    """Minimum-cost one-to-one matching of ``min(rows, cols)`` pairs.

    Shortest augmenting paths with row/column potentials, O(n^2 m).
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        rows = cost.shape[0] if cost.ndim == 2 else 0
        cols = cost.shape[1] if cost.ndim == 2 else 0
        return Assignment((), tuple(range(rows)), tuple(range(cols)))
    if cost.ndim != 2:
        raise ValueError("cost must be a 2D matrix")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    transposed = cost.shape[0] > cost.shape[1]
    c = cost.T if transposed else cost
    n, m = c.shape

    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=np.int64)  # match[j] = row (1-based) owning column j
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            cur = c[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    pairs = sorted((int(match[j]) - 1, j - 1) for j in range(1, m + 1) if match[j])
    if transposed:
        pairs = sorted((col, row) for row, col in pairs)
    preds = {p for p, _ in pairs}
    gts = {g for _, g in pairs}
    return Assignment(
        tuple(pairs),
        tuple(i for i in range(cost.shape[0]) if i not in preds),
        tuple(j for j in range(cost.shape[1]) if j not in gts),
    )


def assignment_cost(cost, assignment):
    cost = np.asarray(cost, dtype=np.float64)
    return float(sum(cost[i, j] for i, j in assignment.pairs))


def matched_mask_loss(assignment, preds, gts, weights=None):
    """Sum of ``lambda_bce * bce + lambda_dice * dice`` over matched pairs."""
    w = weights or LossWeights()
    total = 0.0
    for i, j in assignment.pairs:
        if not (0 <= i < len(preds) and 0 <= j < len(gts)):
            raise ValueError(f"assignment pair {(i, j)} out of range")
        mask = preds[i][0] if isinstance(preds[i], tuple) else preds[i]
        total += (w.lambda_bce * bce_mask_loss(mask, gts[j].mask)
                  + w.lambda_dice * dice_loss(mask, gts[j].mask))
    return float(total)


def total_loss(per_layer, lambda_cl=2.0):
    """Sum over decoder layers of ``mask_loss + lambda_cl * ce_loss``."""
    per_layer = list(per_layer)
    if not per_layer:
        raise ValueError("total_loss needs at least one layer")
    return float(sum(mask + lambda_cl * ce for mask, ce in per_layer))
