"""Instance-segmentation scoring (AP at IoU thresholds) and DBSCAN utilities."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np

from .geometry import CLASS_NAMES

MAP_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
ALL_THRESHOLDS = (0.25,) + MAP_THRESHOLDS


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.92
    min_pts: int = 4

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if int(self.min_pts) < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True, eq=False)
class InstancePrediction:
    indices: np.ndarray
    label: int
    confidence: float = 1.0

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64).reshape(-1))
        if len(idx) == 0:
            raise ValueError("prediction mask must not be empty")
        if idx[0] < 0:
            raise ValueError("point indices must be non-negative")
        if not 0.0 <= float(self.confidence) <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "confidence", float(self.confidence))


def _as_index_set(s):
    return np.unique(np.asarray(list(s) if isinstance(s, (set, frozenset)) else s,
                                dtype=np.int64).reshape(-1))


def instance_iou(a, b):
    """Intersection over union of two point-index sets (0 when both are empty)."""
    a, b = _as_index_set(a), _as_index_set(b)
    inter = len(np.intersect1d(a, b, assume_unique=True))
    union = len(a) + len(b) - inter
    return inter / union if union else 0.0


def precision(tp, fp):
    if tp < 0 or fp < 0:
        raise ValueError("counts must be non-negative")
    return tp / (tp + fp) if tp + fp else 0.0


def average_precision(is_tp, n_gt):
    """Area under the all-points interpolated precision envelope.

    ``is_tp`` lists match outcomes in descending-confidence order.
    """
    if n_gt == 0:
        return 0.0
    is_tp = np.asarray(is_tp, dtype=bool)
    if not is_tp.any():
        return 0.0
    tp = np.cumsum(is_tp)
    prec = tp / np.arange(1, len(is_tp) + 1)
    envelope = np.maximum.accumulate(prec[::-1])[::-1]
    # each true positive raises recall by exactly 1 / n_gt
    return float(envelope[is_tp].sum() / n_gt)


@dataclass
class EvalReport:
    ap: dict = field(default_factory=dict)  # class -> {threshold: AP}
    gt_counts: dict = field(default_factory=dict)
    pred_counts: dict = field(default_factory=dict)

    def _mean(self, thresholds):
        classes = [c for c in self.ap if self.gt_counts.get(c, 0) > 0]
        if not classes:
            return 0.0
        return float(np.mean([np.mean([self.ap[c][t] for t in thresholds]) for c in classes]))

    @property
    def mAP(self):
        return self._mean(MAP_THRESHOLDS)

    @property
    def mAP50(self):
        return self._mean((0.5,))

    @property
    def mAP25(self):
        return self._mean((0.25,))

    def class_ap(self, label, threshold):
        return self.ap[label][threshold]

    def to_dict(self):
        return {
            "mAP": self.mAP,
            "mAP50": self.mAP50,
            "mAP25": self.mAP25,
            "per_class": {
                CLASS_NAMES.get(c, str(c)): {
                    "class_id": c,
                    "gt_count": self.gt_counts.get(c, 0),
                    "pred_count": self.pred_counts.get(c, 0),
                    "mAP": float(np.mean([self.ap[c][t] for t in MAP_THRESHOLDS])),
                    "AP": {f"{t:.2f}": self.ap[c][t] for t in sorted(self.ap[c])},
                }
                for c in sorted(self.ap)
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def format_table(rows):
    """Plain-text table with one row per experiment and mAP / mAP50 / mAP25 columns.

    ``rows`` maps an experiment name to an :class:`EvalReport`.
    """
    rows = dict(rows)
    width = max([len("Experiment")] + [len(str(k)) for k in rows])
    header = f"{'Experiment':<{width}}  {'mAP':>6}  {'mAP50':>6}  {'mAP25':>6}"
    lines = [header, "-" * len(header)]
    for name, rep in rows.items():
        lines.append(f"{str(name):<{width}}  {rep.mAP:>6.3f}  {rep.mAP50:>6.3f}  {rep.mAP25:>6.3f}")
    return "\n".join(lines)


def evaluate_ap(preds, gts, thresholds=ALL_THRESHOLDS):
    """Per-class AP at each IoU threshold.

    ``gts`` is a list of ``(index_set, class)``. Predictions are visited in
    descending confidence (ties by input order) and each one claims the
    unmatched same-class instance with highest IoU if that IoU reaches the
    threshold. Classes without ground truth are left out of the means.
    """
    preds = list(preds)
    for p in preds:
        if not 0.0 <= p.confidence <= 1.0:
            raise ValueError(f"confidence {p.confidence} outside [0, 1]")
    gt_sets = [(_as_index_set(s), int(c)) for s, c in gts]
    thresholds = tuple(sorted(set(thresholds) | {0.25, 0.5} | set(MAP_THRESHOLDS)))

    classes = sorted({c for _, c in gt_sets} | {p.label for p in preds})
    report = EvalReport()
    for cls in classes:
        cls_gts = [s for s, c in gt_sets if c == cls]
        cls_preds = [p for p in preds if p.label == cls]
        order = sorted(range(len(cls_preds)), key=lambda k: (-cls_preds[k].confidence, k))
        iou = np.zeros((len(cls_preds), len(cls_gts)))
        for i, p in enumerate(cls_preds):
            for j, g in enumerate(cls_gts):
                iou[i, j] = instance_iou(p.indices, g)
        report.gt_counts[cls] = len(cls_gts)
        report.pred_counts[cls] = len(cls_preds)
        report.ap[cls] = {}
        for t in thresholds:
            taken = np.zeros(len(cls_gts), dtype=bool)
            outcome = []
            for i in order:
                best, best_iou = -1, -1.0
                for j in range(len(cls_gts)):
                    if not taken[j] and iou[i, j] > best_iou:
                        best, best_iou = j, iou[i, j]
                if best >= 0 and best_iou >= t - 1e-12:
                    taken[best] = True
                    outcome.append(True)
                else:
                    outcome.append(False)
            report.ap[cls][t] = average_precision(outcome, len(cls_gts))
    return report


# --------------------------------------------------------------------- DBSCAN

@numba.njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@numba.njit(cache=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@numba.njit(cache=True)
def _lookup(cell_keys, key):
    k = np.searchsorted(cell_keys, key)
    if k < len(cell_keys) and cell_keys[k] == key:
        return k
    return -1


@numba.njit(cache=True)
def _grid_dbscan(pts, order, cell_keys, cell_start, cell_end, cell_coord, dims,
                 eps, min_pts, cell_size):
    n = len(pts)
    n_cells = len(cell_keys)
    eps2 = eps * eps
    core = np.zeros(n, dtype=np.bool_)

    # neighbour offsets whose cells can hold a point within eps
    offsets = []
    for dx in range(-2, 3):
        for dy in range(-2, 3):
            for dz in range(-2, 3):
                gx = max(abs(dx) - 1, 0)
                gy = max(abs(dy) - 1, 0)
                gz = max(abs(dz) - 1, 0)
                if (gx * gx + gy * gy + gz * gz) * cell_size * cell_size <= eps2:
                    offsets.append((dx, dy, dz))

    def neighbour_cell(c, off):
        x = cell_coord[c, 0] + off[0]
        y = cell_coord[c, 1] + off[1]
        z = cell_coord[c, 2] + off[2]
        if x < 0 or y < 0 or z < 0 or x >= dims[0] or y >= dims[1] or z >= dims[2]:
            return -1
        return _lookup(cell_keys, (x * dims[1] + y) * dims[2] + z)

    # core points: dense cells are all core, others are counted explicitly
    for c in range(n_cells):
        if cell_end[c] - cell_start[c] >= min_pts:
            for s in range(cell_start[c], cell_end[c]):
                core[order[s]] = True
            continue
        for s in range(cell_start[c], cell_end[c]):
            i = order[s]
            cnt = 0
            for off in offsets:
                nc = neighbour_cell(c, off)
                if nc < 0:
                    continue
                for t in range(cell_start[nc], cell_end[nc]):
                    j = order[t]
                    d0 = pts[i, 0] - pts[j, 0]
                    d1 = pts[i, 1] - pts[j, 1]
                    d2 = pts[i, 2] - pts[j, 2]
                    if d0 * d0 + d1 * d1 + d2 * d2 <= eps2:
                        cnt += 1
                        if cnt >= min_pts:
                            break
                if cnt >= min_pts:
                    break
            if cnt >= min_pts:
                core[i] = True

    parent = np.arange(n)
    for c in range(n_cells):
        first = -1
        for s in range(cell_start[c], cell_end[c]):
            i = order[s]
            if core[i]:
                if first < 0:
                    first = i
                else:
                    _union(parent, first, i)
        if first < 0:
            continue
        for off in offsets:
            nc = neighbour_cell(c, off)
            if nc <= c:
                continue
            if _find(parent, first) == _find(parent, order[cell_start[nc]]) and core[order[cell_start[nc]]]:
                continue
            linked = False
            for s in range(cell_start[c], cell_end[c]):
                i = order[s]
                if not core[i]:
                    continue
                for t in range(cell_start[nc], cell_end[nc]):
                    j = order[t]
                    if not core[j]:
                        continue
                    d0 = pts[i, 0] - pts[j, 0]
                    d1 = pts[i, 1] - pts[j, 1]
                    d2 = pts[i, 2] - pts[j, 2]
                    if d0 * d0 + d1 * d1 + d2 * d2 <= eps2:
                        _union(parent, i, j)
                        linked = True
                        break
                if linked:
                    break

    roots = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if core[i]:
            roots[i] = _find(parent, i)
    # border points join the reachable cluster whose lowest core index is smallest
    for c in range(n_cells):
        for s in range(cell_start[c], cell_end[c]):
            i = order[s]
            if core[i]:
                continue
            best = -1
            for off in offsets:
                nc = neighbour_cell(c, off)
                if nc < 0:
                    continue
                for t in range(cell_start[nc], cell_end[nc]):
                    j = order[t]
                    if not core[j]:
                        continue
                    d0 = pts[i, 0] - pts[j, 0]
                    d1 = pts[i, 1] - pts[j, 1]
                    d2 = pts[i, 2] - pts[j, 2]
                    if d0 * d0 + d1 * d1 + d2 * d2 <= eps2:
                        r = roots[j]
                        if best < 0 or r < best:
                            best = r
            roots[i] = best
    return roots


def canonical_labels(roots):
    """Renumber cluster ids 0, 1, ... by each cluster's lowest point index."""
    roots = np.asarray(roots)
    labels = np.full(len(roots), -1, dtype=np.int64)
    valid = roots >= 0
    if valid.any():
        _, first, inverse = np.unique(roots[valid], return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        labels[valid] = rank[inverse.reshape(-1)]
    return labels


def dbscan(points, params=None):
    """Density-based clustering; returns one label per point, ``-1`` for noise.

    Neighbourhoods are closed balls of radius ``eps`` that include the point
    itself. A border point reachable from several clusters joins the one
    whose lowest core-point index is smallest, and clusters are numbered in
    order of their lowest point index.
    """
    params = params or DbscanParams()
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    # shrink a hair so rounding never puts two same-cell points beyond eps
    cell_size = params.eps / np.sqrt(3.0) * (1.0 - 1e-9)
    coords = np.floor((pts - pts.min(axis=0)) / cell_size).astype(np.int64)
    dims = coords.max(axis=0) + 1
    if float(dims[0]) * float(dims[1]) * float(dims[2]) > 2.0 ** 62:
        raise ValueError("point extent too large for eps; grid index would overflow")
    keys = (coords[:, 0] * dims[1] + coords[:, 1]) * dims[2] + coords[:, 2]
    order = np.argsort(keys, kind="stable")
    cell_keys, cell_start, counts = np.unique(keys[order], return_index=True, return_counts=True)
    cell_end = cell_start + counts
    cell_coord = coords[order[cell_start]]
    roots = _grid_dbscan(pts, order, cell_keys, cell_start.astype(np.int64),
                         cell_end.astype(np.int64), cell_coord, dims.astype(np.int64),
                         float(params.eps), int(params.min_pts), float(cell_size))
    return canonical_labels(roots)


def refine_instances_dbscan(cloud, preds, params=None):
    """Split each prediction into its DBSCAN clusters, dropping noise points."""
    params = params or DbscanParams()
    positions = cloud.positions if hasattr(cloud, "positions") else np.asarray(cloud)
    out = []
    for pred in preds:
        labels = dbscan(positions[pred.indices], params)
        for k in range(labels.max() + 1 if len(labels) else 0):
            out.append(InstancePrediction(pred.indices[labels == k], pred.label, pred.confidence))
    return out


def baseline_segment(cloud, params=None):
    """Cluster each semantic class separately; every cluster is one instance."""
    params = params or DbscanParams()
    out = []
    for cls in np.unique(cloud.semantic):
        idx = np.flatnonzero(cloud.semantic == cls)
        labels = dbscan(cloud.positions[idx], params)
        for k in range(labels.max() + 1):
            out.append(InstancePrediction(idx[labels == k], int(cls), 1.0))
    return out


def ground_truth_instances(cloud):
    """``(indices, class)`` per distinct instance label; class by majority vote."""
    gts = []
    for inst in np.unique(cloud.instance):
        idx = np.flatnonzero(cloud.instance == inst)
        cls = int(np.bincount(cloud.semantic[idx]).argmax())
        gts.append((idx, cls))
    return gts


def predictions_to_json(preds):
    return json.dumps({"instances": [
        {"indices": p.indices.tolist(), "class": p.label, "confidence": p.confidence}
        for p in preds
    ]})


def predictions_from_json(text):
    data = json.loads(text)
    try:
        items = data["instances"]
        return [InstancePrediction(it["indices"], it["class"], it.get("confidence", 1.0))
                for it in items]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed prediction file: {exc}") from exc
