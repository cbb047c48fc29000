"""Multi-class panoptic quality (mPQ+) and per-class count R^2.

mPQ+ accumulates matched-IoU sums and TP/FP/FN counts per class over a whole
dataset before forming PQ, so a class missing from individual patches causes
no 0/0. A ground-truth and a predicted nucleus match when they share a class
and their IoU is strictly above 0.5; such pairs are unique per instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    CLASS_NAMES,
    N_TYPES,
    InstanceSet,
    NucleiError,
    ShapeMismatch,
)

N_CLASSES = N_TYPES - 1
MATCH_IOU = 0.5


class NoClassesPresent(NucleiError, ValueError):
    pass


def _zeros_f():
    return np.zeros(N_CLASSES, dtype=np.float64)


def _zeros_i():
    return np.zeros(N_CLASSES, dtype=np.int64)


@dataclass
class PqStats:
    """Per-class accumulators; index 0 is class 1 (neutrophil)."""

    iou_sum: np.ndarray = field(default_factory=_zeros_f)
    tp: np.ndarray = field(default_factory=_zeros_i)
    fp: np.ndarray = field(default_factory=_zeros_i)
    fn: np.ndarray = field(default_factory=_zeros_i)

    def __add__(self, other: "PqStats") -> "PqStats":
        return PqStats(self.iou_sum + other.iou_sum, self.tp + other.tp,
                       self.fp + other.fp, self.fn + other.fn)

    def copy(self) -> "PqStats":
        return PqStats(self.iou_sum.copy(), self.tp.copy(), self.fp.copy(), self.fn.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PqStats):
            return NotImplemented
        return (np.array_equal(self.iou_sum, other.iou_sum) and np.array_equal(self.tp, other.tp)
                and np.array_equal(self.fp, other.fp) and np.array_equal(self.fn, other.fn))


def greedy_match(candidates: Sequence[tuple[int, int, float]]):
    """Greedy one-to-one matching over (g, p, iou) candidates, highest IoU first.

    Ties are broken by (g, p). With every candidate above 0.5 IoU no instance
    can appear in two candidates, so this is also the maximum matching.
    """
    matches = []
    used_g, used_p = set(), set()
    for g, p, v in sorted(candidates, key=lambda t: (-t[2], t[0], t[1])):
        if v > MATCH_IOU and g not in used_g and p not in used_p:
            used_g.add(g)
            used_p.add(p)
            matches.append((g, p, v))
    return matches


def match_instances(gt: Sequence, pred: Sequence):
    """Match two lists of pixel sets at IoU > 0.5.

    Returns:
        (matches, unmatched_gt, unmatched_pred): matches are (g, p, iou)
        tuples of list indices; the unmatched entries are sorted index lists.
    """
    owner = {}
    for g, pixels in enumerate(gt):
        for px in pixels:
            owner[tuple(px)] = g
    overlaps = {}
    for p, pixels in enumerate(pred):
        for px in pixels:
            g = owner.get(tuple(px))
            if g is not None:
                overlaps[(g, p)] = overlaps.get((g, p), 0) + 1
    gt_area = [len(set(map(tuple, s))) for s in gt]
    pred_area = [len(set(map(tuple, s))) for s in pred]
    candidates = []
    for (g, p), inter in overlaps.items():
        v = inter / (gt_area[g] + pred_area[p] - inter)
        candidates.append((g, p, v))
    matches = greedy_match(candidates)
    mg = {m[0] for m in matches}
    mp = {m[1] for m in matches}
    return (matches,
            [g for g in range(len(gt)) if g not in mg],
            [p for p in range(len(pred)) if p not in mp])


def pq_stats_from_maps(gt_inst: np.ndarray, gt_classes: dict[int, int],
                       pred_inst: np.ndarray, pred_classes: dict[int, int]) -> PqStats:
    """PQ accumulators of one image given label maps and id -> class lookups."""
    if gt_inst.shape != pred_inst.shape:
        raise ShapeMismatch(f"gt shape {gt_inst.shape} != prediction shape {pred_inst.shape}")
    stats = PqStats()
    g_flat = gt_inst.ravel().astype(np.int64)
    p_flat = pred_inst.ravel().astype(np.int64)
    g_ids, g_area = np.unique(g_flat[g_flat > 0], return_counts=True)
    p_ids, p_area = np.unique(p_flat[p_flat > 0], return_counts=True)
    g_area = dict(zip(g_ids.tolist(), g_area.tolist()))
    p_area = dict(zip(p_ids.tolist(), p_area.tolist()))

    both = (g_flat > 0) & (p_flat > 0)
    base = int(p_flat.max()) + 1 if p_flat.size else 1
    codes, inter = np.unique(g_flat[both] * base + p_flat[both], return_counts=True)
    candidates = []
    for code, n in zip(codes.tolist(), inter.tolist()):
        g, p = divmod(code, base)
        if gt_classes[g] != pred_classes[p]:
            continue
        candidates.append((g, p, n / (g_area[g] + p_area[p] - n)))
    matches = greedy_match(candidates)
    matched_g = {g for g, _, _ in matches}
    matched_p = {p for _, p, _ in matches}
    for g, _, v in matches:
        c = gt_classes[g] - 1
        stats.tp[c] += 1
        stats.iou_sum[c] += v
    for g in g_area:
        if g not in matched_g:
            stats.fn[gt_classes[g] - 1] += 1
    for p in p_area:
        if p not in matched_p:
            stats.fp[pred_classes[p] - 1] += 1
    return stats


def accumulate_pq(stats: PqStats, gt: InstanceSet, pred: InstanceSet) -> PqStats:
    """Return ``stats`` plus the contribution of one (gt, pred) image pair."""
    if tuple(gt.shape) != tuple(pred.shape):
        raise ShapeMismatch(f"gt shape {gt.shape} != prediction shape {pred.shape}")
    g_inst, _ = gt.to_maps()
    p_inst, _ = pred.to_maps()
    return stats + pq_stats_from_maps(g_inst, gt.classes(), p_inst, pred.classes())


def pq_per_class(stats: PqStats) -> np.ndarray:
    """PQ of each class; NaN for classes with no instances at all."""
    denom = stats.tp + 0.5 * stats.fp + 0.5 * stats.fn
    out = np.full(N_CLASSES, np.nan)
    present = denom > 0
    out[present] = stats.iou_sum[present] / denom[present]
    return out


def mpq_plus(stats: PqStats) -> tuple[np.ndarray, float]:
    """Per-class PQ and their mean over classes present in the dataset.

    Raises:
        NoClassesPresent: if no class has any gt or predicted instance.
    """
    per_class = pq_per_class(stats)
    present = ~np.isnan(per_class)
    if not present.any():
        raise NoClassesPresent("no nucleus of any class in ground truth or prediction")
    return per_class, float(np.mean(per_class[present]))


def counts_from_instances(inst_sets: Sequence[InstanceSet]) -> np.ndarray:
    """(N, 6) count table: instances of each nucleus class per image."""
    table = np.zeros((len(inst_sets), N_CLASSES), dtype=np.int64)
    for i, s in enumerate(inst_sets):
        for inst in s:
            table[i, inst.cls - 1] += 1
    return table


def counts_from_classes(classes: dict[int, int]) -> np.ndarray:
    row = np.zeros(N_CLASSES, dtype=np.int64)
    for c in classes.values():
        row[c - 1] += 1
    return row


def r2_score(gt: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficient of determination per class column and its mean.

    A column with zero total variance scores 1.0 when predicted exactly and
    0.0 otherwise.
    """
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gt.shape != pred.shape:
        raise ShapeMismatch(f"count tables differ in shape: {gt.shape} vs {pred.shape}")
    ss_res = np.sum((gt - pred) ** 2, axis=0)
    ss_tot = np.sum((gt - gt.mean(axis=0)) ** 2, axis=0)
    per_class = np.empty(gt.shape[1])
    for c in range(gt.shape[1]):
        if ss_tot[c] > 0:
            per_class[c] = 1.0 - ss_res[c] / ss_tot[c]
        else:
            per_class[c] = 1.0 if ss_res[c] == 0 else 0.0
    return per_class, float(per_class.mean())


def metrics_report(stats: PqStats, gt_counts: np.ndarray, pred_counts: np.ndarray) -> dict:
    """JSON-ready summary: ``pq``, ``mpq_plus``, ``r2`` and ``r2_mean``."""
    names = CLASS_NAMES[1:]
    pq, mpq = mpq_plus(stats)
    r2, r2_mean = r2_score(gt_counts, pred_counts)
    return {
        "pq": {n: (None if np.isnan(v) else float(v)) for n, v in zip(names, pq)},
        "mpq_plus": mpq,
        "r2": {n: float(v) for n, v in zip(names, r2)},
        "r2_mean": r2_mean,
    }

