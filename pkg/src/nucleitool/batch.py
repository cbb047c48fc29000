"""Dataset-level operations shared by the command line and notebooks.

Each function maps a per-image operation over a batch with
:func:`nucleitool.parallel.map_indices` and merges the results in image
order, so outputs do not depend on the worker count.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .augment import augment_sample
from .core import LabeledImage, ShapeMismatch, check_consistency
from .dataset import MapStack, labels_array
from .encoder import encode_targets
from .ensemble import EmptyEnsemble, average_predictions
from .losses import TERM_NAMES, ClassWeights, LossWeights, loss_breakdown
from .metrics import PqStats, counts_from_classes, metrics_report, pq_stats_from_maps
from .parallel import map_indices
from .postprocess import PostprocessParams, postprocess_maps

MASK64 = (1 << 64) - 1


def _label(labels: np.ndarray, i: int, images=None) -> LabeledImage:
    rgb = images[i] if images is not None else None
    return LabeledImage.from_maps(labels[i, ..., 0], labels[i, ..., 1], rgb)


def _encode_one(i, labels):
    return encode_targets(_label(labels, i))


def encode_labels(labels: np.ndarray, threads: int = 1) -> MapStack:
    """Targets for every image of an (N, H, W, 2) labels array."""
    return MapStack.from_items(map_indices(_encode_one, len(labels), (labels,), threads))


def _postprocess_one(i, maps, params):
    return postprocess_maps(maps.prediction(i), params)


def postprocess_stack(maps: MapStack, params: PostprocessParams = PostprocessParams(),
                      threads: int = 1) -> np.ndarray:
    """Decode a prediction stack into an (N, H, W, 2) labels array."""
    results = map_indices(_postprocess_one, len(maps), (maps, params), threads)
    inst_maps, cls_maps = [], []
    for inst, classes in results:
        lut = np.zeros(int(inst.max()) + 1, dtype=np.int32)
        for k, c in classes.items():
            lut[k] = c
        inst_maps.append(inst)
        cls_maps.append(lut[inst])
    return labels_array(inst_maps, cls_maps)


def _ensemble_one(i, stacks):
    return average_predictions([s.prediction(i) for s in stacks])


def ensemble_stacks(stacks: Sequence[MapStack], threads: int = 1) -> MapStack:
    """Branch-wise average of several models' prediction stacks."""
    stacks = list(stacks)
    if not stacks:
        raise EmptyEnsemble("need at least one prediction directory")
    n = len(stacks[0])
    if any(len(s) != n for s in stacks):
        raise ShapeMismatch("prediction directories hold different numbers of images")
    return MapStack.from_items(map_indices(_ensemble_one, n, (stacks,), threads))


def _evaluate_one(i, gt, pred):
    g_inst, g_cls = gt[i, ..., 0], gt[i, ..., 1]
    p_inst, p_cls = pred[i, ..., 0], pred[i, ..., 1]
    g_classes = check_consistency(g_inst, g_cls)
    p_classes = check_consistency(p_inst, p_cls)
    stats = pq_stats_from_maps(g_inst, g_classes, p_inst, p_classes)
    return stats, counts_from_classes(g_classes), counts_from_classes(p_classes)


def evaluate_labels(gt: np.ndarray, pred: np.ndarray, threads: int = 1) -> dict:
    """mPQ+ and count R^2 of predicted labels against ground truth."""
    if gt.shape != pred.shape:
        raise ShapeMismatch(f"gt labels {gt.shape} vs predicted labels {pred.shape}")
    results = map_indices(_evaluate_one, len(gt), (gt, pred), threads)
    stats = PqStats()
    for s, _, _ in results:
        stats = stats + s
    gt_counts = np.stack([r[1] for r in results]) if results else np.zeros((0, 6), np.int64)
    pred_counts = np.stack([r[2] for r in results]) if results else np.zeros((0, 6), np.int64)
    return metrics_report(stats, gt_counts, pred_counts)


def _count_one(i, labels):
    return counts_from_classes(check_consistency(labels[i, ..., 0], labels[i, ..., 1]))


def count_table(labels: np.ndarray, threads: int = 1) -> np.ndarray:
    rows = map_indices(_count_one, len(labels), (labels,), threads)
    return np.stack(rows) if rows else np.zeros((0, 6), dtype=np.int64)


def image_seed(seed: int, index: int) -> int:
    """Seed used for image ``index`` of a batch augmented with ``seed``."""
    return (seed + index) & MASK64


def _augment_one(i, images, labels, seed):
    return augment_sample(_label(labels, i, images), image_seed(seed, i))


def augment_dataset(images: np.ndarray, labels: np.ndarray, seed: int,
                    threads: int = 1) -> tuple[np.ndarray, np.ndarray, MapStack]:
    """Augment every image; returns (images, labels, regenerated targets)."""
    if len(images) != len(labels):
        raise ShapeMismatch(f"{len(images)} images but {len(labels)} labels")
    results = map_indices(_augment_one, len(images), (images, labels, seed), threads)
    out_images = np.stack([lab.rgb for lab, _ in results]).astype(np.uint8)
    out_labels = labels_array([lab.inst for lab, _ in results], [lab.cls for lab, _ in results])
    return out_images, out_labels, MapStack.from_items(t for _, t in results)


def _loss_one(i, pred, target, cw, lw):
    return loss_breakdown(pred.prediction(i), target.target(i), cw, lw)


def loss_stack(pred: MapStack, target: MapStack, cw: ClassWeights = ClassWeights(),
               lw: LossWeights = LossWeights(), threads: int = 1) -> dict[str, float]:
    """Per-term weighted losses averaged over the images of a batch."""
    if len(pred) != len(target):
        raise ShapeMismatch(f"{len(pred)} predictions but {len(target)} targets")
    rows = map_indices(_loss_one, len(pred), (pred, target, cw, lw), threads)
    keys = TERM_NAMES + ("total",)
    if not rows:
        return {k: 0.0 for k in keys}
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}
