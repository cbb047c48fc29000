"""Regression and classification targets for a labelled patch.

Two distance groups are produced for every instance: the horizontal/vertical
pair and the pair along the two 45 degree diagonals. Offsets are taken from
the instance centroid (mean pixel coordinate) and each channel is scaled per
instance so that its positive side peaks at +1 and its negative side at -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import N_TYPES, LabeledImage, check_consistency

Axes = Literal["hv", "dg"]


@dataclass
class TargetMaps:
    np: np.ndarray  # (H, W) uint8 foreground
    hv: np.ndarray  # (2, H, W)
    dg: np.ndarray  # (2, H, W)
    tp: np.ndarray  # (7, H, W) one-hot

    def as_prediction(self):
        """View the targets as a perfect prediction."""
        from .core import PredictionMaps

        return PredictionMaps(
            np_prob=self.np.astype(np.float64),
            hv=self.hv,
            dg=self.dg,
            tp_prob=self.tp.astype(np.float64),
        )


def _normalize_channel(num: np.ndarray, lab: np.ndarray, n_labels: int) -> np.ndarray:
    # num holds exact integer offsets (scaled by instance size), so the
    # division below is a single correctly rounded operation and sign flips of
    # the input flip the output bit-for-bit.
    pos_max = np.zeros(n_labels, dtype=np.int64)
    neg_min = np.zeros(n_labels, dtype=np.int64)
    np.maximum.at(pos_max, lab, num)
    np.minimum.at(neg_min, lab, num)
    out = np.zeros(num.shape, dtype=np.float64)
    pos = num > 0
    neg = num < 0
    out[pos] = num[pos] / pos_max[lab[pos]]
    out[neg] = num[neg] / -neg_min[lab[neg]]
    return out


def encode_distance_group(inst: np.ndarray, axes: Axes = "hv") -> np.ndarray:
    """Per-instance normalized centroid offsets.

    For ``axes="hv"`` channel 0 is the column offset and channel 1 the row
    offset. For ``axes="dg"`` the channels are ``dc + dr`` and ``dc - dr``.

    Args:
        inst: (H, W) instance id map, 0 for background.
        axes: which distance group to build.

    Returns:
        (2, H, W) float64 array in [-1, 1], zero on background.
    """
    if axes not in ("hv", "dg"):
        raise ValueError(f"axes must be 'hv' or 'dg', got {axes!r}")
    inst = np.asarray(inst)
    out = np.zeros((2,) + inst.shape, dtype=np.float64)
    rows, cols = np.nonzero(inst > 0)
    if not len(rows):
        return out
    _, lab = np.unique(inst[rows, cols], return_inverse=True)
    lab = lab.ravel()
    n_labels = int(lab.max()) + 1
    count = np.bincount(lab, minlength=n_labels).astype(np.int64)
    sum_r = np.bincount(lab, weights=rows, minlength=n_labels).round().astype(np.int64)
    sum_c = np.bincount(lab, weights=cols, minlength=n_labels).round().astype(np.int64)
    # n * (coordinate - centroid), exact in integers
    dr = count[lab] * rows.astype(np.int64) - sum_r[lab]
    dc = count[lab] * cols.astype(np.int64) - sum_c[lab]
    if axes == "hv":
        d0, d1 = dc, dr
    else:
        d0, d1 = dc + dr, dc - dr
    out[0, rows, cols] = _normalize_channel(d0, lab, n_labels)
    out[1, rows, cols] = _normalize_channel(d1, lab, n_labels)
    return out


def encode_targets(label: LabeledImage) -> TargetMaps:
    """Build NP, HV, diagonal and TP targets for one labelled patch.

    Raises:
        InconsistentClass: if the label violates the instance/class invariants.
    """
    check_consistency(label.inst, label.cls)
    fg = (label.inst > 0).astype(np.uint8)
    tp = np.zeros((N_TYPES,) + label.shape, dtype=np.uint8)
    cls = label.cls.astype(np.intp)
    np.put_along_axis(tp, cls[None], 1, axis=0)
    return TargetMaps(
        np=fg,
        hv=encode_distance_group(label.inst, "hv"),
        dg=encode_distance_group(label.inst, "dg"),
        tp=tp,
    )
