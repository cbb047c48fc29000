"""Branch-wise averaging of several models' prediction maps."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import NucleiError, PredictionMaps, ShapeMismatch


class EmptyEnsemble(NucleiError, ValueError):
    pass


def _mean(stack: np.ndarray) -> np.ndarray:
    # sorting along the model axis fixes the summation order, so the result
    # does not depend on the order the models were given in
    return np.sort(stack, axis=0).sum(axis=0) / stack.shape[0]


def average_predictions(preds: Sequence[PredictionMaps]) -> PredictionMaps:
    """Element-wise mean of each branch over the ensemble members.

    The class probabilities are renormalised per pixel after averaging.

    Raises:
        EmptyEnsemble: no predictions given.
        ShapeMismatch: members disagree on image size.
    """
    preds = list(preds)
    if not preds:
        raise EmptyEnsemble("need at least one prediction to average")
    shape = preds[0].shape
    for p in preds[1:]:
        if p.shape != shape:
            raise ShapeMismatch(f"prediction of shape {p.shape} does not match {shape}")
    np_prob = _mean(np.stack([np.asarray(p.np_prob, dtype=np.float64) for p in preds]))
    hv = _mean(np.stack([np.asarray(p.hv, dtype=np.float64) for p in preds]))
    dg = _mean(np.stack([np.asarray(p.dg, dtype=np.float64) for p in preds]))
    tp = _mean(np.stack([np.asarray(p.tp_prob, dtype=np.float64) for p in preds]))
    total = tp.sum(axis=0, keepdims=True)
    tp = np.divide(tp, total, out=np.full_like(tp, 1.0 / tp.shape[0]), where=total > 0)
    return PredictionMaps(np_prob=np_prob, hv=hv, dg=dg, tp_prob=tp)
