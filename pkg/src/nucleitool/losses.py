"""Training losses with closed-form gradients.

The stack mirrors the three decoder branches: cross-entropy and Dice on the
foreground map, MSE and Sobel-gradient MSE on both distance groups, and
class-weighted cross-entropy plus mean per-class Dice on the type map.
Gradients are taken with respect to the raw map values (probabilities,
not logits), which is what the finite-difference checks perturb.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .core import N_TYPES, PredictionMaps, ShapeMismatch
from .encoder import TargetMaps
from .postprocess import SOBEL_X, SOBEL_Y, correlate3x3, correlate3x3_adjoint

PROB_CLAMP = 1e-7
DICE_EPS = 1e-3

# background, neutrophil, epithelial, lymphocyte, plasma, eosinophil, connective
DEFAULT_CLASS_WEIGHTS = (0.1, 0.8, 0.2, 0.2, 0.2, 0.8, 0.2)

TERM_NAMES = ("np_ce", "np_dice", "mse_hv", "mse_dg", "gmse_hv", "gmse_dg", "tp_wce", "tp_dice")


@dataclass(frozen=True)
class ClassWeights:
    w: tuple[float, ...] = DEFAULT_CLASS_WEIGHTS

    def __post_init__(self):
        if any(x <= 0 for x in self.w):
            raise ValueError("class weights must be positive")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=np.float64)


@dataclass(frozen=True)
class LossWeights:
    np_ce: float = 1.0
    np_dice: float = 1.0
    dist_mse: float = 2.0
    dist_grad: float = 2.0
    tp_wce: float = 1.0
    tp_dice: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be non-negative")

    def for_term(self, term: str) -> float:
        return {
            "np_ce": self.np_ce,
            "np_dice": self.np_dice,
            "mse_hv": self.dist_mse,
            "mse_dg": self.dist_mse,
            "gmse_hv": self.dist_grad,
            "gmse_dg": self.dist_grad,
            "tp_wce": self.tp_wce,
            "tp_dice": self.tp_dice,
        }[term]


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} does not match {b.shape}")


# -- individual terms -------------------------------------------------------

def weighted_ce(pred_prob: np.ndarray, target_onehot: np.ndarray, w) -> float:
    """Mean over pixels of ``w[true] * -log(p[true])``.

    Args:
        pred_prob: (C, H, W) per-pixel probabilities.
        target_onehot: (C, H, W) one-hot targets.
        w: C class weights.
    """
    pred_prob = np.asarray(pred_prob, dtype=np.float64)
    target_onehot = np.asarray(target_onehot)
    _check_same(pred_prob, target_onehot)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (pred_prob.shape[0],):
        raise ShapeMismatch(f"{len(w)} class weights for {pred_prob.shape[0]} channels")
    true = np.argmax(target_onehot, axis=0)
    p_true = np.take_along_axis(pred_prob, true[None], axis=0)[0]
    p_true = np.clip(p_true, PROB_CLAMP, 1.0)
    return float(np.mean(w[true] * -np.log(p_true)))


def weighted_ce_grad(pred_prob: np.ndarray, target_onehot: np.ndarray, w) -> np.ndarray:
    pred_prob = np.asarray(pred_prob, dtype=np.float64)
    _check_same(pred_prob, np.asarray(target_onehot))
    w = np.asarray(w, dtype=np.float64)
    true = np.argmax(target_onehot, axis=0)
    p_true = np.take_along_axis(pred_prob, true[None], axis=0)[0]
    n = p_true.size
    inside = (p_true >= PROB_CLAMP) & (p_true <= 1.0)
    g_true = np.where(inside, -w[true] / (n * np.where(inside, p_true, 1.0)), 0.0)
    grad = np.zeros_like(pred_prob)
    np.put_along_axis(grad, true[None], g_true[None], axis=0)
    return grad


def dice_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Soft Dice loss ``1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps)``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same(pred, target)
    inter = np.sum(pred * target)
    denom = np.sum(pred) + np.sum(target) + DICE_EPS
    return float(1.0 - (2.0 * inter + DICE_EPS) / denom)


def dice_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    inter = np.sum(pred * target)
    denom = np.sum(pred) + np.sum(target) + DICE_EPS
    return -(2.0 * target * denom - (2.0 * inter + DICE_EPS)) / denom ** 2


def dist_mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared difference over every element."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same(pred, target)
    return float(np.mean((pred - target) ** 2))


def dist_mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    return 2.0 * (pred - np.asarray(target, dtype=np.float64)) / pred.size


def _gradient_residuals(pred, target):
    res_x = correlate3x3(pred[0], SOBEL_X) - correlate3x3(target[0], SOBEL_X)
    res_y = correlate3x3(pred[1], SOBEL_Y) - correlate3x3(target[1], SOBEL_Y)
    return res_x, res_y


def dist_grad_mse(pred: np.ndarray, target: np.ndarray, fg: np.ndarray) -> float:
    """MSE between Sobel gradients of two distance groups, over foreground.

    Channel 0 is compared through its column gradient and channel 1 through
    its row gradient. The squared errors of both channels are averaged over
    the ``2 * |fg|`` foreground entries; an empty foreground gives 0.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same(pred, target)
    fg = np.asarray(fg, dtype=bool)
    n_fg = int(fg.sum())
    if n_fg == 0:
        return 0.0
    res_x, res_y = _gradient_residuals(pred, target)
    return float((np.sum(res_x[fg] ** 2) + np.sum(res_y[fg] ** 2)) / (2 * n_fg))


def dist_grad_mse_grad(pred: np.ndarray, target: np.ndarray, fg: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fg = np.asarray(fg, dtype=bool)
    grad = np.zeros_like(pred)
    n_fg = int(fg.sum())
    if n_fg == 0:
        return grad
    res_x, res_y = _gradient_residuals(pred, target)
    scale = 2.0 / (2 * n_fg)
    grad[0] = correlate3x3_adjoint(scale * res_x * fg, SOBEL_X)
    grad[1] = correlate3x3_adjoint(scale * res_y * fg, SOBEL_Y)
    return grad


# -- full stack --------------------------------------------------------------

def _np_two_channel(np_prob: np.ndarray) -> np.ndarray:
    np_prob = np.asarray(np_prob, dtype=np.float64)
    return np.stack((1.0 - np_prob, np_prob))


def _np_onehot(np_target: np.ndarray) -> np.ndarray:
    t = np.asarray(np_target) > 0
    return np.stack((~t, t)).astype(np.float64)


def _check_pair(pred: PredictionMaps, target: TargetMaps) -> None:
    if pred.np_prob.shape != target.np.shape:
        raise ShapeMismatch(f"prediction {pred.np_prob.shape} vs target {target.np.shape}")
    for a, b in ((pred.hv, target.hv), (pred.dg, target.dg), (pred.tp_prob, target.tp)):
        _check_same(np.asarray(a), np.asarray(b))


def loss_terms(pred: PredictionMaps, target: TargetMaps,
               cw: ClassWeights = ClassWeights()) -> dict[str, float]:
    """Unweighted value of every loss term."""
    _check_pair(pred, target)
    fg = target.np > 0
    tp_t = np.asarray(target.tp, dtype=np.float64)
    tp_p = np.asarray(pred.tp_prob, dtype=np.float64)
    return {
        "np_ce": weighted_ce(_np_two_channel(pred.np_prob), _np_onehot(target.np), (1.0, 1.0)),
        "np_dice": dice_loss(pred.np_prob, fg),
        "mse_hv": dist_mse(pred.hv, target.hv),
        "mse_dg": dist_mse(pred.dg, target.dg),
        "gmse_hv": dist_grad_mse(pred.hv, target.hv, fg),
        "gmse_dg": dist_grad_mse(pred.dg, target.dg, fg),
        "tp_wce": weighted_ce(tp_p, tp_t, cw.as_array()),
        "tp_dice": sum(dice_loss(tp_p[c], tp_t[c]) for c in range(1, N_TYPES)) / (N_TYPES - 1),
    }


def loss_breakdown(pred: PredictionMaps, target: TargetMaps,
                   cw: ClassWeights = ClassWeights(),
                   lw: LossWeights = LossWeights()) -> dict[str, float]:
    """Weighted contribution of every term, plus their sum under ``"total"``."""
    raw = loss_terms(pred, target, cw)
    out = {name: lw.for_term(name) * raw[name] for name in TERM_NAMES}
    out["total"] = float(sum(out[name] for name in TERM_NAMES))
    return out


def total_loss(pred: PredictionMaps, target: TargetMaps,
               cw: ClassWeights = ClassWeights(), lw: LossWeights = LossWeights()) -> float:
    return loss_breakdown(pred, target, cw, lw)["total"]


def total_loss_grad(pred: PredictionMaps, target: TargetMaps,
                    cw: ClassWeights = ClassWeights(),
                    lw: LossWeights = LossWeights()) -> PredictionMaps:
    """Analytic derivative of :func:`total_loss` w.r.t. every prediction entry."""
    _check_pair(pred, target)
    fg = target.np > 0
    tp_t = np.asarray(target.tp, dtype=np.float64)
    tp_p = np.asarray(pred.tp_prob, dtype=np.float64)

    g2 = weighted_ce_grad(_np_two_channel(pred.np_prob), _np_onehot(target.np), (1.0, 1.0))
    g_np = lw.np_ce * (g2[1] - g2[0]) + lw.np_dice * dice_loss_grad(pred.np_prob, fg)

    g_hv = lw.dist_mse * dist_mse_grad(pred.hv, target.hv) \
        + lw.dist_grad * dist_grad_mse_grad(pred.hv, target.hv, fg)
    g_dg = lw.dist_mse * dist_mse_grad(pred.dg, target.dg) \
        + lw.dist_grad * dist_grad_mse_grad(pred.dg, target.dg, fg)

    g_tp = lw.tp_wce * weighted_ce_grad(tp_p, tp_t, cw.as_array())
    for c in range(1, N_TYPES):
        g_tp[c] += lw.tp_dice * dice_loss_grad(tp_p[c], tp_t[c]) / (N_TYPES - 1)
    return PredictionMaps(np_prob=g_np, hv=g_hv, dg=g_dg, tp_prob=g_tp)
