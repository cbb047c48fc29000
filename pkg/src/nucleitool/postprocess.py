"""Decode prediction maps into nucleus instances.

Both distance groups are turned into boundary-energy maps with a 3x3 Sobel
operator. The two energies are merged pixel-wise, keeping the stronger boundary
evidence (equivalently the smaller interior score ``1 - E``). Markers are
the confident low-energy foreground; a marker-controlled priority flood over
the merged energy then grows them into instances.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .core import (
    N_TYPES,
    InstanceSet,
    PredictionMaps,
    connected_components,
    instances_from_maps,
    relabel_raster,
)

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
EPS = 1e-6


@dataclass(frozen=True)
class PostprocessParams:
    t_fg: float = 0.5
    t_energy: float = 0.4
    min_size: int = 10

    def __post_init__(self):
        if not 0 < self.t_fg < 1:
            raise ValueError("t_fg must lie in (0, 1)")
        if not 0 < self.t_energy < 1:
            raise ValueError("t_energy must lie in (0, 1)")
        if self.min_size < 0:
            raise ValueError("min_size must be non-negative")


def correlate3x3(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """3x3 correlation with edge-replicated borders."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    padded = np.pad(image, 1, mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(3):
        for j in range(3):
            k = kernel[i, j]
            if k:
                out += k * padded[i:i + h, j:j + w]
    return out


def correlate3x3_adjoint(residual: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`correlate3x3` (transposed convolution, borders folded back)."""
    residual = np.asarray(residual, dtype=np.float64)
    h, w = residual.shape
    acc = np.zeros((h + 2, w + 2), dtype=np.float64)
    for i in range(3):
        for j in range(3):
            k = kernel[i, j]
            if k:
                acc[i:i + h, j:j + w] += k * residual
    # undo the edge padding: replicated cells feed their source pixel
    acc[1] += acc[0]
    acc[h] += acc[h + 1]
    acc[:, 1] += acc[:, 0]
    acc[:, w] += acc[:, w + 1]
    return acc[1:h + 1, 1:w + 1]


def sobel_gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (gx, gy): 3x3 Sobel responses along columns and rows."""
    return correlate3x3(image, SOBEL_X), correlate3x3(image, SOBEL_Y)


def _rescale(mag: np.ndarray) -> np.ndarray:
    lo = mag.min()
    return (mag - lo) / (mag.max() - lo + EPS)


def energy_map(group: np.ndarray) -> np.ndarray:
    """Boundary energy in [0, 1] from one distance group.

    Channel 0 is differentiated along columns and channel 1 along rows; each
    gradient magnitude is min-max rescaled over the image before the pixel-wise
    maximum is taken.
    """
    group = np.asarray(group, dtype=np.float64)
    gx = np.abs(correlate3x3(group[0], SOBEL_X))
    gy = np.abs(correlate3x3(group[1], SOBEL_Y))
    return np.maximum(_rescale(gx), _rescale(gy))


def combine_energies(e_hv: np.ndarray, e_dg: np.ndarray) -> np.ndarray:
    """Merge the two boundary energies.

    The merged interior score ``1 - E*`` is the pixel-wise minimum of the two
    interior scores, so ``E*`` is the pixel-wise maximum of the energies.
    """
    return np.maximum(e_hv, e_dg)


def extract_markers(np_prob: np.ndarray, energy: np.ndarray,
                    params: PostprocessParams = PostprocessParams()) -> np.ndarray:
    """Confident, low-energy foreground components, labelled 1..K."""
    fg = np_prob > params.t_fg
    markers = connected_components(fg & (energy < params.t_energy), 8)
    if params.min_size > 0 and markers.max() > 0:
        sizes = np.bincount(markers.ravel())
        small = sizes < params.min_size
        small[0] = False
        if small.any():
            markers[small[markers]] = 0
            markers = relabel_raster(markers)
    return markers


_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def watershed(energy: np.ndarray, markers: np.ndarray, fg: np.ndarray) -> np.ndarray:
    """Marker-controlled priority flood restricted to ``fg`` (8-connected).

    Marker pixels seed the queue in raster order. A pixel takes the label of
    the neighbour that first reaches it; the queue is ordered by
    (elevation, insertion counter), which makes the result deterministic.
    Foreground pixels with no path to a marker stay 0.
    """
    energy = np.asarray(energy, dtype=np.float64)
    fg = np.asarray(fg, dtype=bool)
    markers = np.asarray(markers)
    if np.any(markers[~fg] > 0):
        raise ValueError("markers must lie inside the foreground")
    h, w = fg.shape
    out = markers.astype(np.int32).copy()
    # 1-pixel frame of "blocked" cells avoids bounds checks in the loop
    open_ = np.zeros((h + 2, w + 2), dtype=bool)
    open_[1:-1, 1:-1] = fg & (out == 0)
    open_flat = open_.ravel()
    lab = np.zeros((h + 2, w + 2), dtype=np.int32)
    lab[1:-1, 1:-1] = out
    lab_flat = lab.ravel()
    elev = np.zeros((h + 2, w + 2), dtype=np.float64)
    elev[1:-1, 1:-1] = energy
    elev_flat = elev.ravel().tolist()
    stride = w + 2
    offsets = [dr * stride + dc for dr, dc in _NEIGHBOURS]

    heap = []
    counter = 0
    for p in np.flatnonzero(lab_flat).tolist():
        heap.append((elev_flat[p], counter, p))
        counter += 1
    heapq.heapify(heap)
    open_list = open_flat.tolist()
    lab_list = lab_flat.tolist()
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        _, _, p = pop(heap)
        label = lab_list[p]
        for off in offsets:
            q = p + off
            if open_list[q]:
                open_list[q] = False
                lab_list[q] = label
                push(heap, (elev_flat[q], counter, q))
                counter += 1
    lab = np.asarray(lab_list, dtype=np.int32).reshape(h + 2, w + 2)
    return lab[1:-1, 1:-1].copy()


def assign_classes(inst: np.ndarray, tp_prob: np.ndarray) -> dict[int, int]:
    """Nucleus class per instance.

    Majority vote of the per-pixel argmax, counting only nucleus classes. An
    instance whose pixels all vote background takes the nucleus class with the
    highest mean probability. Ties go to the smallest class id.
    """
    inst = np.asarray(inst)
    tp_prob = np.asarray(tp_prob, dtype=np.float64)
    fg = inst > 0
    if not fg.any():
        return {}
    ids, lab = np.unique(inst[fg], return_inverse=True)
    lab = lab.ravel()
    n = len(ids)
    probs = tp_prob[:, fg]  # (7, P)
    votes_for = np.argmax(probs, axis=0)
    votes = np.zeros((n, N_TYPES), dtype=np.int64)
    np.add.at(votes, (lab, votes_for), 1)
    votes = votes[:, 1:]
    sums = np.zeros((n, N_TYPES - 1), dtype=np.float64)
    for c in range(1, N_TYPES):
        sums[:, c - 1] = np.bincount(lab, weights=probs[c], minlength=n)
    # area is shared by every class of an instance, so argmax of sums = argmax of means
    by_vote = np.argmax(votes, axis=1) + 1
    by_mean = np.argmax(sums, axis=1) + 1
    chosen = np.where(votes.sum(axis=1) > 0, by_vote, by_mean)
    return dict(zip(ids.tolist(), chosen.tolist()))


def postprocess_maps(pred: PredictionMaps,
                     params: PostprocessParams = PostprocessParams()) -> tuple[np.ndarray, dict[int, int]]:
    """Like :func:`postprocess` but returns (instance map, id -> class)."""
    fg = pred.np_prob > params.t_fg
    energy = combine_energies(energy_map(pred.hv), energy_map(pred.dg))
    markers = extract_markers(pred.np_prob, energy, params)
    inst = watershed(energy, markers, fg)
    if params.min_size > 0 and inst.max() > 0:
        sizes = np.bincount(inst.ravel())
        small = sizes < params.min_size
        small[0] = False
        inst[small[inst]] = 0
    inst = relabel_raster(inst)
    return inst, assign_classes(inst, pred.tp_prob)


def postprocess(pred: PredictionMaps, params: PostprocessParams = PostprocessParams()) -> InstanceSet:
    """Full decoding of one image's prediction maps."""
    inst, classes = postprocess_maps(pred, params)
    return instances_from_maps(inst, classes)
