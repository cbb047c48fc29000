"""On-disk layouts: image/label arrays and prediction/target directories.

A labels file is an (N, H, W, 2) integer array, channel 0 holding instance
ids and channel 1 class ids. Prediction and target directories hold four
float32 arrays: ``np.npy`` (N, H, W), ``hv.npy`` and ``dg.npy``
(N, 2, H, W), ``tp.npy`` (N, 7, H, W).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import N_TYPES, PredictionMaps, ShapeMismatch
from .encoder import TargetMaps
from .npyio import read_array, write_array

MAP_FILES = ("np", "hv", "dg", "tp")


@dataclass
class MapStack:
    """Per-image maps for a whole batch, as stored in a prediction directory."""

    np: np.ndarray
    hv: np.ndarray
    dg: np.ndarray
    tp: np.ndarray

    def __post_init__(self):
        n, h, w = self.np.shape
        for name, c in (("hv", 2), ("dg", 2), ("tp", N_TYPES)):
            arr = getattr(self, name)
            if arr.shape != (n, c, h, w):
                raise ShapeMismatch(f"{name}.npy has shape {arr.shape}, expected {(n, c, h, w)}")

    def __len__(self) -> int:
        return self.np.shape[0]

    def prediction(self, i: int) -> PredictionMaps:
        return PredictionMaps(np_prob=self.np[i].astype(np.float64), hv=self.hv[i].astype(np.float64),
                              dg=self.dg[i].astype(np.float64), tp_prob=self.tp[i].astype(np.float64))

    def target(self, i: int) -> TargetMaps:
        return TargetMaps(np=(self.np[i] > 0.5).astype(np.uint8), hv=self.hv[i].astype(np.float64),
                          dg=self.dg[i].astype(np.float64), tp=self.tp[i].astype(np.float64))

    @classmethod
    def from_items(cls, items) -> "MapStack":
        """Stack PredictionMaps / TargetMaps items as float32 arrays."""
        def grab(item):
            if isinstance(item, PredictionMaps):
                return item.np_prob, item.hv, item.dg, item.tp_prob
            return item.np, item.hv, item.dg, item.tp

        parts = [grab(it) for it in items]
        return cls(*(np.stack([p[k] for p in parts]).astype(np.float32) for k in range(4)))


def read_maps(directory) -> MapStack:
    d = Path(directory)
    return MapStack(*(read_array(d / f"{name}.npy") for name in MAP_FILES))


def write_maps(directory, maps: MapStack) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in MAP_FILES:
        write_array(d / f"{name}.npy", getattr(maps, name).astype(np.float32))


def read_labels(path) -> np.ndarray:
    labels = read_array(path)
    if labels.ndim != 4 or labels.shape[-1] != 2:
        raise ShapeMismatch(f"labels must have shape (N, H, W, 2), got {labels.shape}")
    if labels.dtype.kind == "f":
        raise ShapeMismatch("labels must be an integer array")
    return labels


def read_images(path) -> np.ndarray:
    images = read_array(path)
    if images.ndim != 4 or images.shape[-1] != 3 or images.dtype != np.uint8:
        raise ShapeMismatch(f"images must be uint8 with shape (N, H, W, 3), got {images.dtype} {images.shape}")
    return images


def labels_array(inst_maps, cls_maps) -> np.ndarray:
    return np.stack([np.stack((i, c), axis=-1) for i, c in zip(inst_maps, cls_maps)]).astype(np.int32)
