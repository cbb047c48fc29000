"""Foundation types, connected components, instance extraction and IoU."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import ndimage

BACKGROUND = 0
CLASS_NAMES = (
    "background",
    "neutrophil",
    "epithelial",
    "lymphocyte",
    "plasma",
    "eosinophil",
    "connective",
)
N_TYPES = len(CLASS_NAMES)
NUCLEUS_CLASSES = tuple(range(1, N_TYPES))


class NucleiError(Exception):
    """Base class for data errors raised by this package."""


class InconsistentClass(NucleiError, ValueError):
    pass


class ShapeMismatch(NucleiError, ValueError):
    pass


def _check_class_ids(cls: np.ndarray) -> None:
    if cls.size and (cls.min() < 0 or cls.max() >= N_TYPES):
        raise InconsistentClass(f"class ids must lie in 0..{N_TYPES - 1}")


@dataclass(frozen=True)
class LabeledImage:
    """Ground-truth patch: RGB pixels, instance ids and per-pixel class ids.

    Only shapes and dtypes are checked on construction. Use
    :func:`check_consistency` for the instance/class invariants.
    """

    rgb: np.ndarray
    inst: np.ndarray
    cls: np.ndarray

    def __post_init__(self):
        if self.inst.ndim != 2:
            raise ShapeMismatch(f"inst must be 2-D, got shape {self.inst.shape}")
        if self.cls.shape != self.inst.shape:
            raise ShapeMismatch(f"cls shape {self.cls.shape} != inst shape {self.inst.shape}")
        if self.rgb.shape != self.inst.shape + (3,):
            raise ShapeMismatch(f"rgb shape {self.rgb.shape} != {self.inst.shape + (3,)}")
        h, w = self.inst.shape
        if h < 8 or w < 8:
            raise ShapeMismatch(f"images must be at least 8x8, got {h}x{w}")
        if self.inst.size and self.inst.min() < 0:
            raise ShapeMismatch("instance ids must be non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.inst.shape

    @classmethod
    def from_maps(cls, inst, cls_map, rgb=None) -> "LabeledImage":
        inst = np.asarray(inst)
        cls_map = np.asarray(cls_map)
        if rgb is None:
            rgb = np.zeros(inst.shape + (3,), dtype=np.uint8)
        return cls(rgb=np.asarray(rgb), inst=inst, cls=cls_map)


@dataclass
class PredictionMaps:
    """Decoder outputs for one image.

    Attributes:
        np_prob: (H, W) foreground probability.
        hv: (2, H, W) horizontal and vertical distance maps.
        dg: (2, H, W) distance maps along the x+y and x-y diagonals.
        tp_prob: (7, H, W) per-pixel class probabilities.
    """

    np_prob: np.ndarray
    hv: np.ndarray
    dg: np.ndarray
    tp_prob: np.ndarray

    def __post_init__(self):
        h, w = self.np_prob.shape
        for name, n in (("hv", 2), ("dg", 2), ("tp_prob", N_TYPES)):
            arr = getattr(self, name)
            if arr.shape != (n, h, w):
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {(n, h, w)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.np_prob.shape

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.np_prob, self.hv, self.dg, self.tp_prob


@dataclass(frozen=True)
class Instance:
    id: int
    pixels: np.ndarray  # (N, 2) int array of (row, col), raster order
    cls: int
    centroid: tuple[float, float]

    @property
    def area(self) -> int:
        return len(self.pixels)

    def pixel_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.pixels}


@dataclass
class InstanceSet:
    """Decoded instances of one image, ordered by id."""

    shape: tuple[int, int]
    instances: list[Instance] = field(default_factory=list)

    def __post_init__(self):
        ids = [inst.id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise ValueError("instance ids must be unique")

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def __getitem__(self, i: int) -> Instance:
        return self.instances[i]

    @property
    def ids(self) -> list[int]:
        return [inst.id for inst in self.instances]

    def classes(self) -> dict[int, int]:
        return {inst.id: inst.cls for inst in self.instances}

    def to_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """Render back to (instance id map, class map)."""
        inst_map = np.zeros(self.shape, dtype=np.int32)
        cls_map = np.zeros(self.shape, dtype=np.int32)
        for inst in self.instances:
            rr, cc = inst.pixels[:, 0], inst.pixels[:, 1]
            if np.any(inst_map[rr, cc]):
                raise ValueError("instance pixel sets overlap")
            inst_map[rr, cc] = inst.id
            cls_map[rr, cc] = inst.cls
        return inst_map, cls_map


def relabel_raster(labels: np.ndarray) -> np.ndarray:
    """Renumber positive labels 1..K in raster order of first occurrence."""
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids > 0
    ids, first = ids[keep], first[keep]
    if not len(ids):
        return np.zeros(labels.shape, dtype=np.int32)
    order = np.argsort(first, kind="stable")
    lut = np.zeros(int(ids.max()) + 1, dtype=np.int32)
    lut[ids[order]] = np.arange(1, len(ids) + 1, dtype=np.int32)
    return lut[labels]


def connected_components(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Label connected true regions of a boolean mask.

    Components are numbered 1..K in raster order of their first pixel; the
    background is 0.

    Args:
        mask: 2-D boolean array.
        connectivity: 4 or 8.

    Returns:
        int32 label map of the same shape.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ShapeMismatch(f"mask must be 2-D, got shape {mask.shape}")
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, _ = ndimage.label(mask, structure=structure)
    return relabel_raster(labels)


def check_consistency(inst: np.ndarray, cls: np.ndarray) -> dict[int, int]:
    """Return the id -> class map, raising InconsistentClass on violations."""
    inst = np.asarray(inst)
    cls = np.asarray(cls)
    if inst.shape != cls.shape:
        raise ShapeMismatch(f"inst shape {inst.shape} != cls shape {cls.shape}")
    _check_class_ids(cls)
    fg = inst > 0
    if np.any(fg != (cls > 0)):
        raise InconsistentClass("instance pixels and nucleus-class pixels disagree")
    ids = inst[fg].astype(np.int64)
    classes = cls[fg].astype(np.int64)
    if not len(ids):
        return {}
    pairs = np.unique(ids * N_TYPES + classes)
    pair_ids = pairs // N_TYPES
    if len(np.unique(pair_ids)) != len(pair_ids):
        bad = pair_ids[np.flatnonzero(np.diff(pair_ids) == 0)[0]]
        raise InconsistentClass(f"instance {bad} spans more than one class")
    return dict(zip(pair_ids.tolist(), (pairs % N_TYPES).tolist()))


def instances_from_maps(inst: np.ndarray, classes: dict[int, int]) -> InstanceSet:
    """Build an InstanceSet from a label map and an id -> class lookup."""
    inst = np.asarray(inst)
    flat = inst.ravel()
    fg_idx = np.flatnonzero(flat)
    if not len(fg_idx):
        return InstanceSet(shape=inst.shape)
    order = fg_idx[np.argsort(flat[fg_idx], kind="stable")]
    ids, starts, counts = np.unique(flat[order], return_index=True, return_counts=True)
    width = inst.shape[1]
    out = []
    for i, s, n in zip(ids.tolist(), starts.tolist(), counts.tolist()):
        lin = order[s:s + n]
        pix = np.stack((lin // width, lin % width), axis=1)
        out.append(Instance(id=int(i), pixels=pix, cls=int(classes[i]),
                            centroid=(float(pix[:, 0].mean()), float(pix[:, 1].mean()))))
    return InstanceSet(shape=inst.shape, instances=out)


def extract_instances(inst: np.ndarray, cls: np.ndarray) -> InstanceSet:
    """Collect the instances of an (instance map, class map) pair.

    Instances may be disconnected; each distinct positive id is one entry.

    Raises:
        InconsistentClass: if an id spans more than one class, or the
            foreground of ``inst`` and ``cls`` differ.
    """
    return instances_from_maps(inst, check_consistency(inst, cls))


def _as_set(pixels) -> set[tuple[int, int]]:
    if isinstance(pixels, (set, frozenset)):
        return pixels
    if isinstance(pixels, np.ndarray):
        return {(int(r), int(c)) for r, c in pixels.reshape(-1, 2)}
    return {tuple(p) for p in pixels}


def iou(a: Iterable, b: Iterable) -> float:
    """Intersection over union of two pixel sets; 0.0 when both are empty."""
    a, b = _as_set(a), _as_set(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def pixel_sets(instances: InstanceSet | Sequence[Instance]) -> list[set[tuple[int, int]]]:
    return [inst.pixel_set() for inst in instances]
