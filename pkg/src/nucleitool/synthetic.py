"""Synthetic labelled patches for demos and tests."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import LabeledImage, NUCLEUS_CLASSES


def ellipse_mask(shape, center, axes, angle) -> np.ndarray:
    """Filled ellipse with semi-axes ``axes`` rotated by ``angle`` radians."""
    rr, cc = np.mgrid[:shape[0], :shape[1]]
    dr, dc = rr - center[0], cc - center[1]
    cos, sin = np.cos(angle), np.sin(angle)
    u = dc * cos + dr * sin
    v = -dc * sin + dr * cos
    return (u / axes[0]) ** 2 + (v / axes[1]) ** 2 <= 1.0


def random_blobs(rng: np.random.Generator, shape=(256, 256), n_range=(5, 20),
                 axis_range=(6.0, 12.0), gap: int = 2, max_tries: int = 2000) -> LabeledImage:
    """Non-touching random ellipses, cycling through all nucleus classes.

    Blobs are separated by at least ``gap`` background pixels (8-connected
    sense), so every id is one connected component.
    """
    n_target = int(rng.integers(n_range[0], n_range[1] + 1))
    inst = np.zeros(shape, dtype=np.int32)
    cls = np.zeros(shape, dtype=np.int32)
    occupied = np.zeros(shape, dtype=bool)
    first_class = int(rng.integers(len(NUCLEUS_CLASSES)))
    placed = 0
    for _ in range(max_tries):
        if placed == n_target:
            break
        a, b = rng.uniform(*axis_range, size=2)
        margin = max(a, b) + 1
        center = (rng.uniform(margin, shape[0] - margin), rng.uniform(margin, shape[1] - margin))
        mask = ellipse_mask(shape, center, (a, b), rng.uniform(0, np.pi))
        if np.any(mask & occupied):
            continue
        placed += 1
        inst[mask] = placed
        cls[mask] = NUCLEUS_CLASSES[(first_class + placed - 1) % len(NUCLEUS_CLASSES)]
        occupied |= ndimage.binary_dilation(mask, iterations=gap + 1,
                                            structure=np.ones((3, 3), bool))
    rgb = rng.integers(0, 256, size=shape + (3,), dtype=np.uint8)
    return LabeledImage(rgb=rgb, inst=inst, cls=cls)


def touching_pair(rng: np.random.Generator, shape=(64, 64), radius_range=(7.0, 11.0)) -> LabeledImage:
    """Two ellipses whose pixel sets are 4-adjacent along a shared straight cut.

    A single larger ellipse is split by a random line through its middle, so
    the two halves share a long boundary.
    """
    a = rng.uniform(*radius_range) * 1.8
    b = rng.uniform(*radius_range)
    angle = rng.uniform(0, np.pi)
    center = (shape[0] / 2 + rng.uniform(-2, 2), shape[1] / 2 + rng.uniform(-2, 2))
    mask = ellipse_mask(shape, center, (a, b), angle)
    rr, cc = np.mgrid[:shape[0], :shape[1]]
    # cut perpendicular to the long axis, slightly off-centre
    offset = rng.uniform(-0.2, 0.2) * a
    side = ((cc - center[1]) * np.cos(angle) + (rr - center[0]) * np.sin(angle)) > offset
    inst = np.zeros(shape, dtype=np.int32)
    inst[mask & ~side] = 1
    inst[mask & side] = 2
    classes = rng.choice(NUCLEUS_CLASSES, size=2)
    cls = np.zeros(shape, dtype=np.int32)
    cls[inst == 1] = classes[0]
    cls[inst == 2] = classes[1]
    rgb = np.zeros(shape + (3,), dtype=np.uint8)
    return LabeledImage(rgb=rgb, inst=inst, cls=cls)
