"""Seeded training augmentations applied jointly to image and labels.

A plan is drawn from a 64-bit seed with xoshiro256** (state filled by
splitmix64). The draw order is fixed, and every draw is made whether or not
its transform ends up enabled, so each field always reads the same position
in the stream::

    1 hflip        u < 0.5
    2 vflip        u < 0.5
    3 rot90_k      top two bits of a 64-bit word
    4 transpose    u < 0.5
    5 jitter on    u < 0.5
    6-9 jitter     brightness, contrast, saturation, hue (uniform in ranges)
    10 blur on     u < 0.3
    11 blur kind   floor(3u) -> gaussian, median, motion
    12 motion dir  top two bits -> E, S, SE, SW

``u`` is the top 53 bits of a word scaled to [0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage.color import hsv2rgb, rgb2hsv

from .core import LabeledImage
from .encoder import TargetMaps, encode_targets

MASK64 = (1 << 64) - 1

BRIGHTNESS = 0.2
CONTRAST = 0.25
SATURATION = 0.2
HUE = 0.05
FLIP_P = 0.5
JITTER_P = 0.5
BLUR_P = 0.3
GAUSSIAN_SIGMA = 0.3
BLUR_KINDS = ("gaussian", "median", "motion")
MOTION_DIRS = ("E", "S", "SE", "SW")


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed: int):
        x = seed & MASK64
        state = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & MASK64
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            state.append(z ^ (z >> 31))
        self.s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below4(self) -> int:
        return self.next_u64() >> 62


@dataclass(frozen=True)
class Jitter:
    brightness: float
    contrast: float
    saturation: float
    hue: float


@dataclass(frozen=True)
class Blur:
    kind: str  # gaussian | median | motion
    direction: Optional[str] = None  # motion only


@dataclass(frozen=True)
class AugPlan:
    hflip: bool = False
    vflip: bool = False
    rot90_k: int = 0
    transpose: bool = False
    jitter: Optional[Jitter] = None
    blur: Optional[Blur] = None


IDENTITY = AugPlan()


def sample_plan(seed: int) -> AugPlan:
    """Draw a full augmentation plan from a 64-bit seed."""
    rng = Xoshiro256(seed)
    hflip = rng.uniform() < FLIP_P
    vflip = rng.uniform() < FLIP_P
    k = rng.below4()
    transpose = rng.uniform() < FLIP_P
    jitter_on = rng.uniform() < JITTER_P
    b = 1.0 + BRIGHTNESS * (2.0 * rng.uniform() - 1.0)
    c = 1.0 + CONTRAST * (2.0 * rng.uniform() - 1.0)
    s = 1.0 + SATURATION * (2.0 * rng.uniform() - 1.0)
    h = HUE * (2.0 * rng.uniform() - 1.0)
    blur_on = rng.uniform() < BLUR_P
    kind = BLUR_KINDS[min(int(3 * rng.uniform()), 2)]
    direction = MOTION_DIRS[rng.below4()]
    return AugPlan(
        hflip=hflip,
        vflip=vflip,
        rot90_k=k,
        transpose=transpose,
        jitter=Jitter(b, c, s, h) if jitter_on else None,
        blur=(Blur(kind, direction if kind == "motion" else None) if blur_on else None),
    )


def _geometric(a: np.ndarray, plan: AugPlan) -> np.ndarray:
    # order: hflip, vflip, rot90 (counter-clockwise), transpose
    if plan.hflip:
        a = a[:, ::-1]
    if plan.vflip:
        a = a[::-1]
    if plan.rot90_k:
        a = np.rot90(a, plan.rot90_k, axes=(0, 1))
    if plan.transpose:
        a = np.swapaxes(a, 0, 1)
    return np.ascontiguousarray(a)


def apply_geometric(label: LabeledImage, plan: AugPlan) -> LabeledImage:
    """Apply the plan's flips/rotation/transpose to every plane of a label."""
    return LabeledImage(
        rgb=_geometric(label.rgb, plan),
        inst=_geometric(label.inst, plan),
        cls=_geometric(label.cls, plan),
    )


_LUMA = np.array([0.299, 0.587, 0.114])


def _jitter(x: np.ndarray, j: Jitter) -> np.ndarray:
    x = np.clip(x * j.brightness, 0.0, 255.0)
    mean = float(np.mean(x @ _LUMA))
    x = np.clip((x - mean) * j.contrast + mean, 0.0, 255.0)
    if j.saturation != 1.0 or j.hue != 0.0:
        hsv = rgb2hsv(x / 255.0)
        hsv[..., 1] = np.clip(hsv[..., 1] * j.saturation, 0.0, 1.0)
        hsv[..., 0] = np.mod(hsv[..., 0] + j.hue, 1.0)
        x = hsv2rgb(hsv) * 255.0
    return x


def blur_kernel(blur: Blur) -> np.ndarray:
    """3x3 kernel for the linear blurs (not defined for median)."""
    if blur.kind == "gaussian":
        t = np.exp(-0.5 * (np.arange(-1, 2) / GAUSSIAN_SIGMA) ** 2)
        t /= t.sum()
        return np.outer(t, t)
    if blur.kind == "motion":
        k = np.zeros((3, 3))
        if blur.direction == "E":
            k[1, :] = 1
        elif blur.direction == "S":
            k[:, 1] = 1
        elif blur.direction == "SE":
            k[np.arange(3), np.arange(3)] = 1
        elif blur.direction == "SW":
            k[np.arange(3), np.arange(2, -1, -1)] = 1
        else:
            raise ValueError(f"unknown motion direction {blur.direction!r}")
        return k / 3.0
    raise ValueError(f"no linear kernel for blur {blur.kind!r}")


def _blur(x: np.ndarray, blur: Blur) -> np.ndarray:
    if blur.kind == "median":
        return ndimage.median_filter(x, size=(3, 3, 1), mode="nearest")
    k = blur_kernel(blur)
    return ndimage.correlate(x, k[:, :, None], mode="nearest")


def apply_photometric(rgb: np.ndarray, plan: AugPlan) -> np.ndarray:
    """Colour jitter then blur on an 8-bit RGB image."""
    if plan.jitter is None and plan.blur is None:
        return rgb.copy()
    x = rgb.astype(np.float64)
    if plan.jitter is not None:
        x = _jitter(x, plan.jitter)
    if plan.blur is not None:
        x = _blur(x, plan.blur)
    x = np.clip(x, 0.0, 255.0)
    # values are non-negative, so floor(x + 0.5) rounds half away from zero
    return np.floor(x + 0.5).astype(np.uint8)


def augment_sample(label: LabeledImage, seed: int) -> tuple[LabeledImage, TargetMaps]:
    """Augment one patch and regenerate its targets from the new labels."""
    plan = sample_plan(seed)
    moved = apply_geometric(label, plan)
    out = LabeledImage(rgb=apply_photometric(moved.rgb, plan), inst=moved.inst, cls=moved.cls)
    return out, encode_targets(out)
