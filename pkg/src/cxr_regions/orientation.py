"""Spine-side detection and horizontal flipping for lateral views.

The spine shows up as a bright, sustained vertical band just posterior to
the lungs. :func:`detect_spine_side` compares two strips flanking the lung
bounding box; :func:`correct_orientation` flips the view so the spine ends up
on the image right.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .imagecore import BinaryMask, GrayImage, Raster, bbox_of, like, raster_array

DEFAULT_STRIP_FRAC = 0.15


class Side(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"

    def mirror(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class Source(str, enum.Enum):
    HEURISTIC = "Heuristic"
    OVERRIDE = "Override"


@dataclass(frozen=True)
class SpineSide:
    side: Side
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class OrientationOutcome:
    flipped: bool
    detected: SpineSide
    source: Source


def hflip(value: Raster) -> Raster:
    """Mirror columns: column ``i`` swaps with ``width - 1 - i``."""
    return like(value, raster_array(value)[:, ::-1])


def _strip_profiles(img: GrayImage, mask: BinaryMask, strip_frac: float):
    box = bbox_of(mask)
    s = max(1, math.ceil(strip_frac * box.width))
    rows = img.pixels[box.y_min : box.y_max + 1].astype(np.float64)
    col_means = rows.mean(axis=0)
    w = img.width

    def profile(start: int, step: int) -> np.ndarray:
        # walk outward from the bbox edge; off-canvas columns read as 0
        idx = start + step * np.arange(s)
        inside = (idx >= 0) & (idx < w)
        out = np.zeros(s)
        out[inside] = col_means[idx[inside]]
        return out

    return profile(box.x_min - 1, -1), profile(box.x_max + 1, +1)


def detect_spine_side(
    img: GrayImage, mask: BinaryMask, strip_frac: float = DEFAULT_STRIP_FRAC
) -> SpineSide:
    """Pick the side whose flanking strip is brighter.

    Both strips span the rows of the lung bounding box and are
    ``ceil(strip_frac * box_width)`` columns wide, starting at the column
    just outside the box. The brighter mean wins; a tie resolves to Right
    with score 0. The score is the net fraction of outward column pairs
    (matched by distance from the box) in which the winning strip is the
    brighter one, so it lies in [0, 1] and is unchanged by mirroring.
    """
    if img.shape != mask.shape:
        raise DimensionMismatch(f"image {img.shape} vs mask {mask.shape}")
    left, right = _strip_profiles(img, mask, strip_frac)
    lm, rm = left.mean(), right.mean()
    if lm == rm:
        return SpineSide(Side.RIGHT, 0.0)
    side = Side.RIGHT if rm > lm else Side.LEFT
    win, lose = (right, left) if side is Side.RIGHT else (left, right)
    net = np.count_nonzero(win > lose) - np.count_nonzero(win < lose)
    score = max(0.0, net / win.size)
    return SpineSide(side, float(score))


def correct_orientation(
    img: GrayImage,
    mask: BinaryMask,
    override: Side | SpineSide | None = None,
    strip_frac: float = DEFAULT_STRIP_FRAC,
) -> tuple[GrayImage, BinaryMask, OrientationOutcome]:
    """Flip image and mask together when the spine is on the left."""
    if override is not None:
        side = override.side if isinstance(override, SpineSide) else Side(override)
        # validate inputs even though the heuristic is bypassed
        if img.shape != mask.shape:
            raise DimensionMismatch(f"image {img.shape} vs mask {mask.shape}")
        bbox_of(mask)
        detected, source = SpineSide(side, 1.0), Source.OVERRIDE
    else:
        detected, source = detect_spine_side(img, mask, strip_frac), Source.HEURISTIC
    flip = detected.side is Side.LEFT
    if flip:
        img, mask = hflip(img), hflip(mask)
    return img, mask, OrientationOutcome(flipped=flip, detected=detected, source=source)
