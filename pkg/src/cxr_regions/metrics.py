"""Segmentation metrics (Dice, precision, recall, ASD) and training losses."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import BothEmpty, BothEmptyWarning, DimensionMismatch, EmptyList, EmptyMask
from .imagecore import BinaryMask

PROB_CLAMP = 1e-7
DEFAULT_RESIZE = (256, 256)
METRIC_NAMES = ("dice", "precision", "recall", "asd")


@dataclass(frozen=True)
class SegMetrics:
    dice: float
    precision: float
    recall: float
    asd: float

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in METRIC_NAMES}


@dataclass(frozen=True)
class MetricsSummary:
    cases: list[SegMetrics]
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "cases": [c.as_dict() for c in self.cases],
            "mean": dict(self.mean),
            "std": dict(self.std),
        }


def _bits(m) -> np.ndarray:
    return m.bits if isinstance(m, BinaryMask) else np.asarray(m, dtype=bool)


def _pair(pred, ref) -> tuple[np.ndarray, np.ndarray]:
    p, r = _bits(pred), _bits(ref)
    if p.shape != r.shape:
        raise DimensionMismatch(f"{p.shape} vs {r.shape}")
    return p, r


def _probs(pred) -> np.ndarray:
    p = np.asarray(pred, dtype=np.float64)
    if np.any(~np.isfinite(p)) or p.min() < 0 or p.max() > 1:
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def confusion(pred, ref) -> tuple[int, int, int]:
    """``(tp, fp, fn)`` pixel counts."""
    p, r = _pair(pred, ref)
    tp = int(np.count_nonzero(p & r))
    return tp, int(np.count_nonzero(p)) - tp, int(np.count_nonzero(r)) - tp


def resize_mask(mask: BinaryMask, width: int, height: int) -> BinaryMask:
    """Nearest-neighbour resample; output pixel ``i`` reads ``floor((i + 0.5) * src / dst)``."""
    if width < 1 or height < 1:
        raise ValueError(f"target size must be positive, got {width}x{height}")
    h, w = mask.shape
    if (w, h) == (width, height):
        return mask
    rows = (np.arange(height) * 2 + 1) * h // (2 * height)
    cols = (np.arange(width) * 2 + 1) * w // (2 * width)
    return BinaryMask(mask.bits[np.ix_(rows, cols)])


def dice(pred, ref) -> float:
    """``2|P∩R| / (|P| + |R|)``; two empty masks give 1.0 with a warning."""
    tp, fp, fn = confusion(pred, ref)
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn("dice of two empty masks; returning 1.0", BothEmptyWarning, stacklevel=2)
        return 1.0
    return 2 * tp / denom


def precision_recall(pred, ref) -> tuple[float, float]:
    """Precision and recall; an empty denominator counts as 1.0."""
    tp, fp, fn = confusion(pred, ref)
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall


def boundary(mask) -> np.ndarray:
    """Set pixels with at least one 4-neighbour outside the mask or the canvas."""
    b = _bits(mask)
    padded = np.pad(b, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return b & ~interior


def asd(pred, ref) -> float:
    """Symmetric average surface distance in pixels.

    Mean over both boundary sets of the Euclidean distance from each boundary
    pixel center to the nearest boundary pixel of the other mask.
    """
    p, r = _pair(pred, ref)
    if not p.any() or not r.any():
        raise EmptyMask("average surface distance needs two non-empty masks")
    bp, br = boundary(p), boundary(r)
    to_r = ndimage.distance_transform_edt(~br)
    to_p = ndimage.distance_transform_edt(~bp)
    total = to_r[bp].sum() + to_p[br].sum()
    return float(total / (np.count_nonzero(bp) + np.count_nonzero(br)))


def bce_loss(pred, ref) -> float:
    """Mean binary cross-entropy with probabilities clamped to ``[1e-7, 1 - 1e-7]``."""
    q = _probs(pred)
    y = _bits(ref).astype(np.float64)
    if q.shape != y.shape:
        raise DimensionMismatch(f"{q.shape} vs {y.shape}")
    q = np.clip(q, PROB_CLAMP, 1 - PROB_CLAMP)
    return float(-np.sum(y * np.log(q) + (1 - y) * np.log(1 - q)) / y.size)


def dice_loss(pred, ref) -> float:
    """Soft Dice loss ``-2 Σ y q / (Σ y + Σ q)``, in ``[-1, 0]``."""
    q = _probs(pred)
    y = _bits(ref).astype(np.float64)
    if q.shape != y.shape:
        raise DimensionMismatch(f"{q.shape} vs {y.shape}")
    denom = y.sum() + q.sum()
    if denom == 0:
        raise BothEmpty("dice loss undefined for empty prediction and reference")
    return float(-2 * np.sum(y * q) / denom)


def combined_loss(pred, ref) -> float:
    return dice_loss(pred, ref) + bce_loss(pred, ref)


def evaluate_case(pred, ref, resize_to: tuple[int, int] | None = DEFAULT_RESIZE) -> SegMetrics:
    """All four metrics, after resizing both masks to ``resize_to`` (w, h).

    Pass ``resize_to=None`` to evaluate at native resolution.
    """
    pred = pred if isinstance(pred, BinaryMask) else BinaryMask(pred)
    ref = ref if isinstance(ref, BinaryMask) else BinaryMask(ref)
    if resize_to is not None:
        pred = resize_mask(pred, *resize_to)
        ref = resize_mask(ref, *resize_to)
    prec, rec = precision_recall(pred, ref)
    return SegMetrics(dice(pred, ref), prec, rec, asd(pred, ref))


def summarize(cases: list[SegMetrics]) -> MetricsSummary:
    """Per-metric mean and population standard deviation."""
    cases = list(cases)
    if not cases:
        raise EmptyList("no cases to summarize")
    mean, std = {}, {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(c, name) for c in cases], dtype=np.float64)
        mean[name] = float(vals.mean())
        std[name] = float(vals.std())
    return MetricsSummary(cases, mean, std)


def format_table_row(summary: MetricsSummary) -> dict[str, str]:
    """``mean ± std`` strings; Dice/precision/recall in percent, ASD in pixels."""
    row = {}
    for name in METRIC_NAMES:
        scale = 1.0 if name == "asd" else 100.0
        m, s = summary.mean[name] * scale, summary.std[name] * scale
        row[name] = f"{m:.2f} ± {s:.2f}" if math.isfinite(m) else "nan"
    return row
