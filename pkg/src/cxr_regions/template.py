"""Lung-field cropping, AP verticalization and the 12-region template.

AP views yield eight regions: lung thirds for the patient's right lung
(APUR, APMR, APLR; image left) and left lung (APUL, APML, APLL; image right),
plus the upper and middle mediastinal boxes APUM and APMM. LAT views yield
the lung thirds LATULS, LATMLS, LATLLS and the parahilar box LATMM.

Region boxes are expressed in the processed frame (after crop, rotation and
flip); :class:`Transform` records how to map them back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .errors import (
    BoxOutsideImage,
    DimensionMismatch,
    LowConfidence,
    NotTwoLungs,
    OverlappingLungs,
    TooSmall,
    ViewMismatch,
)
from .imagecore import BBox, BinaryMask, GrayImage, Raster, ViewKind, bbox_of, crop
from .maskops import (
    connected_components,
    estimate_ap_rotation,
    keep_largest,
    mask_centroid,
    rotate,
)

DEFAULT_CONFIDENCE_THRESHOLD = 0.7
# residual tilt below which verticalization leaves the image untouched
MIN_ROTATION_DEG = 0.5

AP_NAMES = ("APUR", "APMR", "APLR", "APUL", "APML", "APLL", "APUM", "APMM")
LAT_NAMES = ("LATULS", "LATMLS", "LATLLS", "LATMM")
REGION_NAMES = AP_NAMES + LAT_NAMES
_AP_LUNG_NAMES = AP_NAMES[:6]
_LAT_LUNG_NAMES = LAT_NAMES[:3]


@dataclass(frozen=True)
class DetectionRecord:
    view: ViewKind
    bbox: BBox
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "view", ViewKind(self.view))
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")

    @classmethod
    def from_json(cls, obj: dict) -> "DetectionRecord":
        return cls(ViewKind(obj["view"]), BBox(*obj["bbox"]), float(obj["confidence"]))

    def to_json(self) -> dict:
        return {"view": self.view.value, "bbox": self.bbox.as_list(), "confidence": self.confidence}


@dataclass
class Transform:
    """Back-mapping metadata from the processed frame to the source image.

    A processed-frame point ``p`` maps back by un-flipping (when ``flipped``,
    across the processed canvas width), rotating by ``-rotation_deg`` about
    ``rotation_center`` and adding ``crop_offset``.
    """

    crop_offset: tuple[int, int] = (0, 0)
    rotation_deg: float = 0.0
    rotation_center: tuple[float, float] = (0.0, 0.0)
    flipped: bool = False
    align_scale: float = 1.0
    frame_size: tuple[int, int] = (0, 0)

    def to_json(self) -> dict:
        return {
            "crop_offset": list(self.crop_offset),
            "rotation_deg": self.rotation_deg,
            "rotation_center": list(self.rotation_center),
            "flipped": self.flipped,
            "align_scale": self.align_scale,
            "frame_size": list(self.frame_size),
        }

    def backmap_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).copy()
        if self.flipped:
            pts[:, 0] = self.frame_size[0] - 1 - pts[:, 0]
        if self.rotation_deg:
            t = math.radians(self.rotation_deg)
            c, s = math.cos(t), math.sin(t)
            cx, cy = self.rotation_center
            dx, dy = pts[:, 0] - cx, pts[:, 1] - cy
            pts[:, 0] = c * dx + s * dy + cx
            pts[:, 1] = -s * dx + c * dy + cy
        return pts + np.asarray(self.crop_offset, dtype=np.float64)


@dataclass
class RegionSet:
    view: ViewKind
    regions: dict[str, BBox]
    transform: Transform = field(default_factory=Transform)

    def __post_init__(self):
        names = AP_NAMES if self.view is ViewKind.AP else LAT_NAMES
        if set(self.regions) != set(names):
            raise ValueError(f"{self.view.value} region set must hold exactly {names}")

    def lung_bbox(self) -> BBox:
        """Union box of the lung-third regions."""
        names = _AP_LUNG_NAMES if self.view is ViewKind.AP else _LAT_LUNG_NAMES
        box = self.regions[names[0]]
        for n in names[1:]:
            box = box.union(self.regions[n])
        return box

    def backmapped_corners(self) -> dict[str, np.ndarray]:
        """The four corners of every region, in source-image coordinates."""
        out = {}
        for name, b in self.regions.items():
            corners = np.array(
                [[b.x_min, b.y_min], [b.x_max, b.y_min], [b.x_min, b.y_max], [b.x_max, b.y_max]]
            )
            out[name] = self.transform.backmap_points(corners)
        return out

    def to_json(self, case_id: str) -> dict:
        names = AP_NAMES if self.view is ViewKind.AP else LAT_NAMES
        return {
            "schema_version": 1,
            "case_id": case_id,
            "view": self.view.value,
            "transform": self.transform.to_json(),
            "regions": {n: self.regions[n].as_list() for n in names},
        }


def _expand(box: BBox, margin_frac: float, width: int, height: int) -> BBox:
    if margin_frac < 0:
        raise ValueError(f"margin_frac must be >= 0, got {margin_frac}")
    mx = int(round(margin_frac * box.width))
    my = int(round(margin_frac * box.height))
    return BBox(
        max(0, box.x_min - mx),
        max(0, box.y_min - my),
        min(width - 1, box.x_max + mx),
        min(height - 1, box.y_max + my),
    )


def crop_to_detection(
    img: Raster,
    det: DetectionRecord,
    margin_frac: float = 0.0,
    threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    view: ViewKind | None = None,
) -> tuple[Raster, tuple[int, int]]:
    """Crop to the detected lung box grown by ``margin_frac`` on each side.

    The margin is ``round(margin_frac * box side)`` pixels and the grown box is
    clamped to the canvas. Returns the crop and its ``(x, y)`` offset.
    """
    if det.confidence < threshold:
        raise LowConfidence(f"detection confidence {det.confidence} < {threshold}")
    if view is not None and ViewKind(view) is not det.view:
        raise ViewMismatch(f"detection is {det.view.value}, expected {ViewKind(view).value}")
    if not det.bbox.fits(img.width, img.height):
        raise BoxOutsideImage(f"{det.bbox} outside {img.width}x{img.height} image")
    box = _expand(det.bbox, margin_frac, img.width, img.height)
    return crop(img, box), (box.x_min, box.y_min)


def bbox_from_mask_fallback(
    mask: BinaryMask, margin_frac: float = 0.0, view: ViewKind = ViewKind.AP
) -> DetectionRecord:
    """Stand-in detection built from the mask's bounding box."""
    box = _expand(bbox_of(mask), margin_frac, mask.width, mask.height)
    return DetectionRecord(ViewKind(view), box, 1.0)


def verticalize_ap(img: GrayImage, mask: BinaryMask) -> tuple[GrayImage, BinaryMask, float, tuple[float, float]]:
    """Rotate an AP image and mask so the lungs stand upright.

    The rotation is ``-estimate_ap_rotation(mask)`` about the mask centroid and
    is skipped when the estimated tilt is within ``MIN_ROTATION_DEG``. Returns
    the rotated image, rotated mask, the applied rotation in degrees and the
    rotation center.
    """
    if img.shape != mask.shape:
        raise DimensionMismatch(f"image {img.shape} vs mask {mask.shape}")
    tilt = estimate_ap_rotation(mask)
    center = mask_centroid(mask)
    if abs(tilt) <= MIN_ROTATION_DEG:
        return img, mask, 0.0, center
    applied = -tilt
    return rotate(img, applied, center), rotate(mask, applied, center), applied, center


def split_thirds(b: BBox, axis: Literal["vertical", "horizontal"] = "vertical") -> tuple[BBox, BBox, BBox]:
    """Split ``b`` into three stacked (or side-by-side) boxes.

    Cuts fall at ``start + round(n/3)`` and ``start + round(2n/3)`` where ``n``
    is the extent along ``axis``; the three parts tile ``b`` exactly.
    """
    if axis == "vertical":
        start, n = b.y_min, b.height
    elif axis == "horizontal":
        start, n = b.x_min, b.width
    else:
        raise ValueError(f"unknown axis {axis!r}")
    if n < 3:
        raise TooSmall(f"extent {n} along {axis} axis is below 3")
    c1, c2 = start + round(n / 3), start + round(2 * n / 3)
    spans = ((start, c1 - 1), (c1, c2 - 1), (c2, start + n - 1))
    if axis == "vertical":
        return tuple(BBox(b.x_min, lo, b.x_max, hi) for lo, hi in spans)
    return tuple(BBox(lo, b.y_min, hi, b.y_max) for lo, hi in spans)


def ap_regions(mask: BinaryMask) -> RegionSet:
    """Eight AP regions from a verticalized two-lung mask."""
    blobs = connected_components(keep_largest(mask, 2))
    if len(blobs) != 2:
        raise NotTwoLungs(f"expected 2 lung components, found {len(blobs)}")
    # image-left blob is the patient's right lung
    right_lung, left_lung = sorted(blobs, key=lambda b: b.centroid[0])
    rb = bbox_of(_blob_mask(right_lung, mask.shape))
    lb = bbox_of(_blob_mask(left_lung, mask.shape))
    if rb.x_max + 1 > lb.x_min - 1:
        raise OverlappingLungs(f"no mediastinal gap between {rb} and {lb}")

    regions = dict(zip(("APUR", "APMR", "APLR"), split_thirds(rb)))
    regions.update(zip(("APUL", "APML", "APLL"), split_thirds(lb)))
    column = BBox(rb.x_max + 1, min(rb.y_min, lb.y_min), lb.x_min - 1, max(rb.y_max, lb.y_max))
    upper, middle, _ = split_thirds(column)
    regions["APUM"], regions["APMM"] = upper, middle
    return RegionSet(ViewKind.AP, regions, Transform(frame_size=(mask.width, mask.height)))


def _blob_mask(blob, shape) -> np.ndarray:
    bits = np.zeros(shape, dtype=bool)
    bits[blob.pixels[:, 1], blob.pixels[:, 0]] = True
    return bits


def lat_regions(mask: BinaryMask, mm_width_frac: float = 1 / 3) -> RegionSet:
    """Four LAT regions from the largest lung component.

    LATMM takes the middle vertical third and a centred horizontal band of
    ``mm_width_frac`` of the lung width (the middle third by default).
    """
    box = bbox_of(keep_largest(mask, 1))
    upper, middle, lower = split_thirds(box)
    if not 0 < mm_width_frac <= 1:
        raise ValueError(f"mm_width_frac must lie in (0, 1], got {mm_width_frac}")
    w = box.width
    x0 = box.x_min + round((1 - mm_width_frac) * w / 2)
    x1 = box.x_min + round((1 + mm_width_frac) * w / 2) - 1
    if x1 < x0:
        raise TooSmall(f"lung width {w} too small for LATMM")
    regions = {
        "LATULS": upper,
        "LATMLS": middle,
        "LATLLS": lower,
        "LATMM": BBox(x0, middle.y_min, x1, middle.y_max),
    }
    return RegionSet(ViewKind.LAT, regions, Transform(frame_size=(mask.width, mask.height)))


def align_views(ap: RegionSet, lat: RegionSet) -> float:
    """Vertical scale AP lung height / LAT lung height, stored on both sets."""
    s = ap.lung_bbox().height / lat.lung_bbox().height
    ap.transform.align_scale = s
    lat.transform.align_scale = s
    return s


def extract_region_images(img: GrayImage, rs: RegionSet) -> dict[str, GrayImage]:
    return {name: crop(img, box) for name, box in rs.regions.items()}


_COLORS = {
    "APUR": (230, 25, 75),
    "APMR": (60, 180, 75),
    "APLR": (0, 130, 200),
    "APUL": (245, 130, 48),
    "APML": (145, 30, 180),
    "APLL": (70, 240, 240),
    "APUM": (240, 50, 230),
    "APMM": (210, 245, 60),
    "LATULS": (230, 25, 75),
    "LATMLS": (60, 180, 75),
    "LATLLS": (0, 130, 200),
    "LATMM": (245, 130, 48),
}


def render_overlay(img: GrayImage, rs: RegionSet) -> np.ndarray:
    """RGB ``(h, w, 3)`` uint8 copy of ``img`` with labelled region outlines."""
    gray = img.pixels if img.bit_depth == 8 else (img.pixels >> 8)
    canvas = Image.fromarray(np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2))
    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()
    for name, b in rs.regions.items():
        color = _COLORS[name]
        draw.rectangle([b.x_min, b.y_min, b.x_max, b.y_max], outline=color)
        draw.text((b.x_min + 2, b.y_min + 1), name, fill=color, font=font)
    return np.asarray(canvas)
