"""Blob detection, per-blob PCA orientation and raster rotation.

Angles are in degrees measured from the image vertical, positive meaning a
clockwise turn as seen on screen (x to the right, y downward). ``rotate`` uses
the same convention, so rotating a vertical blob by ``+a`` gives it a
principal angle of ``+a`` and rotating by ``-a`` undoes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import AngleOutOfRange, DegenerateBlob, EmptyMask
from .imagecore import BinaryMask, GrayImage, Raster

MAX_ROTATION_DEG = 45.0
_EIGEN_RTOL = 1e-9
_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True, eq=False)
class Blob:
    """One 8-connected foreground component.

    ``pixels`` is an ``(n, 2)`` integer array of ``(x, y)`` coordinates in
    raster order.
    """

    label: int
    area: int
    centroid: tuple[float, float]
    pixels: np.ndarray


@dataclass(frozen=True)
class PrincipalAxis:
    angle_deg: float
    eigen_ratio: float


def connected_components(mask: BinaryMask) -> list[Blob]:
    """Maximal 8-connected components, largest first.

    Equal areas are ordered by the raster position (row, then column) of the
    component's first pixel. Labels are ``1..n`` in that order.
    """
    labels, n = ndimage.label(mask.bits, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)  # raster order
    lab = labels[ys, xs]
    order = np.argsort(lab, kind="stable")
    ys, xs, lab = ys[order], xs[order], lab[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    ends = np.r_[starts[1:], lab.size]

    groups = []
    for s, e in zip(starts, ends):
        px = np.column_stack([xs[s:e], ys[s:e]])
        groups.append((-(e - s), int(ys[s]), int(xs[s]), px))
    groups.sort(key=lambda g: g[:3])

    blobs = []
    for i, (neg_area, _, _, px) in enumerate(groups, start=1):
        px.setflags(write=False)
        cx, cy = px.mean(axis=0)
        blobs.append(Blob(label=i, area=-neg_area, centroid=(float(cx), float(cy)), pixels=px))
    return blobs


def blobs_to_mask(blobs: list[Blob], shape: tuple[int, int]) -> BinaryMask:
    bits = np.zeros(shape, dtype=bool)
    for b in blobs:
        bits[b.pixels[:, 1], b.pixels[:, 0]] = True
    return BinaryMask(bits)


def keep_largest(mask: BinaryMask, k: int) -> BinaryMask:
    """Drop every component except the ``k`` largest."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    blobs = connected_components(mask)
    if len(blobs) <= k:
        return mask
    return blobs_to_mask(blobs[:k], mask.shape)


def _axis_angle(vx: float, vy: float) -> float:
    # orient the vector downward so the angle lands in (-90, 90]
    if vy < 0 or (vy == 0 and vx > 0):
        vx, vy = -vx, -vy
    return math.degrees(math.atan2(-vx, vy))


def principal_axis(blob: Blob) -> PrincipalAxis:
    """Major axis of the blob's pixel-coordinate covariance.

    An isotropic blob (equal eigenvalues) reports angle 0 and ratio 1. A
    blob whose pixels are collinear has an infinite ratio.
    """
    if blob.area < 2:
        raise DegenerateBlob(f"blob {blob.label} has area {blob.area}")
    pts = blob.pixels.astype(np.float64)
    pts = pts - pts.mean(axis=0)
    cov = pts.T @ pts / len(pts)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    small, large = float(evals[0]), float(evals[1])
    if large - small <= _EIGEN_RTOL * max(large, 1.0):
        return PrincipalAxis(0.0, 1.0)
    ratio = large / small if small > 0 else math.inf
    vx, vy = evecs[:, 1]
    return PrincipalAxis(_axis_angle(float(vx), float(vy)), ratio)


def estimate_ap_rotation(mask: BinaryMask) -> float:
    """Area-weighted mean principal angle of the two largest blobs."""
    blobs = connected_components(mask)[:2]
    if not blobs:
        raise EmptyMask("no foreground to estimate rotation from")
    usable = [b for b in blobs if b.area >= 2]
    if not usable:
        return 0.0
    angles = np.array([principal_axis(b).angle_deg for b in usable])
    areas = np.array([b.area for b in usable], dtype=float)
    return float(np.dot(angles, areas) / areas.sum())


def mask_centroid(mask: BinaryMask) -> tuple[float, float]:
    ys, xs = np.nonzero(mask.bits)
    if xs.size == 0:
        raise EmptyMask("mask has no set bits")
    return float(xs.mean()), float(ys.mean())


def rotate(value: Raster, angle_deg: float, center: tuple[float, float] | None = None) -> Raster:
    """Rotate an image (bilinear) or mask (nearest) about ``center``.

    The canvas keeps its size; samples falling outside the source are 0.
    ``center`` defaults to the middle of the canvas.
    """
    if not abs(angle_deg) <= MAX_ROTATION_DEG:
        raise AngleOutOfRange(f"|{angle_deg}| exceeds {MAX_ROTATION_DEG} degrees")
    if angle_deg == 0:
        return value
    h, w = value.shape
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    cx, cy = center
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    # inverse map: output pixel -> source position
    src_x = c * dx + s * dy + cx
    src_y = -s * dx + c * dy + cy
    coords = np.array([src_y, src_x])
    if isinstance(value, GrayImage):
        out = ndimage.map_coordinates(
            value.pixels.astype(np.float64), coords, order=1, mode="constant", cval=0.0
        )
        out = np.clip(np.floor(out + 0.5), 0, value.maxval)
        return GrayImage(out, value.bit_depth)
    ix = np.floor(src_x + 0.5).astype(np.int64)
    iy = np.floor(src_y + 0.5).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros((h, w), dtype=bool)
    out[inside] = value.bits[iy[inside], ix[inside]]
    return BinaryMask(out)
