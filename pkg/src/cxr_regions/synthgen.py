"""Seed-deterministic AP/LAT chest phantoms with known geometry.

AP phantoms hold two dark elliptical lungs on a brighter background with a
bright mediastinal band between them. LAT phantoms hold one lung blob made of
two overlapping ellipses and a bright vertical spine band on one side. The
whole scene is rotated by ``rotation_deg`` (clockwise on screen) about the
canvas center, then uniform noise is added. Masks are rasterized exactly from
the ellipses, before noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec
from .imagecore import BBox, BinaryMask, GrayImage, ViewKind, bbox_of
from .orientation import Side

MAX_NOISE_FRAC = 0.05


@dataclass(frozen=True)
class LungEllipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    intensity: float


@dataclass(frozen=True)
class PhantomSpec:
    view: ViewKind
    canvas: tuple[int, int]
    lungs: tuple[LungEllipse, ...]
    rotation_deg: float = 0.0
    spine_side: Side | None = None
    noise_seed: int = 0
    background_level: float = 150.0
    spine_level: float = 235.0
    mediastinum_level: float | None = 190.0
    noise_frac: float = 0.03
    spine_gap: int = 3
    spine_width: int = 10
    bit_depth: int = 8


@dataclass(frozen=True, eq=False)
class PhantomTruth:
    mask: BinaryMask
    rotation_deg: float
    spine_side: Side | None
    lung_bboxes: tuple[BBox, ...]

    @property
    def union_bbox(self) -> BBox:
        box = self.lung_bboxes[0]
        for b in self.lung_bboxes[1:]:
            box = box.union(b)
        return box

    def to_json(self) -> dict:
        return {
            "rotation_deg": self.rotation_deg,
            "spine_side": self.spine_side.value if self.spine_side else None,
            "lung_bboxes": [b.as_list() for b in self.lung_bboxes],
            "union_bbox": self.union_bbox.as_list(),
        }


def _scene_coords(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unrotated scene coordinates sampled at every output pixel center."""
    w, h = spec.canvas
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    t = math.radians(spec.rotation_deg)
    c, s = math.cos(t), math.sin(t)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    return c * dx + s * dy + cx, -s * dx + c * dy + cy


def _ellipse(u, v, e: LungEllipse) -> np.ndarray:
    (ex, ey), (ax, ay) = e.center, e.semi_axes
    return ((u - ex) / ax) ** 2 + ((v - ey) / ay) ** 2 <= 1.0


def _lung_extent(lungs) -> tuple[float, float, float, float]:
    return (
        min(e.center[0] - e.semi_axes[0] for e in lungs),
        min(e.center[1] - e.semi_axes[1] for e in lungs),
        max(e.center[0] + e.semi_axes[0] for e in lungs),
        max(e.center[1] + e.semi_axes[1] for e in lungs),
    )


def _validate(spec: PhantomSpec) -> None:
    w, h = spec.canvas
    if w < 8 or h < 8:
        raise InvalidSpec(f"canvas {w}x{h} too small")
    if spec.bit_depth not in (8, 16):
        raise InvalidSpec(f"bit depth {spec.bit_depth}")
    if not 0 <= spec.noise_frac <= MAX_NOISE_FRAC:
        raise InvalidSpec(f"noise_frac must lie in [0, {MAX_NOISE_FRAC}]")
    if abs(spec.rotation_deg) > 45:
        raise InvalidSpec(f"rotation {spec.rotation_deg} outside [-45, 45]")
    if not spec.lungs:
        raise InvalidSpec("no lungs")
    if any(a <= 0 for e in spec.lungs for a in e.semi_axes):
        raise InvalidSpec("semi-axes must be positive")
    if spec.view is ViewKind.AP and len(spec.lungs) != 2:
        raise InvalidSpec("AP phantoms need exactly two lungs")
    if spec.view is ViewKind.LAT and spec.spine_side is None:
        raise InvalidSpec("LAT phantoms need a spine side")
    lung_mean = float(np.mean([e.intensity for e in spec.lungs]))
    if spec.view is ViewKind.LAT and not spec.spine_level > lung_mean:
        raise InvalidSpec("spine must be brighter than the lungs")
    maxval = (1 << spec.bit_depth) - 1
    levels = [spec.background_level, spec.spine_level] + [e.intensity for e in spec.lungs]
    if spec.mediastinum_level is not None:
        levels.append(spec.mediastinum_level)
    if min(levels) < 0 or max(levels) > maxval:
        raise InvalidSpec("intensity levels outside the bit-depth range")


def make_phantom(spec: PhantomSpec) -> tuple[GrayImage, PhantomTruth]:
    _validate(spec)
    w, h = spec.canvas
    u, v = _scene_coords(spec)
    maxval = (1 << spec.bit_depth) - 1

    lung_masks = [_ellipse(u, v, e) for e in spec.lungs]
    for m in lung_masks:
        if not m.any():
            raise InvalidSpec("a lung falls entirely outside the canvas")
        if m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
            raise InvalidSpec("a lung touches the canvas border")

    img = np.full((h, w), float(spec.background_level))
    x0, y0, x1, y1 = _lung_extent(spec.lungs)
    if spec.view is ViewKind.AP:
        if spec.mediastinum_level is not None:
            left, right = sorted(spec.lungs, key=lambda e: e.center[0])
            inner0 = left.center[0] + left.semi_axes[0]
            inner1 = right.center[0] - right.semi_axes[0]
            band = (u >= inner0) & (u <= inner1) & (v >= y0) & (v <= y1)
            img[band] = spec.mediastinum_level
    else:
        pad = 0.1 * (y1 - y0)
        if spec.spine_side is Side.RIGHT:
            bx0 = x1 + spec.spine_gap
        else:
            bx0 = x0 - spec.spine_gap - spec.spine_width
        band = (u >= bx0) & (u <= bx0 + spec.spine_width) & (v >= y0 - pad) & (v <= y1 + pad)
        img[band] = spec.spine_level

    for m, e in zip(lung_masks, spec.lungs):
        img[m] = e.intensity

    rng = np.random.default_rng(spec.noise_seed)
    amp = spec.noise_frac * maxval
    img = img + rng.uniform(-amp, amp, size=img.shape)
    img = np.clip(np.floor(img + 0.5), 0, maxval)

    mask = np.logical_or.reduce(lung_masks)
    truth = PhantomTruth(
        mask=BinaryMask(mask),
        rotation_deg=float(spec.rotation_deg),
        spine_side=spec.spine_side,
        lung_bboxes=tuple(bbox_of(m) for m in lung_masks),
    )
    return GrayImage(img, spec.bit_depth), truth


def ap_spec(
    rotation_deg: float = 0.0,
    noise_seed: int = 0,
    canvas: tuple[int, int] = (192, 192),
    half_gap: float = 38.0,
    semi_axes: tuple[float, float] = (22.0, 55.0),
    lung_level: float = 60.0,
) -> PhantomSpec:
    """Symmetric two-lung AP phantom centred on the canvas."""
    cx, cy = (canvas[0] - 1) / 2.0, (canvas[1] - 1) / 2.0
    lungs = (
        LungEllipse((cx - half_gap, cy), semi_axes, lung_level),
        LungEllipse((cx + half_gap, cy), semi_axes, lung_level),
    )
    return PhantomSpec(ViewKind.AP, canvas, lungs, rotation_deg=rotation_deg, noise_seed=noise_seed)


def lat_spec(
    spine_side: Side = Side.RIGHT,
    rotation_deg: float = 0.0,
    noise_seed: int = 0,
    canvas: tuple[int, int] = (192, 192),
    scale: float = 1.0,
    lung_level: float = 65.0,
) -> PhantomSpec:
    """LAT phantom: overlapping lung pair plus a spine band on ``spine_side``."""
    cx, cy = (canvas[0] - 1) / 2.0, (canvas[1] - 1) / 2.0
    lungs = (
        LungEllipse((cx - 6 * scale, cy), (38 * scale, 56 * scale), lung_level),
        LungEllipse((cx + 6 * scale, cy + 4 * scale), (36 * scale, 52 * scale), lung_level),
    )
    return PhantomSpec(
        ViewKind.LAT,
        canvas,
        lungs,
        rotation_deg=rotation_deg,
        spine_side=Side(spine_side),
        noise_seed=noise_seed,
        mediastinum_level=None,
    )


Phantom = tuple[PhantomSpec, GrayImage, PhantomTruth]


def make_corpus(n: int, base_seed: int = 0, max_rotation: float = 15.0) -> list[Phantom]:
    """``n`` AP and ``n`` LAT phantoms fully determined by ``base_seed``.

    The list alternates AP, LAT for cases ``0..n-1``. Rotations are uniform
    in ``[-max_rotation, max_rotation]``, LAT spine sides are drawn at random
    and lung sizes and gray levels are jittered.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(base_seed)
    corpus = []
    for _ in range(n):
        ap_rot, lat_rot = rng.uniform(-max_rotation, max_rotation, size=2)
        jitter = rng.uniform(0.9, 1.1, size=3)
        side = Side.RIGHT if rng.integers(2) else Side.LEFT
        seeds = rng.integers(0, 2**63, size=2)
        levels = rng.uniform(45, 75, size=2)
        ap = ap_spec(
            rotation_deg=float(ap_rot),
            noise_seed=int(seeds[0]),
            half_gap=38.0 * jitter[0],
            semi_axes=(22.0 * jitter[1], 55.0 * jitter[2]),
            lung_level=float(levels[0]),
        )
        lat = lat_spec(
            spine_side=side,
            rotation_deg=float(lat_rot),
            noise_seed=int(seeds[1]),
            scale=float(jitter[2]),
            lung_level=float(levels[1]),
        )
        corpus.append((ap, *make_phantom(ap)))
        corpus.append((lat, *make_phantom(lat)))
    return corpus


def paired_cases(corpus: list[Phantom]) -> list[tuple[Phantom, Phantom]]:
    """Group an alternating corpus into ``(ap, lat)`` pairs."""
    return list(zip(corpus[0::2], corpus[1::2]))
