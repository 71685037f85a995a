"""Image and mask value types, bounding boxes and lossless raster I/O.

Arrays are stored row-major as ``(height, width)`` numpy arrays and are made
read-only on construction, so values can be shared between workers freely.
Coordinates everywhere are ``(x, y)`` = (column, row).
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BoxOutsideImage,
    CorruptData,
    EmptyMask,
    IoError,
    NonBinaryMask,
    UnsupportedFormat,
)

PathLike = Union[str, os.PathLike]


class ViewKind(str, enum.Enum):
    AP = "AP"
    LAT = "LAT"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel integer raster with an explicit bit depth (8 or 16)."""

    pixels: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise UnsupportedFormat(f"bit depth must be 8 or 16, got {self.bit_depth}")
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise UnsupportedFormat(f"expected a non-empty 2-D raster, got shape {px.shape}")
        if not np.issubdtype(px.dtype, np.integer):
            if not np.all(np.isfinite(px)) or np.any(px != np.round(px)):
                raise CorruptData("pixel values must be integers")
        if px.min() < 0 or px.max() > self.maxval:
            raise CorruptData(f"pixel values outside [0, {self.maxval}]")
        dtype = np.uint8 if self.bit_depth == 8 else np.uint16
        object.__setattr__(self, "pixels", _frozen(px.astype(dtype)))

    @property
    def maxval(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.bit_depth == other.bit_depth and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean raster; ``True`` marks lung (foreground) pixels."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.size == 0:
            raise UnsupportedFormat(f"expected a non-empty 2-D mask, got shape {b.shape}")
        if b.dtype != bool:
            if not np.isin(b, (0, 1)).all():
                raise NonBinaryMask("mask values must be 0 or 1")
            b = b.astype(bool)
        object.__setattr__(self, "bits", _frozen(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())

    def any(self) -> bool:
        return bool(self.bits.any())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with inclusive integer corners."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"negative box coordinates: {self}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"inverted box: {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, other: "BBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and other.x_max <= self.x_max
            and other.y_max <= self.y_max
        )

    def fits(self, width: int, height: int) -> bool:
        return self.x_max < width and self.y_max < height

    def union(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def slices(self) -> tuple[slice, slice]:
        """Row/column slices selecting this box from a ``(h, w)`` array."""
        return slice(self.y_min, self.y_max + 1), slice(self.x_min, self.x_max + 1)

    def as_list(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


Raster = Union[GrayImage, BinaryMask]


def raster_array(value: Raster) -> np.ndarray:
    return value.pixels if isinstance(value, GrayImage) else value.bits


def like(value: Raster, arr: np.ndarray) -> Raster:
    """Wrap ``arr`` in the same raster kind (and bit depth) as ``value``."""
    if isinstance(value, GrayImage):
        return GrayImage(arr, value.bit_depth)
    return BinaryMask(arr)


def crop(value: Raster, box: BBox) -> Raster:
    if not box.fits(value.width, value.height):
        raise BoxOutsideImage(f"{box} outside {value.width}x{value.height} raster")
    return like(value, raster_array(value)[box.slices()])


def bbox_of(mask: BinaryMask) -> BBox:
    """Tightest box around the set bits of ``mask``."""
    bits = mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(bits.any(axis=1))
    if rows.size == 0:
        raise EmptyMask("mask has no set bits")
    cols = np.flatnonzero(bits.any(axis=0))
    return BBox(cols[0], rows[0], cols[-1], rows[-1])


# --- raster I/O -------------------------------------------------------------

_PGM_WS = b" \t\r\n\v\f"


def _read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Parse a binary (P5) PGM, returning the raster and its header maxval."""
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos] in _PGM_WS:
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _PGM_WS:
            pos += 1
        if start == pos:
            raise CorruptData("truncated PGM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise CorruptData(f"bad PGM header token {data[start:pos]!r}") from None
    pos += 1  # single whitespace byte before the raster
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise CorruptData(f"bad PGM header {fields}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    nbytes = width * height * dtype.itemsize
    raw = data[pos : pos + nbytes]
    if len(raw) != nbytes:
        raise CorruptData("truncated PGM raster")
    arr = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    if arr.max() > maxval:
        raise CorruptData("PGM sample exceeds header maxval")
    return arr, maxval


def _write_pgm(path: Path, arr: np.ndarray, bit_depth: int) -> None:
    maxval = (1 << bit_depth) - 1
    h, w = arr.shape
    dtype = ">u2" if bit_depth == 16 else "u1"
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    path.write_bytes(header + arr.astype(dtype).tobytes())


def _read_raster(path: PathLike) -> tuple[np.ndarray, int]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    data = path.read_bytes()
    if data[:2] == b"P5":
        arr, maxval = _read_pgm(data)
        return np.array(arr), 8 if maxval <= 255 else 16
    if data[:2] in (b"P2", b"P3", b"P6"):
        raise UnsupportedFormat(f"{path}: only binary grayscale PGM (P5) is supported")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return np.array(im, dtype=np.uint8), 8
            if mode in ("I;16", "I;16B", "I;16L"):
                return np.array(im, dtype=np.uint16), 16
            raise UnsupportedFormat(f"{path}: unsupported raster mode {mode!r}")
    except UnidentifiedImageError:
        raise UnsupportedFormat(f"{path}: not a recognised raster") from None
    except (OSError, SyntaxError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise CorruptData(f"{path}: {exc}") from exc


def load_image(path: PathLike) -> GrayImage:
    """Load an 8/16-bit grayscale PNG or P5 PGM without any rescaling."""
    arr, depth = _read_raster(path)
    return GrayImage(arr, depth)


def load_mask(path: PathLike) -> BinaryMask:
    """Load a mask raster whose values are only 0 and the full-scale value."""
    arr, depth = _read_raster(path)
    full = (1 << depth) - 1
    if not np.isin(arr, (0, full)).all():
        raise NonBinaryMask(f"{path}: values other than 0 and {full} present")
    return BinaryMask(arr == full)


def _save(arr: np.ndarray, bit_depth: int, path: PathLike) -> None:
    path = Path(path)
    try:
        if path.suffix.lower() == ".pgm":
            _write_pgm(path, arr, bit_depth)
        elif bit_depth == 8:
            Image.fromarray(arr.astype(np.uint8)).save(path, format="PNG")
        else:
            Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def save_image(img: GrayImage, path: PathLike) -> None:
    _save(img.pixels, img.bit_depth, path)


def save_mask(mask: BinaryMask, path: PathLike) -> None:
    """Masks are written as 8-bit rasters with values 0/255."""
    _save(mask.bits.astype(np.uint8) * 255, 8, path)
