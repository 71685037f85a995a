"""Contrast preprocessing: CLAHE and z-normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams
from .imagecore import GrayImage

# bins used for 16-bit input; each bin spans 16 consecutive gray levels
BINS_16BIT = 4096
DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True)
class ClaheParams:
    """CLAHE settings.

    ``clip_limit`` is a multiple of the uniform bin height (pixels per tile
    divided by the number of bins). ``tiles_x``/``tiles_y`` give the grid of
    contextual regions.
    """

    clip_limit: float = 2.0
    tiles_x: int = 8
    tiles_y: int = 8

    def __post_init__(self):
        if not self.clip_limit > 0:
            raise InvalidParams(f"clip_limit must be positive, got {self.clip_limit}")
        if self.tiles_x < 1 or self.tiles_y < 1:
            raise InvalidParams(f"tile grid must be at least 1x1, got {self.tiles_x}x{self.tiles_y}")


def n_bins(bit_depth: int) -> int:
    return 256 if bit_depth == 8 else BINS_16BIT


def to_bins(values: np.ndarray, bit_depth: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return values if bit_depth == 8 else values >> 4


def tile_edges(length: int, tiles: int) -> np.ndarray:
    """Integer tile boundaries; tile ``j`` spans ``[edges[j], edges[j+1])``."""
    return np.arange(tiles + 1) * length // tiles


def clipped_mapping(bins: np.ndarray, nbins: int, clip_limit: float, maxval: int) -> np.ndarray:
    """Gray-level mapping of one contextual region.

    The histogram is clipped at ``max(1, int(clip_limit * n / nbins))`` counts,
    the clipped excess is spread evenly over all bins in a single pass (the
    ``excess % nbins`` remainder is dropped) and the cumulative histogram is
    scaled by ``maxval / n``. Returns a float table indexed by bin.
    """
    n = bins.size
    hist = np.bincount(bins.ravel(), minlength=nbins)
    clip = max(1, int(clip_limit * n / nbins))
    excess = int(np.maximum(hist - clip, 0).sum())
    hist = np.minimum(hist, clip) + excess // nbins
    return np.cumsum(hist) * (maxval / n)


def _interp_axis(length: int, edges: np.ndarray):
    """Lower/upper tile index and upper weight for every coordinate on one axis."""
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    pos = np.arange(length, dtype=float)
    if centers.size == 1:
        zeros = np.zeros(length, dtype=int)
        return zeros, zeros, np.zeros(length)
    lo = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, centers.size - 2)
    hi = lo + 1
    w = (pos - centers[lo]) / (centers[hi] - centers[lo])
    return lo, hi, np.clip(w, 0.0, 1.0)


def clahe(img: GrayImage, params: ClaheParams | None = None) -> GrayImage:
    """Contrast Limited Adaptive Histogram Equalization.

    Each tile of the grid gets its own clipped-histogram mapping; every pixel
    is mapped by bilinear interpolation between the mappings of the four
    nearest tile centers. Beyond the outermost centers the interpolation
    clamps to the nearest center. Output keeps the input size and bit depth.

    Raises
    ------
    InvalidParams
        If the tile grid has more tiles than pixels along either axis.
    """
    params = params or ClaheParams()
    h, w = img.shape
    if params.tiles_x > w or params.tiles_y > h:
        raise InvalidParams(
            f"{params.tiles_x}x{params.tiles_y} tile grid larger than {w}x{h} image"
        )
    nbins = n_bins(img.bit_depth)
    bins = to_bins(img.pixels, img.bit_depth)
    ex = tile_edges(w, params.tiles_x)
    ey = tile_edges(h, params.tiles_y)

    luts = np.empty((params.tiles_y, params.tiles_x, nbins))
    for ty in range(params.tiles_y):
        for tx in range(params.tiles_x):
            tile = bins[ey[ty] : ey[ty + 1], ex[tx] : ex[tx + 1]]
            luts[ty, tx] = clipped_mapping(tile, nbins, params.clip_limit, img.maxval)

    x0, x1, wx = _interp_axis(w, ex)
    y0, y1, wy = _interp_axis(h, ey)
    Y0, X0 = y0[:, None], x0[None, :]
    Y1, X1 = y1[:, None], x1[None, :]
    WX, WY = wx[None, :], wy[:, None]
    top = (1 - WX) * luts[Y0, X0, bins] + WX * luts[Y0, X1, bins]
    bottom = (1 - WX) * luts[Y1, X0, bins] + WX * luts[Y1, X1, bins]
    out = (1 - WY) * top + WY * bottom
    out = np.clip(np.floor(out + 0.5), 0, img.maxval)
    return GrayImage(out, img.bit_depth)


def znormalize(img: GrayImage, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Return ``(x - mean) / (std + epsilon)`` as a float64 array.

    ``std`` is the population standard deviation. ``epsilon`` guards the
    constant-image case, where the result is all zeros.
    """
    x = np.asarray(img.pixels if isinstance(img, GrayImage) else img, dtype=np.float64)
    mu = x.mean()
    sigma = x.std()
    return (x - mu) / (sigma + epsilon)
