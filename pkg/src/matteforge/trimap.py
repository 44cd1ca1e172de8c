"""Trimap synthesis from ground-truth alpha and region bookkeeping.

A trimap labels each pixel definite background (0), unknown (0.5) or
definite foreground (1). It is derived from an alpha matte by shrinking
the near-pure foreground and background sets with a disk-shaped erosion,
which is the standard dilate/erode construction used to build matting
training targets.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError
from .raster import as_alpha, as_trimap

# One 8-bit quantization step: an alpha stored as 254/255 still counts
# as pure foreground, 1/255 as pure background.
EPSILON = 1.0 / 255.0


@dataclass(frozen=True)
class RegionPartition:
    """Known (pure fg or bg) and transition pixel sets of a trimap."""

    known: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        if self.known.shape != self.transition.shape:
            raise ShapeMismatchError("transition", self.known.shape, self.transition.shape)
        if np.any(self.known & self.transition):
            raise ValueError("known and transition sets overlap")
        if not np.all(self.known | self.transition):
            raise ValueError("known and transition sets do not cover the image")


def disk_offsets(radius: float) -> np.ndarray:
    """Integer (dy, dx) offsets of a Euclidean disk, dy^2 + dx^2 <= r^2."""
    r = int(np.floor(radius))
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    keep = ys * ys + xs * xs <= radius * radius
    return np.stack([ys[keep], xs[keep]], axis=1)


def disk_footprint(radius: float) -> np.ndarray:
    """Boolean (2r+1, 2r+1) structuring element for a Euclidean disk."""
    r = int(np.floor(radius))
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    return ys * ys + xs * xs <= radius * radius


def erode(mask, radius: float) -> np.ndarray:
    """Erode a boolean mask by a disk, replicating values at the border.

    Out-of-bounds samples take the nearest border pixel's value, so a
    full-plane mask stays full under any radius.
    """
    mask = np.asarray(mask, dtype=bool)
    if radius <= 0 or not mask.size:
        return mask.copy()
    out = ndimage.minimum_filter(
        mask.astype(np.uint8), footprint=disk_footprint(radius), mode="nearest"
    )
    return out.astype(bool)


def make_trimap(alpha, fg_shrink: float, bg_shrink: float) -> np.ndarray:
    """Build a {0, 0.5, 1} trimap from an alpha matte.

    Foreground is the erosion of {alpha >= 1 - eps} by a disk of radius
    ``fg_shrink``; background is the erosion of {alpha <= eps} by a disk
    of radius ``bg_shrink``; everything else is unknown. Degenerate
    alphas simply yield all-unknown trimaps.
    """
    if fg_shrink < 0 or bg_shrink < 0:
        raise ValueError("shrink radii must be >= 0")
    alpha = as_alpha(alpha)
    fg = erode(alpha >= 1.0 - EPSILON, fg_shrink)
    bg = erode(alpha <= EPSILON, bg_shrink)
    tri = np.full(alpha.shape, 0.5, dtype=np.float64)
    tri[fg] = 1.0
    tri[bg] = 0.0
    return tri


def partition(trimap) -> RegionPartition:
    """Split a trimap into its known and transition pixel sets."""
    trimap = as_trimap(trimap)
    transition = trimap == 0.5
    return RegionPartition(known=~transition, transition=transition)


def masks(trimap):
    """Foreground and background masks of a trimap, as (fg, bg)."""
    trimap = as_trimap(trimap)
    return trimap == 1.0, trimap == 0.0


def random_shrink_radii(rng, size: int, low: float = 5.0, high: float = 30.0):
    """Draw (fg, bg) erosion radii, scaled from the 512 px reference frame.

    The [5, 30] px range matches common matting augmentation at 512x512;
    for other image sizes the range scales linearly, clamped to >= 2 px
    so the unknown band never vanishes entirely.
    """
    scale = size / 512.0
    lo, hi = low * scale, high * scale
    fg = max(2.0, rng.uniform(lo, hi))
    bg = max(2.0, rng.uniform(lo, hi))
    return fg, bg
