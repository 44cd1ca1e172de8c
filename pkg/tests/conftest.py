import numpy as np
import pytest

from matteforge.rng import Rng


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240811)


def rand_alpha(rng, h, w):
    return rng.random((h, w))


def rand_mask(rng, h, w, p=0.5):
    return rng.random((h, w)) < p


def disk_alpha(size, radius, cx=None, cy=None):
    cx = size // 2 if cx is None else cx
    cy = size // 2 if cy is None else cy
    ys, xs = np.mgrid[0:size, 0:size]
    return (((xs - cx) ** 2 + (ys - cy) ** 2) <= radius * radius).astype(np.float64)


def blob_trimap(size, fg_radius=None, band=4):
    """Disk-shaped trimap with a solid unknown band, handy for guidance tests."""
    from matteforge.trimap import make_trimap

    fg_radius = size // 3 if fg_radius is None else fg_radius
    return make_trimap(disk_alpha(size, fg_radius), band, band)


def smooth_field(rng, h, w, low=0.0, high=1.0):
    """Band-limited random field: coarse noise, bilinear resize, rescale."""
    coarse = rng.random((4, 4))
    ys = np.clip((np.arange(h) + 0.5) * (4 / h) - 0.5, 0, 3)
    xs = np.clip((np.arange(w) + 0.5) * (4 / w) - 0.5, 0, 3)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, 3)
    x1 = np.minimum(x0 + 1, 3)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    rows = coarse[y0] * (1 - fy) + coarse[y1] * fy
    out = rows[:, x0] * (1 - fx) + rows[:, x1] * fx
    lo, hi = out.min(), out.max()
    if hi > lo:
        out = (out - lo) / (hi - lo)
    return low + (high - low) * out


def seeded_rng(n=0):
    return Rng(0xC0FFEE + n)
