"""Matting evaluation metrics: SAD, MSE, Grad and Conn.

All four are computed over a pixel region, conventionally the unknown
band of an evaluation trimap. SAD, Grad and Conn carry the customary
1/1000 scaling; MSE is the mean over the region. Grad compares
Gaussian-derivative gradient magnitudes; Conn compares connectivity
decay toward the largest mutually-connected component across alpha
thresholds.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyRegionError, ShapeMismatchError
from .raster import as_alpha, as_mask, as_trimap
from .trimap import partition

DEFAULT_SIGMA = 1.4
DEFAULT_THETA = 0.15
DEFAULT_LEVELS = 10


@dataclass(frozen=True)
class MetricReport:
    """One evaluated image: the four metrics plus the region size."""

    sad: float
    mse: float
    grad: float
    conn: float
    pixels_t: int

    def as_dict(self):
        return {
            "sad": self.sad,
            "mse": self.mse,
            "grad": self.grad,
            "conn": self.conn,
            "pixels_T": self.pixels_t,
        }


@dataclass(frozen=True)
class GaussianDerivativeKernel:
    """1-D taps of a Gaussian and its first derivative.

    The Gaussian taps are normalized to sum to 1; the derivative taps
    are the analytic derivative of that normalized Gaussian sampled on
    the same grid (antisymmetric, so they sum to 0). The truncation
    radius keeps taps down to about 1e-2 of the peak.
    """

    sigma: float
    gaussian: np.ndarray
    derivative: np.ndarray

    @property
    def radius(self) -> int:
        return (len(self.gaussian) - 1) // 2


def gaussian_derivative_kernel(sigma: float = DEFAULT_SIGMA) -> GaussianDerivativeKernel:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    epsilon = 1e-2
    radius = int(sigma * math.sqrt(-2.0 * math.log(math.sqrt(2.0 * math.pi) * sigma * epsilon)))
    radius = max(radius, 1)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(xs**2) / (2.0 * sigma**2))
    g /= g.sum()
    d = -xs / sigma**2 * g
    return GaussianDerivativeKernel(sigma=sigma, gaussian=g, derivative=d)


def correlate1d_replicate(img, taps, axis: int) -> np.ndarray:
    """1-D correlation along an axis with replicate (clamped) borders."""
    img = np.asarray(img, dtype=np.float64)
    taps = np.asarray(taps, dtype=np.float64)
    r = (len(taps) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img)
    for t in range(len(taps)):
        if axis == 0:
            window = padded[t : t + img.shape[0], :]
        else:
            window = padded[:, t : t + img.shape[1]]
        out += taps[t] * window
    return out


def gauss_gradient(img, kernel: GaussianDerivativeKernel):
    """Horizontal and vertical Gaussian-derivative responses (gx, gy)."""
    smooth_rows = correlate1d_replicate(img, kernel.gaussian, axis=0)
    gx = correlate1d_replicate(smooth_rows, kernel.derivative, axis=1)
    smooth_cols = correlate1d_replicate(img, kernel.gaussian, axis=1)
    gy = correlate1d_replicate(smooth_cols, kernel.derivative, axis=0)
    return gx, gy


def gradient_magnitude(img, kernel: GaussianDerivativeKernel) -> np.ndarray:
    gx, gy = gauss_gradient(img, kernel)
    return np.hypot(gx, gy)


def _check_pair(pred, gt, region):
    pred = as_alpha(pred)
    gt = as_alpha(gt)
    region = as_mask(region)
    if pred.shape != gt.shape:
        raise ShapeMismatchError("gt", pred.shape, gt.shape)
    if pred.shape != region.shape:
        raise ShapeMismatchError("region", pred.shape, region.shape)
    return pred, gt, region


def _warn_empty(name):
    warnings.warn(f"{name}: empty region, returning 0", RuntimeWarning, stacklevel=3)


def sad(pred, gt, region) -> float:
    """Sum of absolute differences over the region, in units of 1000.

    The sum is exact (correctly rounded via fsum), so results are
    independent of pixel order.
    """
    pred, gt, region = _check_pair(pred, gt, region)
    if not region.any():
        _warn_empty("sad")
        return 0.0
    return math.fsum(np.abs(pred - gt)[region]) / 1000.0


def mse(pred, gt, region) -> float:
    """Mean squared error over the region; the region must be nonempty."""
    pred, gt, region = _check_pair(pred, gt, region)
    count = int(region.sum())
    if count == 0:
        raise EmptyRegionError("mse is undefined on an empty region")
    return math.fsum(((pred - gt) ** 2)[region]) / count


def grad_metric(pred, gt, region, sigma: float = DEFAULT_SIGMA) -> float:
    """Squared gradient-magnitude discrepancy over the region, / 1000."""
    pred, gt, region = _check_pair(pred, gt, region)
    if not region.any():
        _warn_empty("grad_metric")
        return 0.0
    kernel = gaussian_derivative_kernel(sigma)
    mag_pred = gradient_magnitude(pred, kernel)
    mag_gt = gradient_magnitude(gt, kernel)
    return float(((mag_pred - mag_gt) ** 2)[region].sum() / 1000.0)


def _largest_component(mask) -> np.ndarray:
    """Largest 4-connected component; ties go to the earliest pixel in raster order."""
    labels, count = ndimage.label(mask)
    if count == 0:
        return np.zeros_like(mask, dtype=bool)
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=count + 1)[1:]
    best_size = sizes.max()
    candidates = np.flatnonzero(sizes == best_size) + 1
    if len(candidates) == 1:
        best = int(candidates[0])
    else:
        best = int(min(candidates, key=lambda c: int(np.argmax(flat == c))))
    return labels == best


def connectivity_levels(pred, gt, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Per-pixel level at which a pixel drops out of the shared main component.

    For thresholds k/levels (k = 1..levels), both mattes are binarized
    and the largest 4-connected component of their intersection is
    taken; a pixel leaving that component for the first time is
    assigned the previous threshold. Levels with an empty intersection
    are skipped. Pixels that never drop out get 1.
    """
    h, w = pred.shape
    step = 1.0 / levels
    l_map = np.full((h, w), -1.0, dtype=np.float64)
    for k in range(1, levels + 1):
        thresh = k * step
        inter = (pred >= thresh) & (gt >= thresh)
        if not inter.any():
            continue
        omega = _largest_component(inter)
        newly_out = (l_map == -1.0) & ~omega
        l_map[newly_out] = (k - 1) * step
    l_map[l_map == -1.0] = 1.0
    return l_map


def conn_metric(
    pred, gt, region, theta: float = DEFAULT_THETA, levels: int = DEFAULT_LEVELS
) -> float:
    """Connectivity discrepancy over the region, / 1000.

    Each matte's per-pixel connectivity source is its alpha minus the
    drop-out level; decays of at least ``theta`` count as degradation,
    smaller ones are forgiven.
    """
    pred, gt, region = _check_pair(pred, gt, region)
    if not region.any():
        _warn_empty("conn_metric")
        return 0.0
    l_map = connectivity_levels(pred, gt, levels=levels)
    pred_d = pred - l_map
    gt_d = gt - l_map
    pred_phi = 1.0 - pred_d * (pred_d >= theta)
    gt_phi = 1.0 - gt_d * (gt_d >= theta)
    return float(np.abs(pred_phi - gt_phi)[region].sum() / 1000.0)


def evaluate(
    pred,
    gt,
    eval_trimap,
    sigma: float = DEFAULT_SIGMA,
    theta: float = DEFAULT_THETA,
    levels: int = DEFAULT_LEVELS,
) -> MetricReport:
    """All four metrics over the transition region of an evaluation trimap."""
    eval_trimap = as_trimap(eval_trimap)
    region = partition(eval_trimap).transition
    return MetricReport(
        sad=sad(pred, gt, region),
        mse=mse(pred, gt, region),
        grad=grad_metric(pred, gt, region, sigma=sigma),
        conn=conn_metric(pred, gt, region, theta=theta, levels=levels),
        pixels_t=int(region.sum()),
    )
