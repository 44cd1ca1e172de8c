"""Slow, direct reference implementations used to cross-check fast paths.

Everything here is written as close to the defining formula as
possible: per-pixel loops, dense convolutions, scanline flood fill.
These functions are deliberately independent of the vectorized
implementations they verify and are only meant for small inputs.
"""

import math

import numpy as np


def erode_disk_direct(mask, radius: float) -> np.ndarray:
    """Erosion by a Euclidean disk, replicate border, one offset at a time."""
    mask = np.asarray(mask, dtype=bool)
    r = int(math.floor(radius))
    if r < 0:
        raise ValueError("radius must be >= 0")
    h, w = mask.shape
    out = mask.copy()
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy * dy + dx * dx > radius * radius:
                continue
            ys = np.clip(np.arange(h) + dy, 0, h - 1)
            xs = np.clip(np.arange(w) + dx, 0, w - 1)
            out &= mask[ys][:, xs]
    return out


def sad_direct(pred, gt, region) -> float:
    terms = []
    h, w = pred.shape
    for i in range(h):
        for j in range(w):
            if region[i, j]:
                terms.append(abs(pred[i, j] - gt[i, j]))
    return math.fsum(terms) / 1000.0


def mse_direct(pred, gt, region) -> float:
    terms = []
    h, w = pred.shape
    for i in range(h):
        for j in range(w):
            if region[i, j]:
                terms.append((pred[i, j] - gt[i, j]) ** 2)
    return math.fsum(terms) / len(terms)


def _gauss_taps(sigma):
    epsilon = 1e-2
    radius = int(sigma * math.sqrt(-2.0 * math.log(math.sqrt(2.0 * math.pi) * sigma * epsilon)))
    radius = max(radius, 1)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(xs**2) / (2.0 * sigma**2))
    g /= g.sum()
    d = -xs / sigma**2 * g
    return g, d


def conv2d_replicate_direct(img, kernel) -> np.ndarray:
    """Dense 2-D correlation with clamped out-of-bounds indexing."""
    img = np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    h, w = img.shape
    out = np.zeros_like(img)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for u in range(kh):
                for v in range(kw):
                    ii = min(max(i + u - ry, 0), h - 1)
                    jj = min(max(j + v - rx, 0), w - 1)
                    acc += kernel[u, v] * img[ii, jj]
            out[i, j] = acc
    return out


def gradient_magnitude_direct(img, sigma: float) -> np.ndarray:
    """Gradient magnitude from dense 2-D outer-product kernels."""
    g, d = _gauss_taps(sigma)
    kx = np.outer(g, d)  # smooth vertically, differentiate horizontally
    ky = np.outer(d, g)
    gx = conv2d_replicate_direct(img, kx)
    gy = conv2d_replicate_direct(img, ky)
    return np.sqrt(gx**2 + gy**2)


def grad_metric_direct(pred, gt, region, sigma: float) -> float:
    mag_p = gradient_magnitude_direct(np.asarray(pred, dtype=np.float64), sigma)
    mag_g = gradient_magnitude_direct(np.asarray(gt, dtype=np.float64), sigma)
    total = 0.0
    h, w = pred.shape
    for i in range(h):
        for j in range(w):
            if region[i, j]:
                total += (mag_p[i, j] - mag_g[i, j]) ** 2
    return total / 1000.0


def _components_4_direct(mask):
    """4-connected components in first-encounter raster order."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or seen[i, j]:
                continue
            comp = []
            stack = [(i, j)]
            seen[i, j] = True
            while stack:
                y, x = stack.pop()
                comp.append((y, x))
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            yield comp


def largest_component_direct(mask) -> np.ndarray:
    """Largest 4-connected component; earliest raster-order seed wins ties."""
    best = None
    for comp in _components_4_direct(mask):
        if best is None or len(comp) > len(best):
            best = comp
    out = np.zeros(mask.shape, dtype=bool)
    if best:
        for y, x in best:
            out[y, x] = True
    return out


def conn_metric_direct(pred, gt, region, theta: float, levels: int) -> float:
    """Connectivity metric recomputed with scanline flood fill per level."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    h, w = pred.shape
    assigned = {}
    step = 1.0 / levels
    for k in range(1, levels + 1):
        thresh = k * step
        inter = (pred >= thresh) & (gt >= thresh)
        if not inter.any():
            continue
        omega = largest_component_direct(inter)
        for i in range(h):
            for j in range(w):
                if (i, j) not in assigned and not omega[i, j]:
                    assigned[(i, j)] = (k - 1) * step
    total = 0.0
    for i in range(h):
        for j in range(w):
            if not region[i, j]:
                continue
            level = assigned.get((i, j), 1.0)
            dp = pred[i, j] - level
            dg = gt[i, j] - level
            phi_p = 1.0 - dp if dp >= theta else 1.0
            phi_g = 1.0 - dg if dg >= theta else 1.0
            total += abs(phi_p - phi_g)
    return total / 1000.0


def matting_loss_direct(pred, gt, known, transition, sigma: float):
    """(l2_known, l1_transition, grad_term) by direct summation."""
    h, w = pred.shape
    l2 = 0.0
    nk = 0
    l1 = 0.0
    nt = 0
    for i in range(h):
        for j in range(w):
            d = pred[i, j] - gt[i, j]
            if known[i, j]:
                l2 += d * d
                nk += 1
            if transition[i, j]:
                l1 += abs(d)
                nt += 1
    l2 = l2 / nk if nk else 0.0
    l1 = l1 / nt if nt else 0.0
    mag_p = gradient_magnitude_direct(pred, sigma)
    mag_g = gradient_magnitude_direct(gt, sigma)
    grad_term = 0.0
    for i in range(h):
        for j in range(w):
            grad_term += abs(mag_p[i, j] - mag_g[i, j])
    grad_term /= h * w
    return l2, l1, grad_term


def central_difference_gradient(loss_fn, pred, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss over every pixel."""
    pred = np.asarray(pred, dtype=np.float64)
    out = np.zeros_like(pred)
    it = np.nditer(pred, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        bumped = pred.copy()
        bumped[idx] = pred[idx] + h
        up = loss_fn(bumped)
        bumped[idx] = pred[idx] - h
        down = loss_fn(bumped)
        out[idx] = (up - down) / (2.0 * h)
        it.iternext()
    return out


def segment_distance_mask(p0, p1, radius: float, width: int, height: int) -> np.ndarray:
    """Pixels whose center lies within ``radius`` of the segment p0-p1."""
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    vx, vy = x1 - x0, y1 - y0
    norm_sq = vx * vx + vy * vy
    out = np.zeros((height, width), dtype=bool)
    for i in range(height):
        for j in range(width):
            if norm_sq == 0.0:
                t = 0.0
            else:
                t = min(max(((j - x0) * vx + (i - y0) * vy) / norm_sq, 0.0), 1.0)
            cx, cy = x0 + t * vx, y0 + t * vy
            if (j - cx) ** 2 + (i - cy) ** 2 <= radius * radius:
                out[i, j] = True
    return out


def sep_conv_direct(fm, depthwise, pointwise, bias, dilation: int, stride: int) -> np.ndarray:
    """Depthwise + pointwise + bias + ReLU, quadruple loop, clamped borders."""
    fm = np.asarray(fm, dtype=np.float64)
    c_in, h, w = fm.shape
    c_out = pointwise.shape[0]
    mid = np.zeros((c_in, h, w))
    for ch in range(c_in):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for u in range(3):
                    for v in range(3):
                        ii = min(max(i + (u - 1) * dilation, 0), h - 1)
                        jj = min(max(j + (v - 1) * dilation, 0), w - 1)
                        acc += depthwise[ch, u, v] * fm[ch, ii, jj]
                mid[ch, i, j] = acc
    out_h = (h + stride - 1) // stride
    out_w = (w + stride - 1) // stride
    out = np.zeros((c_out, out_h, out_w))
    for co in range(c_out):
        for oi in range(out_h):
            for oj in range(out_w):
                acc = bias[co]
                for ci in range(c_in):
                    acc += pointwise[co, ci] * mid[ci, oi * stride, oj * stride]
                out[co, oi, oj] = max(acc, 0.0)
    return out
