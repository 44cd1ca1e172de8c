"""Progressive trimap deformation: scribble and click guidance synthesis.

The pipeline shrinks a trimap's definite regions into sparse guidance:
sample a handful of well-separated points inside each region, fit cubic
curves through consecutive point triples, rasterize the curves as thick
strokes, clip the strokes back to their source regions, and merge the
two stroke sets into a three-valued guidance map. Stroke thickness
follows an exponential decay schedule over training steps, so guidance
degrades smoothly from nearly-the-trimap to thin scribbles.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractViolationError, ShapeMismatchError
from .raster import as_mask, as_trimap
from .rng import Rng
from .trimap import masks

# Rejection sampling gives up on a point slot after this many draws.
SAMPLE_ATTEMPTS = 100

# Consecutive stamps along a rasterized curve are at most this far
# apart, so stroke unions have no gaps at any thickness >= 1.
ARC_STEP = 0.5

# Parameter advance between raw curve evaluations, before arc-length
# densification.
PARAM_STEP = 0.25


@dataclass(frozen=True)
class PointSet:
    """Sampled anchor points, pixel (x, y) coordinates, for one region."""

    points: tuple
    region: str = "fg"

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ThicknessSchedule:
    """Exponential stroke-thickness decay over training steps."""

    t_start: float = 800.0
    t_end: float = 40.0
    decay_steps: int = 530_000
    hold_steps: int = 70_000

    def __post_init__(self):
        if not (self.t_start >= self.t_end > 0):
            raise ValueError("schedule requires t_start >= t_end > 0")
        if self.decay_steps <= 0:
            raise ValueError("decay_steps must be positive")


def thickness_at(step: int, sched: ThicknessSchedule = ThicknessSchedule()) -> int:
    """Stroke thickness in pixels at a training step.

    Geometric interpolation from t_start to t_end across decay_steps,
    rounded half-up; constant t_end afterwards.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    if step > sched.decay_steps:
        return int(math.floor(sched.t_end + 0.5))
    ratio = sched.t_end / sched.t_start
    value = sched.t_start * ratio ** (step / sched.decay_steps)
    return int(math.floor(value + 0.5))


def sample_points(mask, max_points: int, min_dist: float, rng: Rng, region: str = "fg") -> PointSet:
    """Sample up to ``max_points`` distinct mask pixels, pairwise >= min_dist apart.

    Rejection sampling: each point slot gets SAMPLE_ATTEMPTS uniform
    draws over the mask pixels; the first draw far enough from every
    accepted point is kept. When a slot exhausts its attempts, sampling
    stops early. An empty mask yields an empty point set.
    """
    if max_points < 0:
        raise ValueError("max_points must be >= 0")
    if min_dist < 0:
        raise ValueError("min_dist must be >= 0")
    mask = as_mask(mask)
    flat = np.flatnonzero(mask)
    if flat.size == 0 or max_points == 0:
        return PointSet(points=(), region=region)
    width = mask.shape[1]
    accepted = []
    min_sq = min_dist * min_dist
    for _ in range(max_points):
        placed = False
        for _ in range(SAMPLE_ATTEMPTS):
            idx = int(flat[rng.randrange(flat.size)])
            y, x = divmod(idx, width)
            ok = True
            for (px, py) in accepted:
                if px == x and py == y:
                    ok = False
                    break
                dx = px - x
                dy = py - y
                if dx * dx + dy * dy < min_sq:
                    ok = False
                    break
            if ok:
                accepted.append((x, y))
                placed = True
                break
        if not placed:
            break
    return PointSet(points=tuple(accepted), region=region)


def _fit_min_norm_cubic(t, v):
    """Minimum-norm cubic a*t^3 + b*t^2 + c*t + d through three (t, v) pairs."""
    a = np.array([[ti**3, ti**2, ti, 1.0] for ti in t], dtype=np.float64)
    coeffs, *_ = np.linalg.lstsq(a, np.asarray(v, dtype=np.float64), rcond=None)
    return coeffs


def _eval_cubic(coeffs, t):
    return ((coeffs[0] * t + coeffs[1]) * t + coeffs[2]) * t + coeffs[3]


def _curve_polyline(triple):
    """Dense (x, y) samples along the cubic through a 3-point triple.

    Fits y(x) when the x coordinates are pairwise distinct, x(y) when
    only the y coordinates are; fully degenerate triples fall back to
    the bare points. The fit is the minimum-norm exact interpolant of
    the underdetermined 3x4 system, a canonical reproducible choice.
    """
    xs = [float(p[0]) for p in triple]
    ys = [float(p[1]) for p in triple]
    if len(set(xs)) == 3:
        t, v, swap = xs, ys, False
    elif len(set(ys)) == 3:
        t, v, swap = ys, xs, True
    else:
        return [(x, y) for x, y in zip(xs, ys)]
    coeffs = _fit_min_norm_cubic(t, v)
    t0, t1 = min(t), max(t)
    n = max(1, int(math.ceil((t1 - t0) / PARAM_STEP)))
    samples = []
    for k in range(n + 1):
        tk = t0 + (t1 - t0) * k / n
        vk = float(_eval_cubic(coeffs, tk))
        samples.append((vk, tk) if swap else (tk, vk))
    return samples


def _densify(polyline):
    """Insert points so consecutive samples are at most ARC_STEP apart."""
    if len(polyline) <= 1:
        return list(polyline)
    out = [polyline[0]]
    for (x0, y0), (x1, y1) in zip(polyline, polyline[1:]):
        dist = math.hypot(x1 - x0, y1 - y0)
        n = max(1, int(math.ceil(dist / ARC_STEP)))
        for k in range(1, n + 1):
            out.append((x0 + (x1 - x0) * k / n, y0 + (y1 - y0) * k / n))
    return out


def stamp_disks(centers, radius: float, width: int, height: int) -> np.ndarray:
    """Union of filled disks of ``radius`` around (x, y) centers.

    A pixel (x, y) is covered when its center lies within ``radius`` of
    any stamp center (Euclidean, closed disk).
    """
    centers = np.asarray(list(centers), dtype=np.float64).reshape(-1, 2)
    if centers.shape[0] == 0 or radius < 0:
        return np.zeros((height, width), dtype=bool)
    tree = cKDTree(centers)
    ys, xs = np.mgrid[0:height, 0:width]
    pix = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    dist, _ = tree.query(pix, k=1, distance_upper_bound=radius + 1e-9)
    return (dist <= radius).reshape(height, width)


def fit_scribble(points: PointSet, thickness: float, width: int, height: int) -> np.ndarray:
    """Rasterize scribble strokes through sampled points as a binary mask.

    Points are consumed three at a time, in sampled order; each triple
    is joined by a fitted cubic, stamped with disks of diameter
    ``thickness`` every ARC_STEP of arc length. Leftover 1-2 points are
    stamped as single disks. Fewer than one point yields an empty mask.

    Coverage guarantee: every pixel within
    sqrt((thickness/2)^2 - (ARC_STEP/2)^2) of the sampled polyline is
    covered, and no pixel farther than thickness/2 from it is.
    """
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    pts = list(points.points)
    centers = []
    n_triples = len(pts) // 3
    for i in range(n_triples):
        triple = pts[3 * i : 3 * i + 3]
        centers.extend(_densify(_curve_polyline(triple)))
    for p in pts[3 * n_triples :]:
        centers.append((float(p[0]), float(p[1])))
    return stamp_disks(centers, thickness / 2.0, width, height)


def clip_scribble(scribble, region_mask) -> np.ndarray:
    """Restrict a scribble mask to its region: pixelwise AND."""
    scribble = as_mask(scribble)
    region_mask = as_mask(region_mask)
    if scribble.shape != region_mask.shape:
        raise ShapeMismatchError("region_mask", scribble.shape, region_mask.shape)
    return scribble & region_mask


def compose_guidance(p_fg, p_bg) -> np.ndarray:
    """Merge clipped fg/bg strokes into a guidance map.

    Pixelwise ``0.5 + 0.5 * p_fg - 0.5 * p_bg``: 1 on foreground
    strokes, 0 on background strokes, 0.5 elsewhere. Overlapping inputs
    are a contract violation (clipping to disjoint trimap regions
    guarantees disjointness).
    """
    p_fg = as_mask(p_fg)
    p_bg = as_mask(p_bg)
    if p_fg.shape != p_bg.shape:
        raise ShapeMismatchError("p_bg", p_fg.shape, p_bg.shape)
    overlap = p_fg & p_bg
    if overlap.any():
        raise ContractViolationError(
            f"fg and bg strokes overlap on {int(overlap.sum())} pixel(s)"
        )
    return 0.5 + 0.5 * p_fg.astype(np.float64) - 0.5 * p_bg.astype(np.float64)


def no_guidance(width: int, height: int) -> np.ndarray:
    """Guidance map carrying no hints: constant 0.5."""
    return np.full((height, width), 0.5, dtype=np.float64)


def make_clickmap(
    fg_pts: PointSet,
    bg_pts: PointSet,
    diameter: float,
    width: int,
    height: int,
    fg_mask=None,
    bg_mask=None,
) -> np.ndarray:
    """Guidance map of filled click disks over a 0.5 field.

    Disks of the given diameter are stamped at foreground points (value
    1) and background points (value 0). When region masks are supplied
    the disks are clipped to them, which makes fg/bg disjointness
    unconditional.
    """
    if diameter < 1:
        raise ValueError("diameter must be >= 1")
    radius = diameter / 2.0
    fg = stamp_disks([(float(x), float(y)) for x, y in fg_pts.points], radius, width, height)
    bg = stamp_disks([(float(x), float(y)) for x, y in bg_pts.points], radius, width, height)
    if fg_mask is not None:
        fg = clip_scribble(fg, fg_mask)
    if bg_mask is not None:
        bg = clip_scribble(bg, bg_mask)
    return compose_guidance(fg, bg)


def deform(
    trimap,
    step: int,
    sched: ThicknessSchedule = ThicknessSchedule(),
    rng: Rng = None,
    max_points: int = 10,
    min_dist: float = 50.0,
    thickness: float = None,
) -> np.ndarray:
    """Full deformation pipeline: trimap -> scribble guidance at a step.

    Samples up to ``max_points`` points per region (foreground first,
    then background, so results are a pure function of the rng seed),
    draws cubic strokes at the scheduled thickness, clips each stroke
    set to its source region and merges. Guidance never labels a pixel
    the source trimap did not: the unknown region only grows. Passing
    ``thickness`` bypasses the schedule.
    """
    if rng is None:
        raise ValueError("deform requires an Rng")
    trimap = as_trimap(trimap)
    fg_mask, bg_mask = masks(trimap)
    height, width = trimap.shape
    if thickness is None:
        thickness = thickness_at(step, sched)
    fg_pts = sample_points(fg_mask, max_points, min_dist, rng, region="fg")
    bg_pts = sample_points(bg_mask, max_points, min_dist, rng, region="bg")
    s_fg = fit_scribble(fg_pts, thickness, width, height)
    s_bg = fit_scribble(bg_pts, thickness, width, height)
    p_fg = clip_scribble(s_fg, fg_mask)
    p_bg = clip_scribble(s_bg, bg_mask)
    return compose_guidance(p_fg, p_bg)
