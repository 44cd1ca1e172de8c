"""Desk-scale dataset synthesis, guidance test sets and batch evaluation.

Directory layout under a dataset root:

    <root>/image/<id>.png     composited scene (RGB)
    <root>/alpha/<id>.png     ground-truth alpha
    <root>/trimap/<id>.png    evaluation trimaps (build kind="trimap" first)
    <root>/guidance/<id>.png  guidance maps of the most recent test set
    <root>/pred/<id>.png      predictions to evaluate
    <root>/<dir>.manifest.json  one manifest per guidance directory

Scenes are procedural stand-ins for a real matting dataset: blob
foregrounds with Gaussian-blurred alpha boundaries composited onto
smooth backgrounds. Everything derives from (seed, scene id), so
results are byte-stable regardless of worker count or ordering.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ContractViolationError, MatteForgeError, ShapeMismatchError
from .guidance import ThicknessSchedule, deform, make_clickmap, no_guidance, sample_points
from .metrics import DEFAULT_LEVELS, DEFAULT_SIGMA, DEFAULT_THETA, evaluate
from .raster import (
    as_alpha,
    atomic_write_bytes,
    byte_quantize,
    composite,
    read_map,
    write_image,
    write_map,
)
from .rng import Rng, derive_seed
from .trimap import EPSILON, make_trimap, masks, random_shrink_radii

KINDS = ("trimap", "scribblemap", "clickmap", "no_guidance")

METRIC_KEYS = ("sad", "mse", "grad", "conn")


@dataclass(frozen=True)
class Scene:
    """One synthetic matting scene; fg/bg may be absent for disk-loaded scenes."""

    id: str
    alpha: np.ndarray
    fg: np.ndarray = None
    bg: np.ndarray = None

    def __post_init__(self):
        alpha = as_alpha(self.alpha)
        if not (alpha >= 1.0 - EPSILON).any() or not (alpha <= EPSILON).any():
            raise ContractViolationError(
                f"scene {self.id}: alpha needs both pure-fg and pure-bg pixels"
            )
        for name, img in (("fg", self.fg), ("bg", self.bg)):
            if img is not None and img.shape[:2] != alpha.shape:
                raise ShapeMismatchError(name, alpha.shape, img.shape[:2])

    def composited(self) -> np.ndarray:
        if self.fg is None or self.bg is None:
            raise MatteForgeError(f"scene {self.id} has no fg/bg payload")
        return composite(self.fg, self.bg, self.alpha)


@dataclass(frozen=True)
class TestSetManifest:
    kind: str
    seed: int
    entries: tuple  # ({"id": ..., "path": ...}, ...) sorted by id

    def as_dict(self):
        return {"kind": self.kind, "seed": self.seed, "entries": list(self.entries)}


@dataclass
class TestsetParams:
    """Knobs for guidance test-set construction."""

    fg_shrink: float = None  # None -> randomized per scene
    bg_shrink: float = None
    schedule: ThicknessSchedule = field(default_factory=ThicknessSchedule)
    step: int = None  # None -> end of decay (thinnest scribbles)
    thickness: float = None  # direct override, bypasses the schedule
    max_points: int = 10
    min_dist: float = 50.0
    click_diameter: float = 40.0
    dirname: str = None  # None -> "trimap" or "guidance"


def _bilinear_grid(rng: Rng, size: int, grid: int = 4) -> np.ndarray:
    """Smooth random field in [0, 1]: low-res noise, bilinearly upsampled."""
    coarse = np.array([[rng.uniform() for _ in range(grid)] for _ in range(grid)])
    ys = np.clip((np.arange(size) + 0.5) * (grid / size) - 0.5, 0.0, grid - 1.0)
    y0 = np.floor(ys).astype(int)
    y1 = np.minimum(y0 + 1, grid - 1)
    fy = ys - y0
    rows = coarse[y0] * (1 - fy)[:, None] + coarse[y1] * fy[:, None]
    out = rows[:, y0] * (1 - fy)[None, :] + rows[:, y1] * fy[None, :]
    return out


def _smooth_rgb(rng: Rng, size: int) -> np.ndarray:
    return np.stack([_bilinear_grid(rng, size) for _ in range(3)], axis=2)


def _blob_mask(rng: Rng, size: int) -> np.ndarray:
    """Union of a few disks and one triangle, kept away from the borders."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(2 + rng.randrange(2)):
        cx = rng.uniform(0.34, 0.66) * size
        cy = rng.uniform(0.34, 0.66) * size
        r = rng.uniform(1.0 / 6.0, 0.22) * size
        mask |= (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    v = [(rng.uniform(0.28, 0.72) * size, rng.uniform(0.28, 0.72) * size) for _ in range(3)]
    (x0, y0), (x1, y1), (x2, y2) = v
    d0 = (xs - x1) * (y0 - y1) - (x0 - x1) * (ys - y1)
    d1 = (xs - x2) * (y1 - y2) - (x1 - x2) * (ys - y2)
    d2 = (xs - x0) * (y2 - y0) - (x2 - x0) * (ys - y0)
    neg = (d0 < 0) & (d1 < 0) & (d2 < 0)
    pos = (d0 > 0) & (d1 > 0) & (d2 > 0)
    mask |= neg | pos
    return mask


def synth_scene(seed: int, scene_id: str, size: int) -> Scene:
    """Deterministically build one scene from (seed, id)."""
    rng = Rng(derive_seed(seed, f"scene:{scene_id}"))
    shape = _blob_mask(rng, size)
    blur_radius = rng.uniform(1.0, 8.0)
    blurred = ndimage.gaussian_filter(
        shape.astype(np.float64), sigma=blur_radius / 2.0, mode="constant", cval=0.0
    )
    alpha = np.clip((blurred - 0.2) / 0.6, 0.0, 1.0)
    alpha = byte_quantize(alpha).astype(np.float64) / 255.0
    fg = _smooth_rgb(rng, size)
    bg = _smooth_rgb(rng, size)
    return Scene(id=scene_id, alpha=alpha, fg=fg, bg=bg)


def synth_scenes(n: int, size: int, rng: Rng) -> list:
    """Generate ``n`` seeded scenes of ``size``x``size`` pixels."""
    if n < 1:
        raise ValueError("need n >= 1 scenes")
    if size < 64:
        raise ValueError("size must be >= 64")
    return [synth_scene(rng.seed, f"scene_{i:03d}", size) for i in range(n)]


def save_scenes(scenes, root, jobs: int = 1) -> None:
    """Write image/ and alpha/ for every scene."""
    root = Path(root)

    def write_one(scene):
        write_image(root / "image" / f"{scene.id}.png", scene.composited())
        write_map(root / "alpha" / f"{scene.id}.png", scene.alpha)

    _run_parallel(write_one, scenes, jobs)


def load_scenes(root) -> list:
    """Load scenes back from alpha/ (fg/bg payloads are not stored)."""
    root = Path(root)
    ids = sorted(p.stem for p in (root / "alpha").glob("*.png"))
    if not ids:
        raise MatteForgeError(f"no alpha mattes under {root / 'alpha'}")
    return [
        Scene(id=i, alpha=read_map(root / "alpha" / f"{i}.png", kind="alpha")) for i in ids
    ]


def _run_parallel(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_trimap(root, scene_id) -> np.ndarray:
    path = Path(root) / "trimap" / f"{scene_id}.png"
    if not path.exists():
        raise MatteForgeError(
            f"missing {path}; build a kind='trimap' test set before derived kinds"
        )
    return read_map(path, kind="trimap")


def build_testset(
    scenes, kind: str, seed: int, root, params: TestsetParams = None, jobs: int = 1
) -> TestSetManifest:
    """Build one guidance test set and its manifest.

    kind="trimap" shrinks each alpha into a trimap (randomized radii
    unless fixed in params). The other kinds consume the stored trimaps:
    "scribblemap" deforms them at the scheduled thickness (end of decay
    by default), "clickmap" stamps clipped clicks at sampled points,
    "no_guidance" emits constant 0.5 maps. Per-scene randomness derives
    from (seed, id), so output bytes are independent of worker count.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    params = params or TestsetParams()
    root = Path(root)
    dirname = params.dirname or ("trimap" if kind == "trimap" else "guidance")

    def build_one(scene):
        out_path = root / dirname / f"{scene.id}.png"
        if kind == "trimap":
            rng = Rng(derive_seed(seed, f"trimap:{scene.id}"))
            size = scene.alpha.shape[0]
            if params.fg_shrink is None or params.bg_shrink is None:
                fg_r, bg_r = random_shrink_radii(rng, size)
            else:
                fg_r, bg_r = params.fg_shrink, params.bg_shrink
            guidance_map = make_trimap(scene.alpha, fg_r, bg_r)
        elif kind == "scribblemap":
            tri = _load_trimap(root, scene.id)
            rng = Rng(derive_seed(seed, f"scribble:{scene.id}"))
            step = params.step if params.step is not None else params.schedule.decay_steps
            guidance_map = deform(
                tri,
                step,
                sched=params.schedule,
                rng=rng,
                max_points=params.max_points,
                min_dist=params.min_dist,
                thickness=params.thickness,
            )
        elif kind == "clickmap":
            tri = _load_trimap(root, scene.id)
            rng = Rng(derive_seed(seed, f"click:{scene.id}"))
            fg_mask, bg_mask = masks(tri)
            fg_pts = sample_points(fg_mask, params.max_points, params.min_dist, rng, "fg")
            bg_pts = sample_points(bg_mask, params.max_points, params.min_dist, rng, "bg")
            h, w = tri.shape
            guidance_map = make_clickmap(
                fg_pts, bg_pts, params.click_diameter, w, h, fg_mask, bg_mask
            )
        else:
            h, w = scene.alpha.shape
            guidance_map = no_guidance(w, h)
        write_map(out_path, guidance_map)
        return {"id": scene.id, "path": f"{dirname}/{scene.id}.png"}

    entries = _run_parallel(build_one, scenes, jobs)
    entries.sort(key=lambda e: e["id"])
    manifest = TestSetManifest(kind=kind, seed=seed, entries=tuple(entries))
    payload = json.dumps(manifest.as_dict(), indent=2).encode("utf-8")
    atomic_write_bytes(root / f"{dirname}.manifest.json", payload)
    return manifest


@dataclass
class EvalReport:
    rows: list  # (id, MetricReport), sorted by id
    errors: list  # (id, message)
    missing: list  # ids with gt but no usable prediction/trimap
    extra: list  # prediction ids without gt
    mean: dict  # metric -> mean over successful rows

    @property
    def partial_failure(self) -> bool:
        return bool(self.errors) or bool(self.missing)


def _mean_row(rows) -> dict:
    if not rows:
        return {}
    out = {}
    for key in METRIC_KEYS:
        out[key] = sum(getattr(rep, key) for _, rep in rows) / len(rows)
    out["pixels_T"] = sum(rep.pixels_t for _, rep in rows) / len(rows)
    return out


def run_eval(
    pred_dir,
    gt_dir,
    trimap_dir,
    jobs: int = 1,
    sigma: float = DEFAULT_SIGMA,
    theta: float = DEFAULT_THETA,
    levels: int = DEFAULT_LEVELS,
) -> EvalReport:
    """Evaluate a prediction directory image by image.

    Ids are PNG stems matched across the three directories. A broken
    image produces an error row and the run continues; zero matched ids
    is a hard error.
    """
    pred_dir, gt_dir, trimap_dir = Path(pred_dir), Path(gt_dir), Path(trimap_dir)
    gt_ids = {p.stem for p in gt_dir.glob("*.png")}
    pred_ids = {p.stem for p in pred_dir.glob("*.png")}
    trimap_ids = {p.stem for p in trimap_dir.glob("*.png")}
    matched = sorted(gt_ids & pred_ids & trimap_ids)
    missing = sorted((gt_ids - pred_ids) | (gt_ids - trimap_ids))
    extra = sorted(pred_ids - gt_ids)
    if not matched:
        raise MatteForgeError("no ids matched across pred/gt/trimap directories")

    def eval_one(scene_id):
        try:
            pred = read_map(pred_dir / f"{scene_id}.png", kind="alpha")
            gt = read_map(gt_dir / f"{scene_id}.png", kind="alpha")
            tri = read_map(trimap_dir / f"{scene_id}.png", kind="trimap")
            report = evaluate(pred, gt, tri, sigma=sigma, theta=theta, levels=levels)
            return scene_id, report, None
        except Exception as exc:  # per-image failures must not kill the run
            return scene_id, None, f"{type(exc).__name__}: {exc}"

    results = _run_parallel(eval_one, matched, jobs)
    rows = [(i, rep) for i, rep, err in results if err is None]
    errors = [(i, err) for i, rep, err in results if err is not None]
    rows.sort(key=lambda r: r[0])
    errors.sort(key=lambda r: r[0])
    return EvalReport(rows=rows, errors=errors, missing=missing, extra=extra, mean=_mean_row(rows))


def eval_report_csv(report: EvalReport) -> str:
    """CSV payload: one row per image, error rows blank, then the mean row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "sad", "mse", "grad", "conn", "pixels_T"])
    by_id = {i: rep for i, rep in report.rows}
    err_ids = {i for i, _ in report.errors}
    for scene_id in sorted(by_id.keys() | err_ids):
        if scene_id in by_id:
            rep = by_id[scene_id]
            writer.writerow(
                [scene_id, repr(rep.sad), repr(rep.mse), repr(rep.grad), repr(rep.conn), rep.pixels_t]
            )
        else:
            writer.writerow([scene_id, "", "", "", "", ""])
    if report.mean:
        writer.writerow(
            ["mean"]
            + [repr(report.mean[k]) for k in METRIC_KEYS]
            + [repr(report.mean["pixels_T"])]
        )
    return buf.getvalue()


def eval_report_json(report: EvalReport) -> str:
    payload = {
        "rows": [dict(id=i, **rep.as_dict()) for i, rep in report.rows],
        "mean": report.mean,
        "errors": [{"id": i, "error": e} for i, e in report.errors],
        "missing": report.missing,
        "extra": report.extra,
    }
    return json.dumps(payload, indent=2)


def write_eval_report(report: EvalReport, csv_path=None, json_path=None) -> None:
    if csv_path is not None:
        atomic_write_bytes(csv_path, eval_report_csv(report).encode("utf-8"))
    if json_path is not None:
        atomic_write_bytes(json_path, eval_report_json(report).encode("utf-8"))


def blur_oracle_predictor(scene: Scene, guidance) -> np.ndarray:
    """Fixed guidance-consuming stand-in for a trained model.

    Blends a blurred ground truth with a blurred guidance map, so
    predictions react to the guidance layout the way a real model's
    output would, while staying fully deterministic.
    """
    base = ndimage.gaussian_filter(scene.alpha, sigma=2.0, mode="nearest")
    hint = ndimage.gaussian_filter(np.asarray(guidance, dtype=np.float64), sigma=4.0, mode="nearest")
    return np.clip(0.7 * base + 0.3 * hint, 0.0, 1.0)


def gt_predictor(scene: Scene, guidance) -> np.ndarray:
    """Perfect predictor: ignores guidance, returns the ground truth."""
    return scene.alpha


@dataclass
class StabilityReport:
    kind: str
    seeds: tuple
    variant_means: list  # one mean-metric dict per variant, in seed order
    mean: dict  # metric -> mean of variant means
    sigma: dict  # metric -> population std of variant means

    def as_dict(self):
        return {
            "kind": self.kind,
            "seeds": list(self.seeds),
            "variant_means": self.variant_means,
            "mean": self.mean,
            "sigma": self.sigma,
        }


def stability_report(
    scenes,
    kind: str,
    n_variants: int,
    seeds,
    root,
    params: TestsetParams = None,
    predictor=blur_oracle_predictor,
    jobs: int = 1,
) -> StabilityReport:
    """Re-run one guidance kind with several seeds and measure metric spread.

    Builds ``n_variants`` same-kind test sets (same thickness, different
    shapes), gets predictions for each from ``predictor`` and evaluates
    them against the stored evaluation trimaps. Reports per-variant
    metric means plus their mean and population standard deviation.
    """
    if n_variants < 2:
        raise ValueError("stability needs n_variants >= 2")
    seeds = tuple(seeds)
    if len(seeds) != n_variants:
        raise ValueError(f"need {n_variants} seeds, got {len(seeds)}")
    if kind == "trimap":
        raise ValueError("stability variants are guidance kinds, not the eval trimap")
    params = params or TestsetParams()
    root = Path(root)
    trimaps = {scene.id: _load_trimap(root, scene.id) for scene in scenes}

    variant_means = []
    for seed in seeds:
        variant_params = replace(params, dirname=f"guidance_{kind}_{seed}")
        manifest = build_testset(scenes, kind, seed, root, params=variant_params, jobs=jobs)
        paths = {entry["id"]: entry["path"] for entry in manifest.entries}
        rows = []
        for scene in scenes:
            guidance_map = read_map(root / paths[scene.id], kind="trimap")
            pred = predictor(scene, guidance_map)
            rows.append((scene.id, evaluate(pred, scene.alpha, trimaps[scene.id])))
        variant_means.append(_mean_row(rows))

    mean = {}
    sigma = {}
    for key in METRIC_KEYS:
        values = [vm[key] for vm in variant_means]
        mu = sum(values) / len(values)
        mean[key] = mu
        sigma[key] = math.sqrt(sum((v - mu) ** 2 for v in values) / len(values))
    return StabilityReport(
        kind=kind, seeds=seeds, variant_means=variant_means, mean=mean, sigma=sigma
    )
