"""Command-line front end: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage/config error, 2 data error (including
partially failed batch runs). All file outputs are written atomically.
The default seed comes from --seed, then the config file, then the
MATTEFORGE_SEED environment variable, then 0.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, MatteForgeError
from .guidance import (
    ThicknessSchedule,
    deform,
    make_clickmap,
    no_guidance,
    sample_points,
    thickness_at,
)
from .harness import (
    TestsetParams,
    blur_oracle_predictor,
    build_testset,
    gt_predictor,
    load_scenes,
    run_eval,
    save_scenes,
    stability_report,
    synth_scenes,
    write_eval_report,
)
from .losses import loss_gradient, matting_loss
from .metrics import evaluate
from .raster import atomic_write_bytes, composite, read_image, read_map, write_image, write_map
from .rng import Rng, derive_seed
from .sfm import feature_checksum, make_pyramid, make_sfm_weights, save_weights, sfm_forward
from .trimap import make_trimap, masks, partition

ENV_SEED = "MATTEFORGE_SEED"


@dataclass
class Config:
    """Run configuration; JSON file keys match the field names."""

    seed: int = None
    t_start: float = 800.0
    t_end: float = 40.0
    decay_steps: int = 530_000
    hold_steps: int = 70_000
    sigma: float = 1.4
    theta: float = 0.15
    levels: int = 10

    def schedule(self) -> ThicknessSchedule:
        return ThicknessSchedule(
            t_start=self.t_start,
            t_end=self.t_end,
            decay_steps=self.decay_steps,
            hold_steps=self.hold_steps,
        )


def load_config(path) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(Config)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for key, value in raw.items():
        if value is not None and not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
    return Config(**raw)


def resolve_seed(args, cfg: Config) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if cfg.seed is not None:
        return cfg.seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{ENV_SEED} must be an integer, got {env!r}") from exc
    return 0


class _Parser(argparse.ArgumentParser):
    """argparse, but usage errors exit 1 as documented."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _print(payload) -> None:
    sys.stdout.write(payload if payload.endswith("\n") else payload + "\n")


def _maybe_write_json(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    if getattr(args, "out", None):
        atomic_write_bytes(args.out, (text + "\n").encode("utf-8"))
    else:
        _print(text)


def _cmd_composite(args, cfg):
    fg = read_image(args.fg)
    bg = read_image(args.bg)
    alpha = read_map(args.alpha, kind="alpha")
    write_image(args.out, composite(fg, bg, alpha))
    return 0


def _cmd_trimap(args, cfg):
    alpha = read_map(args.alpha, kind="alpha")
    write_map(args.out, make_trimap(alpha, args.fg_shrink, args.bg_shrink))
    return 0


def _cmd_guide(args, cfg):
    tri = read_map(args.trimap, kind="trimap")
    rng = Rng(resolve_seed(args, cfg))
    guidance = deform(
        tri,
        args.step,
        sched=cfg.schedule(),
        rng=rng,
        max_points=args.max_points,
        min_dist=args.min_dist,
        thickness=args.thickness,
    )
    write_map(args.out, guidance)
    return 0


def _cmd_clickmap(args, cfg):
    tri = read_map(args.trimap, kind="trimap")
    rng = Rng(resolve_seed(args, cfg))
    fg_mask, bg_mask = masks(tri)
    fg_pts = sample_points(fg_mask, args.max_points, args.min_dist, rng, "fg")
    bg_pts = sample_points(bg_mask, args.max_points, args.min_dist, rng, "bg")
    h, w = tri.shape
    write_map(args.out, make_clickmap(fg_pts, bg_pts, args.diameter, w, h, fg_mask, bg_mask))
    return 0


def _cmd_schedule(args, cfg):
    sched = cfg.schedule()
    if args.step is not None:
        _print(str(thickness_at(args.step, sched)))
        return 0
    lines = ["step\tthickness"]
    total = sched.decay_steps + sched.hold_steps
    step = 0
    while step <= total:
        lines.append(f"{step}\t{thickness_at(step, sched)}")
        step += args.every
    _print("\n".join(lines))
    return 0


def _cmd_metrics(args, cfg):
    pred = read_map(args.pred, kind="alpha")
    gt = read_map(args.gt, kind="alpha")
    tri = read_map(args.trimap, kind="trimap")
    report = evaluate(pred, gt, tri, sigma=cfg.sigma, theta=cfg.theta, levels=cfg.levels)
    _maybe_write_json(args, report.as_dict())
    return 0


def _cmd_loss(args, cfg):
    pred = read_map(args.pred, kind="alpha")
    gt = read_map(args.gt, kind="alpha")
    tri = read_map(args.trimap, kind="trimap")
    part = partition(tri)
    breakdown = matting_loss(pred, gt, part, sigma=cfg.sigma)
    payload = {
        "l2_known": breakdown.l2_known,
        "l1_transition": breakdown.l1_transition,
        "grad_term": breakdown.grad_term,
        "total": breakdown.total,
    }
    if args.with_gradient:
        grad = loss_gradient(pred, gt, part, sigma=cfg.sigma)
        payload["gradient_linf"] = float(np.abs(grad).max())
    _maybe_write_json(args, payload)
    return 0


def _cmd_sfm_demo(args, cfg):
    seed = resolve_seed(args, cfg)
    pyr = make_pyramid(Rng(derive_seed(seed, "pyramid")), args.channels, args.base, args.base)
    weights = make_sfm_weights(derive_seed(seed, "weights"), args.channels, n_fpem=args.n_fpem)
    fused = sfm_forward(pyr, weights)
    if args.save_weights:
        save_weights(weights, args.save_weights)
    _maybe_write_json(
        args,
        {
            "seed": seed,
            "levels": [list(lv.shape) for lv in pyr.levels],
            "output_shape": list(fused.shape),
            "checksum": feature_checksum(fused),
        },
    )
    return 0


def _cmd_synth(args, cfg):
    seed = resolve_seed(args, cfg)
    scenes = synth_scenes(args.n, args.size, Rng(seed))
    save_scenes(scenes, args.out, jobs=args.jobs)
    _print(f"wrote {len(scenes)} scene(s) under {args.out}")
    return 0


def _cmd_testset(args, cfg):
    seed = resolve_seed(args, cfg)
    scenes = load_scenes(args.root)
    params = TestsetParams(
        fg_shrink=args.fg_shrink,
        bg_shrink=args.bg_shrink,
        schedule=cfg.schedule(),
        step=args.step,
        thickness=args.thickness,
        max_points=args.max_points,
        min_dist=args.min_dist,
        click_diameter=args.diameter,
        dirname=args.dirname,
    )
    manifest = build_testset(scenes, args.kind, seed, args.root, params=params, jobs=args.jobs)
    _print(f"wrote {len(manifest.entries)} {args.kind} map(s) under {args.root}")
    return 0


def _cmd_eval(args, cfg):
    report = run_eval(
        args.pred,
        args.gt,
        args.trimap,
        jobs=args.jobs,
        sigma=cfg.sigma,
        theta=cfg.theta,
        levels=cfg.levels,
    )
    write_eval_report(report, csv_path=args.out_csv, json_path=args.out_json)
    if report.mean:
        _print(
            "mean: "
            + " ".join(f"{k}={report.mean[k]:.6f}" for k in ("sad", "mse", "grad", "conn"))
        )
    for scene_id, err in report.errors:
        print(f"error: {scene_id}: {err}", file=sys.stderr)
    for scene_id in report.missing:
        print(f"missing: {scene_id}", file=sys.stderr)
    return 2 if report.partial_failure else 0


def _cmd_stability(args, cfg):
    seed = resolve_seed(args, cfg)
    scenes = load_scenes(args.root)
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        seeds = [derive_seed(seed, f"variant:{v}") for v in range(args.variants)]
    params = TestsetParams(
        schedule=cfg.schedule(),
        step=args.step,
        thickness=args.thickness,
        max_points=args.max_points,
        min_dist=args.min_dist,
        click_diameter=args.diameter,
    )
    predictor = gt_predictor if args.predictor == "gt" else blur_oracle_predictor
    report = stability_report(
        scenes,
        args.kind,
        len(seeds),
        seeds,
        args.root,
        params=params,
        predictor=predictor,
        jobs=args.jobs,
    )
    _maybe_write_json(args, report.as_dict())
    return 0


def _add_seed(parser):
    parser.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides config/env)")


def _add_jobs(parser):
    parser.add_argument(
        "--jobs", type=int, default=os.cpu_count() or 1, help="worker threads (default: cores)"
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="matteforge", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON config file; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("composite", help="blend fg over bg through an alpha matte")
    p.add_argument("--fg", required=True)
    p.add_argument("--bg", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_composite)

    p = sub.add_parser("trimap", help="shrink an alpha matte into a trimap")
    p.add_argument("--alpha", required=True)
    p.add_argument("--fg-shrink", type=float, default=10.0)
    p.add_argument("--bg-shrink", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_trimap)

    p = sub.add_parser("guide", help="deform a trimap into scribble guidance")
    p.add_argument("--trimap", required=True)
    p.add_argument("--step", type=int, default=0, help="training step for the thickness schedule")
    p.add_argument("--thickness", type=float, default=None, help="bypass the schedule")
    p.add_argument("--max-points", type=int, default=10)
    p.add_argument("--min-dist", type=float, default=50.0)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_guide)

    p = sub.add_parser("clickmap", help="stamp click disks sampled from a trimap")
    p.add_argument("--trimap", required=True)
    p.add_argument("--diameter", type=float, default=40.0)
    p.add_argument("--max-points", type=int, default=10)
    p.add_argument("--min-dist", type=float, default=50.0)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_clickmap)

    p = sub.add_parser("schedule", help="print stroke thickness at a step, or the whole table")
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--every", type=int, default=10_000, help="table stride in steps")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("metrics", help="SAD/MSE/Grad/Conn for one prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--trimap", required=True)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("loss", help="matting loss breakdown for one prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--trimap", required=True)
    p.add_argument("--with-gradient", action="store_true", help="also report max |dL/dpred|")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("sfm-demo", help="run the toy semantic-fusion forward pass")
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--base", type=int, default=32, help="finest-level height/width")
    p.add_argument("--n-fpem", type=int, default=2)
    p.add_argument("--save-weights", default=None, help="dump weights + JSON sidecar here")
    p.add_argument("--out", default=None)
    _add_seed(p)
    p.set_defaults(func=_cmd_sfm_demo)

    p = sub.add_parser("synth", help="generate a synthetic scene directory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True, help="dataset root directory")
    _add_seed(p)
    _add_jobs(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("testset", help="build a guidance test set for a scene directory")
    p.add_argument("--root", required=True)
    p.add_argument(
        "--kind", required=True, choices=("trimap", "scribblemap", "clickmap", "no_guidance")
    )
    p.add_argument("--fg-shrink", type=float, default=None)
    p.add_argument("--bg-shrink", type=float, default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--thickness", type=float, default=None)
    p.add_argument("--max-points", type=int, default=10)
    p.add_argument("--min-dist", type=float, default=50.0)
    p.add_argument("--diameter", type=float, default=40.0)
    p.add_argument("--dirname", default=None, help="override the output subdirectory")
    _add_seed(p)
    _add_jobs(p)
    p.set_defaults(func=_cmd_testset)

    p = sub.add_parser("eval", help="evaluate a prediction directory")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--trimap", required=True)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    _add_jobs(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stability", help="metric spread across reseeded guidance variants")
    p.add_argument("--root", required=True)
    p.add_argument("--kind", required=True, choices=("scribblemap", "clickmap", "no_guidance"))
    p.add_argument("--variants", type=int, default=3)
    p.add_argument("--seeds", default=None, help="comma-separated seeds, overrides --variants")
    p.add_argument("--predictor", choices=("blur-oracle", "gt"), default="blur-oracle")
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--thickness", type=float, default=None)
    p.add_argument("--max-points", type=int, default=10)
    p.add_argument("--min-dist", type=float, default=50.0)
    p.add_argument("--diameter", type=float, default=40.0)
    p.add_argument("--out", default=None)
    _add_seed(p)
    _add_jobs(p)
    p.set_defaults(func=_cmd_stability)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else Config()
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"matteforge: config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"matteforge: usage error: {exc}", file=sys.stderr)
        return 1
    except MatteForgeError as exc:
        print(f"matteforge: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"matteforge: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
