"""Command-line front end: render, fit, synthesize, spimo, boost, metrics, gradcheck.

Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input,
3 numerical failure (including divergence and failed gradient checks).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import adaquant, boost, gradsuite, imageio, scenes, spimo, synth
from .camgeo import CameraIntrinsics, RigidPose, warp_field
from .config import RunConfig
from .errors import ConfigError, NumericalError
from .objective import StageMasks, eigen_metrics, fit_depth

EXIT_USAGE, EXIT_PARSE, EXIT_NUMERICAL = 1, 2, 3

log = logging.getLogger("aquasweep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _load_config(path):
    return RunConfig() if path is None else RunConfig.load(path)


def _load_rig(path):
    """Camera, poses and target index from a poses.json file."""
    obj = _load_json(path)
    try:
        cam = CameraIntrinsics.from_json(obj["camera"])
        poses = [RigidPose.from_json(p) for p in obj["poses"]]
        target = int(obj.get("target", 0))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: bad pose file ({exc})") from exc
    if not 0 <= target < len(poses):
        raise ConfigError(f"{path}: target index out of range")
    return cam, poses, target


def _read_image(path):
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return imageio.read_pfm(path)
    if path.suffix.lower() == ".pgm":
        return imageio.read_pgm(path)
    return imageio.read_ppm(path)


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _check_shape(arr, shape, what):
    if arr.shape[:2] != tuple(shape):
        raise ConfigError(f"{what} is {arr.shape[1]}x{arr.shape[0]}, expected {shape[1]}x{shape[0]}")


# -- commands ----------------------------------------------------------------


def cmd_render(args):
    path = Path(args.scene)
    if args.scene == "example" and not path.exists():
        path = scenes.EXAMPLE_SCENE
    spec = scenes.SceneSpec.load(path)
    out = Path(args.outdir)
    for i in range(len(spec.poses)):
        image, depth, disp, moving = scenes.render(spec, i)
        imageio.write_ppm(out / f"frame_{i:02d}.ppm", image)
        imageio.write_pfm(out / f"depth_{i:02d}.pfm", depth)
        imageio.write_pfm(out / f"disparity_{i:02d}.pfm", disp)
        imageio.write_pgm(out / f"moving_{i:02d}.pgm", moving)
    imageio.write_pgm(out / "eval_mask.pgm", scenes.evaluation_mask(spec).astype(float))
    rig = {"camera": spec.camera.to_json(), "poses": [p.to_json() for p in spec.poses], "target": spec.target}
    imageio.atomic_write_text(out / "poses.json", _dump_json(rig))
    return 0


def cmd_fit(args):
    cfg = _load_config(args.config)
    cam, poses, target = _load_rig(args.poses)
    if len(args.frames) != len(poses):
        raise UsageError(f"got {len(args.frames)} frames for {len(poses)} poses")
    frames = [_read_image(f) for f in args.frames]
    for path, f in zip(args.frames, frames):
        _check_shape(f, (cam.height, cam.width), path)
    masks = boost_target = None
    if args.stage == 2:
        if not args.static_masks or args.boost is None:
            raise UsageError("stage 2 needs --static-masks (one per frame) and --boost")
        if len(args.static_masks) != len(frames):
            raise UsageError("need one static mask per frame")
        loaded = [imageio.read_pgm(m) for m in args.static_masks]
        masks = StageMasks(loaded[target], [m for i, m in enumerate(loaded) if i != target])
        boost_target = imageio.read_pfm(args.boost)
    result = fit_depth(frames, poses, cam, cfg, stage=args.stage, masks=masks, boost_target=boost_target,
                       steps=args.steps, target=target)
    out = Path(args.outdir)
    n, h, w = result.logits.shape
    imageio.write_pfm(out / "disparity.pfm", result.disparity)
    imageio.write_pfm(out / "depth.pfm", result.depth)
    imageio.write_pfm(out / "beta.pfm", result.beta)
    imageio.write_pfm(out / "logits.pfm", result.logits.reshape(n * h, w))
    rows = ["step,loss"] + [f"{i},{v!r}" for i, v in enumerate(result.trace)]
    imageio.atomic_write_text(out / "loss.csv", "\n".join(rows) + "\n")
    imageio.atomic_write_text(out / "config.json", cfg.dumps())
    print(f"final loss {result.trace[-1]:.6g} after {len(result.trace) - 1} steps")
    return 0


def _read_logits(path, levels, shape):
    stack = imageio.read_pfm(path)
    h, w = shape
    if stack.ndim != 2 or stack.shape != (levels * h, w):
        raise ConfigError(f"{path}: expected a {w}x{levels * h} logit stack for {levels} levels")
    return stack.reshape(levels, h, w)


def cmd_synthesize(args):
    cfg = _load_config(args.config)
    cam, poses, target = _load_rig(args.poses)
    if not 0 <= args.camera < len(poses):
        raise UsageError(f"--camera must lie in [0, {len(poses) - 1}]")
    image = _read_image(args.frame)
    _check_shape(image, (cam.height, cam.width), args.frame)
    n = cfg.quantization.levels
    logits = _read_logits(args.logits, n, (cam.height, cam.width))
    beta = np.ones((cam.height, cam.width)) if args.beta is None else imageio.read_pfm(args.beta)
    levels = adaquant.quantization_levels(cfg.quantization, beta)
    base, other = poses[target], poses[args.camera]
    R = other.R @ base.R.T
    rel = RigidPose(R, other.t - R @ base.t)
    res = synth.synthesize_view(image, logits, levels, field=warp_field(rel, cam, cam))
    out = Path(args.outdir)
    imageio.write_ppm(out / "synth.ppm", np.clip(res.image.value, 0.0, 1.0))
    imageio.write_pfm(out / "mass.pfm", res.mass)
    imageio.write_pgm(out / "occlusion.pgm", synth.occlusion_mask(res, cfg.tau))
    return 0


def cmd_spimo(args):
    cfg = _load_config(args.config)
    paths = [Path(p) for p in args.depths]
    if len(paths) == 1 and paths[0].is_dir():
        paths = sorted(paths[0].glob("*.pfm"))
    if len(paths) < 2:
        raise UsageError("need at least two depth maps")
    maps = [imageio.read_pfm(p) for p in paths]
    if len({m.shape for m in maps}) != 1:
        raise ConfigError("depth maps differ in size")
    volume = np.stack(maps)
    if volume.ndim != 3:
        raise ConfigError("depth maps must be single-channel")
    if not np.all(volume > 0):
        raise NumericalError("depth maps must be strictly positive")
    imageio.write_pgm(args.out, spimo.compute_mask(volume, cfg.gamma))
    return 0


def cmd_boost(args):
    cfg = _load_config(args.config)
    maps = [imageio.read_pfm(p) for p in (args.full, args.reduced, args.augmented)]
    try:
        triple = boost.BoostTriple(*maps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    imageio.write_pfm(args.out, boost.blend(triple, eq8_literal=cfg.eq8_literal))
    return 0


def cmd_metrics(args):
    pred = imageio.read_pfm(args.pred)
    gt = imageio.read_pfm(args.gt)
    if pred.shape != gt.shape:
        raise ConfigError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    valid = None if args.mask is None else imageio.read_pgm(args.mask) > 0.5
    if valid is not None and valid.shape != gt.shape:
        raise ConfigError("mask size differs from the depth maps")
    try:
        metrics = eigen_metrics(pred, gt, valid, cap=args.cap, median_scale=args.median_scale)
    except ValueError as exc:
        raise NumericalError(str(exc)) from exc
    text = _dump_json(metrics)
    if args.out:
        imageio.atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def _parse_size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h < 2 or w < 2:
        raise argparse.ArgumentTypeError("size must be at least 2x2")
    return h, w


def cmd_gradcheck(args):
    h, w = args.size
    worst = 0.0
    failed = []
    for res in gradsuite.run(h, w, args.levels, args.seed):
        print(f"{res.name:28s} {res.error:.3e}  {'ok' if res.ok else 'FAIL'}")
        worst = max(worst, res.error)
        if not res.ok:
            failed.append(res.name)
    print(f"max relative error {worst:.3e}")
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


# -- entry point -------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="aquasweep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("render", help="render a scene description into frames and ground truth")
    p.add_argument("scene", help="scene JSON, or 'example' for the bundled two-layer scene")
    p.add_argument("outdir")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fit", help="fit depth for the target frame")
    p.add_argument("frames", nargs="+", help="one image per pose, in pose order")
    p.add_argument("--poses", required=True, help="poses.json written by render")
    p.add_argument("--config", help="run config JSON (defaults if omitted)")
    p.add_argument("--out", dest="outdir", required=True)
    p.add_argument("--steps", type=int, help="override the configured step count")
    p.add_argument("--stage", type=int, choices=(1, 2), default=1)
    p.add_argument("--static-masks", nargs="+", help="stage 2: static-pixel PGM per frame")
    p.add_argument("--boost", help="stage 2: boosted disparity PFM")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synthesize", help="synthesize another camera's view from fitted logits")
    p.add_argument("frame", help="target image")
    p.add_argument("--logits", required=True, help="logit stack PFM written by fit")
    p.add_argument("--beta", help="beta PFM written by fit (default: 1 everywhere)")
    p.add_argument("--poses", required=True)
    p.add_argument("--camera", type=int, required=True, help="index of the camera to synthesize")
    p.add_argument("--config")
    p.add_argument("--out", dest="outdir", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("spimo", help="moving-object mask from depth maps under shifted positions")
    p.add_argument("depths", nargs="+", help="depth PFMs, or one directory of them")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="mask PGM (255 static, 0 moving)")
    p.set_defaults(func=cmd_spimo)

    p = sub.add_parser("boost", help="blend full, reduced and augmented disparity passes")
    p.add_argument("full")
    p.add_argument("reduced")
    p.add_argument("augmented")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("metrics", help="depth error metrics")
    p.add_argument("pred", help="predicted depth PFM")
    p.add_argument("gt", help="ground-truth depth PFM")
    p.add_argument("--median-scale", action="store_true")
    p.add_argument("--cap", type=float, default=80.0)
    p.add_argument("--mask", help="PGM of pixels to evaluate")
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--size", type=_parse_size, default=(8, 12), help="HxW (default 8x12)")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"aquasweep {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"aquasweep {args.command}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericalError as exc:
        print(f"aquasweep {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
