"""Command-line interface (installed as `pcrop`).

Exit codes: 0 on success, 1 for bad input (files, arguments, geometry of
the request), 2 for runtime failures (diverged training, exhausted
rejection sampling, failed self-checks).

Coordinates on the command line are normalized to [0, 1] unless --pixels
is given, in which case they are interpreted in the camera's pixel grid
and converted on the way in.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .camera import CameraIntrinsics, load_camera, pixel_to_normalized
from .datafiles import (
    load_json,
    load_keypoint_frames,
    load_model,
    load_scene,
    save_json,
    save_keypoint_frames,
    save_model,
    save_npy,
    load_npy,
    save_scene,
    write_manifest,
    write_pgm,
)
from .errors import GeometryError, ValidationError
from .experiments import (
    DEFAULT_CAMERA,
    ExperimentConfig,
    bin_errors,
    eccentricity,
    experiment_capacity,
    experiment_cube_generalization,
    experiment_focal_sweep,
    experiment_head_to_head,
    experiment_rotation_ablation,
    fit_slope,
    mpjpe_per_sample,
    pck_percent,
    perspective_pairs,
    root_center_pairs,
)
from .jacobians import gradcheck_report
from .mlp import fit_lifting, gradient_check
from .synth import sample_cubes, sample_figures
from .warp import (
    FOCAL_OPTIONS,
    ROTATION_MODES,
    PerspectiveCrop,
    measured_center_scale,
    perspective_crop_keypoints,
    root_center_crop,
)
from .image import crop_image


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage as a validation error (exit 1)."""

    def error(self, message):
        raise ValidationError(message)


def _camera_from_args(args) -> CameraIntrinsics:
    if getattr(args, "camera", None):
        return load_camera(args.camera)
    return DEFAULT_CAMERA


def _maybe_pixels(points, args, intr: CameraIntrinsics):
    points = np.asarray(points, dtype=float)
    if getattr(args, "pixels", False):
        return pixel_to_normalized(points, intr)
    return points


def _experiment_config(args) -> ExperimentConfig:
    base = {}
    if getattr(args, "config", None):
        data = load_json(args.config)
        if not isinstance(data, dict):
            raise ValidationError(f"config file {args.config} must contain a JSON object")
        base = data
    for name in (
        "n_train",
        "n_test",
        "hidden",
        "epochs",
        "batch_size",
        "margin",
        "option",
    ):
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    return ExperimentConfig.from_dict(base)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with experiment settings")
    p.add_argument("--n-train", dest="n_train", type=int, help="training samples")
    p.add_argument("--n-test", dest="n_test", type=int, help="test samples")
    p.add_argument("--hidden", type=int, help="hidden width of the lifting net")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="minibatch size")
    p.add_argument("--margin", type=float, help="bounding-box margin fraction")
    p.add_argument("--option", choices=FOCAL_OPTIONS, help="virtual focal option")
    p.add_argument("--seed", type=int, default=0, help="base seed")


def _print(line: str) -> None:
    sys.stdout.write(line + "\n")


# --- warp commands ---------------------------------------------------------


def _cmd_warp_keypoints(args) -> int:
    intr = _camera_from_args(args)
    frames = load_keypoint_frames(args.keypoints)
    out_frames = []
    for frame in frames:
        kps = _maybe_pixels(frame["keypoints"], args, intr)
        root = frame.get("root", args.root)
        scale = frame.get("scale")
        if scale is None and args.scale is not None:
            scale = np.asarray(args.scale, dtype=float)
        if args.mode == "perspective":
            if "target" in frame:
                target = _maybe_pixels(frame["target"], args, intr)
                if scale is None:
                    from .warp import bbox_scale

                    scale = bbox_scale(kps, args.margin)
                crop = PerspectiveCrop.from_target(
                    intr, target, scale, args.option, not args.no_preserve_aspect
                )
                warped = crop.warp(kps)
            else:
                warped, crop = perspective_crop_keypoints(
                    kps,
                    intr,
                    root_index=root,
                    margin=args.margin,
                    scale=scale,
                    option=args.option,
                    preserve_aspect=not args.no_preserve_aspect,
                )
            out_frames.append(
                {
                    "keypoints": warped,
                    "target": crop.target,
                    "scale": crop.scale,
                }
            )
        else:
            warped, crop = root_center_crop(kps, root_index=root, margin=args.margin, scale=scale)
            out_frames.append({"keypoints": warped, "scale": 1.0 / np.array([crop.sx, crop.sy])})
    save_keypoint_frames(args.out, out_frames)
    _print(f"warped {len(out_frames)} frame(s) -> {args.out}")
    return 0


def _cmd_warp_sequence(args) -> int:
    intr = _camera_from_args(args)
    frames = load_keypoint_frames(args.keypoints)
    kps = [_maybe_pixels(f["keypoints"], args, intr) for f in frames]
    shapes = {k.shape for k in kps}
    if len(shapes) != 1:
        raise ValidationError(f"sequence frames disagree on keypoint count: {sorted(shapes)}")
    seq = np.stack(kps)
    scale = None
    if args.scale is not None:
        scale = np.asarray(args.scale, dtype=float)
    from .warp import perspective_crop_sequence

    warped, crop = perspective_crop_sequence(
        seq,
        intr,
        root_index=args.root,
        margin=args.margin,
        scale=scale,
        option=args.option,
        preserve_aspect=not args.no_preserve_aspect,
    )
    out_frames = [
        {"keypoints": warped[i], "target": crop.target, "scale": crop.scale}
        for i in range(warped.shape[0])
    ]
    save_keypoint_frames(args.out, out_frames)
    _print(
        f"warped sequence of {len(out_frames)} frames through the shared crop "
        f"at target ({crop.target[0]:.4f}, {crop.target[1]:.4f}) -> {args.out}"
    )
    return 0


def _cmd_warp_image(args) -> int:
    if not args.camera:
        raise ValidationError("warp-image requires --camera")
    intr = load_camera(args.camera)
    image = load_npy(args.image)
    if image.ndim not in (2, 3):
        raise ValidationError(f"image must be (H, W) or (H, W, C), got shape {image.shape}")
    target = _maybe_pixels(np.asarray(args.target, dtype=float), args, intr)
    scale = np.asarray(args.scale, dtype=float)
    if args.pixels:
        scale = scale / np.array([intr.width, intr.height], dtype=float)
    crop = PerspectiveCrop.from_target(
        intr,
        target,
        scale,
        args.option,
        not args.no_preserve_aspect,
        patch_width=args.out_size[0],
        patch_height=args.out_size[1],
    )
    patch = crop_image(image, crop, args.out_size[0], args.out_size[1])
    save_npy(args.out, patch)
    outputs = [args.out]
    if args.pgm:
        if patch.ndim != 2:
            raise ValidationError("--pgm works only for single-channel images")
        write_pgm(args.pgm, patch)
        outputs.append(args.pgm)
    _print(f"wrote patch {patch.shape} -> {', '.join(outputs)}")
    return 0


# --- data / train / eval ---------------------------------------------------


def _cmd_gen(args) -> int:
    intr = _camera_from_args(args)
    depth = args.depth
    if depth is None:
        depth = (3000.0, 7000.0) if args.kind == "figure" else (2500.0, 6000.0)
    config = {
        "kind": args.kind,
        "n": args.n,
        "centered": bool(args.centered),
        "camera": intr.to_dict(),
        "region": list(args.region),
        "depth": list(depth),
    }
    if args.kind == "figure":
        config["articulation"] = args.articulation
        scene = sample_figures(
            intr,
            args.n,
            args.seed,
            region=tuple(args.region),
            depth=tuple(depth),
            articulation=args.articulation,
            centered=args.centered,
        )
    else:
        config["edge"] = args.edge
        scene = sample_cubes(
            intr,
            args.n,
            args.seed,
            region=tuple(args.region),
            depth=tuple(depth),
            edge=args.edge,
            centered=args.centered,
        )
    written = save_scene(args.out, scene, meta=config)
    write_manifest(
        os.path.join(args.out, "manifest.json"),
        "gen",
        config,
        args.seed,
        [os.path.join(args.out, name) for name in written],
    )
    _print(f"generated {len(scene)} {args.kind} samples -> {args.out}")
    return 0


def _build_pairs(scene, args):
    if args.pipeline == "perspective":
        return perspective_pairs(
            scene,
            margin=args.margin,
            option=args.option,
            focal_multiplier=getattr(args, "multiplier", 1.0),
            preserve_aspect=not args.no_preserve_aspect,
        )
    return root_center_pairs(
        scene, margin=args.margin, rotation_mode=getattr(args, "rotation_mode", "none")
    )


def _pipeline_config(args) -> dict:
    return {
        "pipeline": args.pipeline,
        "margin": args.margin,
        "option": args.option,
        "rotation_mode": getattr(args, "rotation_mode", "none"),
        "multiplier": getattr(args, "multiplier", 1.0),
        "preserve_aspect": not args.no_preserve_aspect,
    }


def _add_pipeline_flags(p: argparse.ArgumentParser, eval_knobs: bool = False) -> None:
    p.add_argument(
        "--pipeline",
        choices=("root_center", "perspective"),
        required=True,
        help="input normalization strategy",
    )
    p.add_argument("--margin", type=float, default=0.1, help="bounding-box margin fraction")
    p.add_argument("--option", choices=FOCAL_OPTIONS, default="C", help="virtual focal option")
    if eval_knobs:
        # evaluation-time knobs only: training always uses the canonical
        # pipeline (no output rotation, true focal length)
        p.add_argument(
            "--rotation-mode",
            dest="rotation_mode",
            choices=ROTATION_MODES,
            default="none",
            help="rotate root_center predictions into the real frame before scoring",
        )
        p.add_argument(
            "--multiplier",
            type=float,
            default=1.0,
            help="rebuild perspective inputs with this focal miscalibration factor",
        )
    p.add_argument(
        "--no-preserve-aspect",
        action="store_true",
        help="scale the two patch axes independently",
    )


def _cmd_train(args) -> int:
    scene = load_scene(args.data)
    pairs = _build_pairs(scene, args)
    t0 = time.time()
    model, history = fit_lifting(
        pairs.x,
        pairs.y,
        hidden=args.hidden,
        n_blocks=args.n_blocks,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    save_model(args.out, model)
    config = {
        **_pipeline_config(args),
        "hidden": args.hidden,
        "n_blocks": args.n_blocks,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "val_fraction": args.val_fraction,
    }
    write_manifest(args.out + ".manifest.json", "train", config, args.seed, [args.out])
    val = history.val_loss[history.best_epoch] if history.val_loss else float("nan")
    _print(
        f"trained {args.pipeline} model on {len(pairs)} samples in {time.time() - t0:.1f}s; "
        f"best epoch {history.best_epoch} (val mse {val:.1f} mm^2) -> {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    scene = load_scene(args.data)
    pairs = _build_pairs(scene, args)
    model = load_model(args.model)
    if model.d_in != pairs.x.shape[1]:
        raise ValidationError(
            f"model expects {model.d_in} inputs but the pipeline produced {pairs.x.shape[1]}; "
            "check --pipeline and the dataset"
        )
    pred, gt = pairs.scored_poses(model)
    errors = mpjpe_per_sample(pred, gt)
    ecc = eccentricity(pairs.root2d)
    centers, means, counts = bin_errors(ecc, errors, args.bins)
    keep = counts > 0
    report = {
        "pipeline": _pipeline_config(args),
        "summary": {
            "median_mpjpe_mm": float(np.median(errors)),
            "mean_mpjpe_mm": float(np.mean(errors)),
            "pck50_percent": pck_percent(pred, gt, 50.0),
            "pck100_percent": pck_percent(pred, gt, 100.0),
            "n": int(errors.size),
        },
        "bins": {
            "eccentricity": centers[keep].tolist(),
            "mean_mpjpe_mm": means[keep].tolist(),
            "counts": counts[keep].tolist(),
        },
        "slope_mm_per_unit": fit_slope(centers, means),
        "per_sample": {
            "error_mm": errors.tolist(),
            "eccentricity": ecc.tolist(),
            "root2d": pairs.root2d.tolist(),
        },
    }
    _print(
        f"{args.pipeline}: median {report['summary']['median_mpjpe_mm']:.2f} mm, "
        f"mean {report['summary']['mean_mpjpe_mm']:.2f} mm, "
        f"pck50 {report['summary']['pck50_percent']:.1f}% over {errors.size} samples"
    )
    if args.out:
        save_json(args.out, report)
        write_manifest(
            args.out + ".manifest.json", "eval", report["pipeline"], args.seed, [args.out]
        )
        _print(f"report -> {args.out}")
    return 0


def _cmd_bin_errors(args) -> int:
    report = load_json(args.report)
    try:
        errors = np.asarray(report["per_sample"]["error_mm"], dtype=float)
        ecc = np.asarray(report["per_sample"]["eccentricity"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValidationError(
            f"{args.report} has no per-sample records; generate it with `pcrop eval --out`"
        ) from exc
    centers, means, counts = bin_errors(ecc, errors, args.bins)
    _print(f"{'eccentricity':>14} {'mean mpjpe (mm)':>16} {'n':>6}")
    for c, m, k in zip(centers, means, counts):
        if k:
            _print(f"{c:14.3f} {m:16.2f} {k:6d}")
    _print(f"slope: {fit_slope(centers, means):+.2f} mm per unit eccentricity")
    return 0


# --- experiment drivers ----------------------------------------------------


def _finish_experiment(args, result: dict) -> None:
    if args.out:
        save_json(args.out, result)
        write_manifest(
            args.out + ".manifest.json",
            result.get("experiment", "experiment"),
            result.get("config", {}),
            args.seed,
            [args.out],
        )
        _print(f"report -> {args.out}")


def _cmd_sweep_focal(args) -> int:
    cfg = _experiment_config(args)
    result = experiment_focal_sweep(cfg, args.seed, tuple(args.multipliers))
    result["config"] = cfg.to_dict()
    rc = result["root_center"]["median_mpjpe_mm"]
    _print(f"root_center median {rc:.2f} mm (focal-independent)")
    for row in result["perspective"]:
        _print(f"  multiplier {row['multiplier']:4.2f}: median {row['median_mpjpe_mm']:8.2f} mm")
    _finish_experiment(args, result)
    return 0


def _cmd_sweep_capacity(args) -> int:
    cfg = _experiment_config(args)
    result = experiment_capacity(cfg, args.seed, tuple(args.widths))
    result["config"] = cfg.to_dict()
    rc = result["root_center"]
    _print(
        f"root_center hidden {rc['hidden']:4d} ({rc['param_count']:,} params): "
        f"median {rc['median_mpjpe_mm']:8.2f} mm"
    )
    for row in result["perspective"]:
        _print(
            f"perspective hidden {row['hidden']:4d} ({row['param_count']:,} params): "
            f"median {row['median_mpjpe_mm']:8.2f} mm"
        )
    _finish_experiment(args, result)
    return 0


def _cmd_ablate_rotation(args) -> int:
    cfg = _experiment_config(args)
    result = experiment_rotation_ablation(cfg, args.seed)
    result["config"] = cfg.to_dict()
    for mode, row in result["results"].items():
        _print(f"{mode:>12}: median {row['median_mpjpe_mm']:8.2f} mm")
    _finish_experiment(args, result)
    return 0


def _cmd_head_to_head(args) -> int:
    cfg = _experiment_config(args)
    result = experiment_head_to_head(cfg, args.seed, n_bins=args.bins)
    result["config"] = cfg.to_dict()
    _print(
        f"root_center median {result['root_center']['median_mpjpe_mm']:.2f} mm, "
        f"perspective median {result['perspective']['median_mpjpe_mm']:.2f} mm"
    )
    slopes = result["slope_mm_per_unit"]
    _print(
        f"error growth with eccentricity: root_center {slopes['root_center']:+.1f}, "
        f"perspective {slopes['perspective']:+.1f} mm/unit"
    )
    _finish_experiment(args, result)
    return 0


def _cmd_cube_generalization(args) -> int:
    cfg = _experiment_config(args)
    result = experiment_cube_generalization(cfg, args.seed)
    result["config"] = cfg.to_dict()
    for label in ("centered_test", "general_test"):
        row = result[label]
        _print(
            f"{label}: root_center {row['root_center']['median_mpjpe_mm']:8.2f} mm, "
            f"perspective {row['perspective']['median_mpjpe_mm']:8.2f} mm"
        )
    _finish_experiment(args, result)
    return 0


# --- self checks -----------------------------------------------------------


def _cmd_gradcheck(args) -> int:
    t0 = time.time()
    report = gradcheck_report(seed=args.seed)
    mlp_report = gradient_check(seed=args.seed)
    ok = True
    for name, value in report.items():
        tol = args.image_tol if name == "crop_image" else args.tol
        mark = "ok" if value <= tol else "FAIL"
        ok &= value <= tol
        _print(f"{name:>20}: {value:9.2e}  (tol {tol:.0e})  {mark}")
    for name, value in mlp_report.items():
        mark = "ok" if value <= args.tol else "FAIL"
        ok &= value <= args.tol
        _print(f"{'mlp_' + name:>20}: {value:9.2e}  (tol {args.tol:.0e})  {mark}")
    _print(f"gradcheck finished in {time.time() - t0:.1f}s")
    if not ok:
        raise RuntimeError("gradient check failed (see report above)")
    return 0


def _cmd_compare_focal_options(args) -> int:
    intr = _camera_from_args(args)
    scale = np.asarray(args.scale, dtype=float)
    if args.target is not None:
        targets = [np.asarray(args.target, dtype=float)]
    else:
        g = np.linspace(0.2, 0.8, args.grid)
        targets = [np.array([u, v]) for u in g for v in g]
    _print(f"{'target':>16} {'option':>6} {'covered x/y':>22} {'requested/measured':>22}")
    for target in targets:
        for option in FOCAL_OPTIONS:
            crop = PerspectiveCrop.from_target(
                intr, target, scale, option, preserve_aspect=False
            )
            measured = measured_center_scale(crop)
            ratio = scale / measured
            _print(
                f"({target[0]:5.2f},{target[1]:5.2f}) {option:>6} "
                f"{measured[0]:10.6f}/{measured[1]:10.6f} {ratio[0]:10.6f}/{ratio[1]:10.6f}"
            )
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pcrop",
        description="Perspective-correcting crops and the lifting experiments built on them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp-keypoints", help="crop 2D keypoint frames")
    p.add_argument("--camera", help="camera JSON (default: built-in 512x512 f=0.7)")
    p.add_argument("--keypoints", required=True, help="input JSONL")
    p.add_argument("--out", required=True, help="output JSONL")
    p.add_argument("--mode", choices=("perspective", "root_center"), default="perspective")
    p.add_argument("--root", type=int, default=0, help="root joint index (-1 for centroid)")
    p.add_argument("--scale", type=float, nargs=2, help="fixed crop scale sx sy")
    p.add_argument("--pixels", action="store_true", help="inputs are in pixels")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--option", choices=FOCAL_OPTIONS, default="C")
    p.add_argument("--no-preserve-aspect", action="store_true")
    p.set_defaults(func=_cmd_warp_keypoints)

    p = sub.add_parser(
        "warp-sequence", help="crop a keypoint sequence through one shared virtual camera"
    )
    p.add_argument("--camera")
    p.add_argument("--keypoints", required=True, help="input JSONL, one frame per line")
    p.add_argument("--out", required=True)
    p.add_argument("--root", type=int, default=0)
    p.add_argument(
        "--scale",
        type=float,
        nargs=2,
        help="explicit crop extent; default covers every frame's bounding box",
    )
    p.add_argument("--pixels", action="store_true")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--option", choices=FOCAL_OPTIONS, default="C")
    p.add_argument("--no-preserve-aspect", action="store_true")
    p.set_defaults(func=_cmd_warp_sequence)

    p = sub.add_parser("warp-image", help="extract a perspective crop from an image")
    p.add_argument("--camera", required=True)
    p.add_argument("--image", required=True, help="input .npy image (H, W[, C])")
    p.add_argument("--target", type=float, nargs=2, required=True, metavar=("U", "V"))
    p.add_argument("--scale", type=float, nargs=2, required=True, metavar=("SX", "SY"))
    p.add_argument("--out", required=True, help="output .npy patch")
    p.add_argument("--pgm", help="also write an 8-bit PGM preview")
    p.add_argument("--out-size", type=int, nargs=2, default=(128, 128), metavar=("W", "H"))
    p.add_argument("--pixels", action="store_true")
    p.add_argument("--option", choices=FOCAL_OPTIONS, default="C")
    p.add_argument("--no-preserve-aspect", action="store_true")
    p.set_defaults(func=_cmd_warp_image)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=("figure", "cube"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--camera")
    p.add_argument("--centered", action="store_true", help="pin every root to (0.5, 0.5)")
    p.add_argument("--region", type=float, nargs=2, default=(0.15, 0.85))
    p.add_argument("--depth", type=float, nargs=2, default=None, metavar=("ZLO", "ZHI"))
    p.add_argument("--articulation", type=float, default=0.6)
    p.add_argument("--edge", type=float, default=500.0)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a lifting model on a generated dataset")
    p.add_argument("--data", required=True, help="dataset directory from `pcrop gen`")
    p.add_argument("--out", required=True, help="output model JSON")
    _add_pipeline_flags(p)
    p.add_argument("--hidden", type=int, default=192)
    p.add_argument("--n-blocks", dest="n_blocks", type=int, default=2)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=1e-3)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a generated dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="write a JSON report with per-sample errors")
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    _add_pipeline_flags(p, eval_knobs=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bin-errors", help="re-bin a saved eval report by eccentricity")
    p.add_argument("--report", required=True, help="JSON from `pcrop eval --out`")
    p.add_argument("--bins", type=int, default=6)
    p.set_defaults(func=_cmd_bin_errors)

    p = sub.add_parser("head-to-head", help="run the pipeline comparison on figures")
    _add_config_flags(p)
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--out", help="write the result JSON")
    p.set_defaults(func=_cmd_head_to_head)

    p = sub.add_parser("sweep-focal", help="perspective pipeline vs focal miscalibration")
    _add_config_flags(p)
    p.add_argument(
        "--multipliers", type=float, nargs="+", default=(0.5, 0.7, 1.0, 1.5, 2.0)
    )
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_focal)

    p = sub.add_parser("sweep-capacity", help="both pipelines across network widths")
    _add_config_flags(p)
    p.add_argument("--widths", type=int, nargs="+", default=(96, 192))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_capacity)

    p = sub.add_parser("ablate-rotation", help="partial back-rotation ablation")
    _add_config_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ablate_rotation)

    p = sub.add_parser("cube-generalization", help="centered-cube training, off-center test")
    _add_config_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_cube_generalization)

    p = sub.add_parser("gradcheck", help="verify all analytic gradients against FD")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--image-tol", dest="image_tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser(
        "compare-focal-options", help="measure the covered extent per focal option"
    )
    p.add_argument("--camera")
    p.add_argument("--target", type=float, nargs=2, metavar=("U", "V"))
    p.add_argument("--grid", type=int, default=3, help="targets on an NxN grid if no --target")
    p.add_argument("--scale", type=float, nargs=2, default=(0.3, 0.3))
    p.set_defaults(func=_cmd_compare_focal_options)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValidationError, GeometryError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (RuntimeError, OSError) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
