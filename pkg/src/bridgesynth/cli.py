"""Command line front end.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors (bad input
files, I/O failures, invalid configurations).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augmentation import (AugmentConfig, apply_occlusion, apply_standard_augmentations,
                           colorize, crop_blocks, generate_occlusion_shapes, voxel_downsample)
from .dataset_io import read_cloud_txt, write_cloud_txt
from .errors import ConfigurationError
from .evaluation import (DbscanParams, InstancePrediction, baseline_segment, evaluate_ap,
                         format_table, ground_truth_instances, predictions_from_json,
                         predictions_to_json, refine_instances_dbscan)
from .geometry import AABB, CLASS_NAMES, build_bridge_meshes, generate_bridge_spec, write_obj
from .pipeline import (FAST_LIDAR_RESOLUTION, FAST_MSP_DENSITY, VOXEL_PRESETS, PipelineConfig,
                       run_pipeline)

COLOR_ALIASES = {"white": "white", "random": "random_rgb", "height": "height_gradient"}
TRANSFORMS = ("occlude", "voxelize", "colorize", "augment", "crop")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _voxel_size(text):
    if text in VOXEL_PRESETS:
        return VOXEL_PRESETS[text]
    if text.lower() == "none":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a size in meters, 'none' or one of {sorted(VOXEL_PRESETS)}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("voxel size must be positive")
    return value


def _split(text):
    """'52/8' (counts) or '0.8,0.2' (fractions) -> (train, val) fractions."""
    sep = "/" if "/" in text else ","
    try:
        a, b = (float(p) for p in text.split(sep))
    except ValueError:
        raise argparse.ArgumentTypeError("split must look like 52/8 or 0.8,0.2") from None
    if a < 0 or b < 0 or a + b <= 0:
        raise argparse.ArgumentTypeError("split parts must be non-negative")
    return (a / (a + b), b / (a + b))


def _modes(text):
    modes = tuple(m.strip().upper() for m in text.split(",") if m.strip())
    bad = [m for m in modes if m not in ("MSP", "RSLP", "PSLP")]
    if not modes or bad:
        raise argparse.ArgumentTypeError("modes must be a comma list of msp, rslp, pslp")
    return modes


def _fraction(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _add_transform_args(p, op):
    p.add_argument("input", help="input .txt point cloud")
    p.add_argument("output", help="output .txt file (crop: output directory)")
    if op == "occlude":
        p.add_argument("--sparsity", type=_fraction, default=0.6,
                       help="fraction of in-shape points removed (default: 0.6)")
        p.add_argument("--count", type=int, default=10,
                       help="number of occluding shapes (default: 10)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    elif op == "voxelize":
        p.add_argument("--size", type=_voxel_size, default=VOXEL_PRESETS["preprocess"],
                       help="voxel edge in meters or preset preprocess=0.02 / model=0.2 "
                            "(default: 0.02)")
    elif op == "colorize":
        p.add_argument("--scheme", choices=sorted(COLOR_ALIASES), default="white",
                       help="color scheme (default: white)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    elif op == "augment":
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        p.add_argument("--scale", type=float, nargs=2, default=(0.9, 1.1),
                       metavar=("MIN", "MAX"), help="scale interval (default: 0.9 1.1)")
        p.add_argument("--tilt", type=float, nargs=2, default=(-5.0, 5.0),
                       metavar=("MIN", "MAX"), help="x/y tilt in degrees (default: -5 5)")
        p.add_argument("--yaw", type=float, nargs=2, default=(0.0, 360.0),
                       metavar=("MIN", "MAX"), help="z rotation in degrees (default: 0 360)")
        p.add_argument("--flip", type=_fraction, default=0.5,
                       help="mirror probability across the xz-plane (default: 0.5)")
    elif op == "crop":
        p.add_argument("--block", type=float, nargs=3, default=(20.0, 20.0, 20.0),
                       metavar=("X", "Y", "Z"), help="block size in meters (default: 20 20 20)")
    p.set_defaults(handler=cmd_transform, op=op)


def build_parser():
    parser = _Parser(prog="bridgesynth",
                     description="Synthetic RC bridge point clouds and instance-segmentation scoring.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr (default: off)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="run the dataset pipeline",
                       description="Generate a labeled synthetic bridge dataset.")
    g.add_argument("--out", required=True, help="dataset root directory")
    g.add_argument("--count", type=int, default=60, help="number of bridges (default: 60)")
    g.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    g.add_argument("--modes", type=_modes, default=("PSLP",),
                   help="comma list of msp, rslp, pslp (default: pslp)")
    g.add_argument("--occlusion-sparsity", type=_fraction, default=None,
                   help="enable occlusion with this removal fraction (default: off)")
    g.add_argument("--occlusion-count", type=int, default=10,
                   help="occluding shapes per cloud (default: 10)")
    g.add_argument("--occluded-only", action="store_true",
                   help="with occlusion, skip the clean copy of each bridge (default: emit both)")
    g.add_argument("--voxel-size", type=_voxel_size, default=VOXEL_PRESETS["preprocess"],
                   help="voxel edge in meters, 'none', or preset preprocess=0.02 / model=0.2 "
                        "(default: 0.02)")
    g.add_argument("--color", choices=sorted(COLOR_ALIASES), default="white",
                   help="color scheme (default: white)")
    g.add_argument("--split", type=_split, default=(52 / 60, 8 / 60),
                   help="train/val split as counts 52/8 or fractions 0.8,0.2 (default: 52/8)")
    g.add_argument("--augment", action="store_true",
                   help="apply random scale/rotation/flip to every cloud (default: off)")
    g.add_argument("--resolution", type=float, default=None,
                   help="LiDAR angular resolution in degrees (default: 0.4, --fast: 2.0)")
    g.add_argument("--density", type=float, default=None,
                   help="MSP points per square meter (default: 1000, --fast: 50)")
    g.add_argument("--fast", action="store_true",
                   help="coarse preset for quick runs: 2.0 deg LiDAR, 50 pts/m2 MSP (default: off)")
    g.add_argument("--workers", type=int, default=1, help="bridge-level processes (default: 1)")
    g.set_defaults(handler=cmd_generate)

    t = sub.add_parser("transform", help="apply one preprocessing step to a cloud",
                       description="Apply one preprocessing or augmentation step to a .txt cloud.")
    tsub = t.add_subparsers(dest="op", required=True, parser_class=_Parser)
    for op in TRANSFORMS:
        _add_transform_args(tsub.add_parser(op, help=f"{op} a point cloud"), op)
    for op in TRANSFORMS:
        _add_transform_args(sub.add_parser(op, help=f"shortcut for 'transform {op}'"), op)

    e = sub.add_parser("eval", help="score predictions against ground truth",
                       description="Score predicted instances against a labeled ground-truth cloud.")
    e.add_argument("--gt", required=True, help="ground-truth .txt cloud")
    e.add_argument("--pred", required=True,
                   help="prediction .txt cloud (instance labels, confidence 1) or .json file")
    e.add_argument("--name", default=None, help="row label in the table (default: pred file name)")
    e.add_argument("--json", dest="json_out", default=None,
                   help="write the report JSON here instead of printing it (default: stdout)")
    e.set_defaults(handler=cmd_eval)

    b = sub.add_parser("baseline", help="per-class DBSCAN instance baseline",
                       description="Cluster each semantic class with DBSCAN into instances.")
    b.add_argument("input", help="labeled .txt cloud")
    b.add_argument("--out", required=True, help="prediction JSON to write")
    b.add_argument("--eps", type=float, default=0.92, help="DBSCAN radius in meters (default: 0.92)")
    b.add_argument("--min-pts", type=int, default=4, help="DBSCAN MinPts (default: 4)")
    b.add_argument("--no-refine", action="store_true",
                   help="skip the DBSCAN refinement pass (default: refine)")
    b.set_defaults(handler=cmd_baseline)

    m = sub.add_parser("mesh", help="export one generated bridge as OBJ",
                       description="Write the component meshes of one bridge to an OBJ file.")
    m.add_argument("--seed", type=int, default=0, help="bridge spec seed (default: 0)")
    m.add_argument("--out", required=True, help="output .obj path")
    m.set_defaults(handler=cmd_mesh)
    return parser


def cmd_generate(args):
    config = PipelineConfig(
        output_dir=args.out,
        bridge_count=args.count,
        master_seed=args.seed,
        modes=args.modes,
        occlusion=args.occlusion_sparsity is not None,
        occlusion_count=args.occlusion_count,
        sparsity=args.occlusion_sparsity if args.occlusion_sparsity is not None else 0.6,
        keep_clean=not args.occluded_only,
        voxel_size=args.voxel_size,
        color_scheme=COLOR_ALIASES[args.color],
        augment=AugmentConfig() if args.augment else None,
        split=args.split,
        lidar_resolution=args.resolution or (FAST_LIDAR_RESOLUTION if args.fast else 0.4),
        msp_density=args.density or (FAST_MSP_DENSITY if args.fast else 1000.0),
        workers=args.workers,
    )
    run_pipeline(config)
    print(Path(args.out) / "manifest.json")
    return 0


def cmd_transform(args):
    cloud = read_cloud_txt(args.input)
    op = args.op
    if op == "occlude":
        if len(cloud):
            shapes = generate_occlusion_shapes(AABB.from_points(cloud.positions), args.count,
                                               args.seed)
            out = apply_occlusion(cloud, shapes, args.sparsity, args.seed + 1)
        else:
            out = cloud
    elif op == "voxelize":
        out = voxel_downsample(cloud, args.size) if args.size else cloud
    elif op == "colorize":
        out = colorize(cloud, COLOR_ALIASES[args.scheme], args.seed)
    elif op == "augment":
        cfg = AugmentConfig(scale_range=tuple(args.scale), xy_tilt_range=tuple(args.tilt),
                            z_rotation_range=tuple(args.yaw), flip_probability=args.flip)
        out = apply_standard_augmentations(cloud, cfg, args.seed)
    else:
        blocks = crop_blocks(cloud, args.block)
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        for k, block in enumerate(blocks):
            write_cloud_txt(block, out_dir / f"block_{k:04d}.txt")
        print(f"{op}: {len(cloud)} points -> {len(blocks)} blocks, "
              f"{sum(len(b) for b in blocks)} points")
        return 0
    write_cloud_txt(out, args.output)
    print(f"{op}: {len(cloud)} -> {len(out)} points")
    return 0


def _load_predictions(path, n_points):
    path = Path(path)
    if path.suffix.lower() == ".json":
        return predictions_from_json(path.read_text())
    cloud = read_cloud_txt(path)
    if len(cloud) != n_points:
        raise ValueError(f"{path} has {len(cloud)} points but the ground truth has {n_points}")
    return [InstancePrediction(idx, cls, 1.0) for idx, cls in ground_truth_instances(cloud)]


def cmd_eval(args):
    gt_cloud = read_cloud_txt(args.gt)
    n = len(gt_cloud)
    preds = _load_predictions(args.pred, n)
    for p in preds:
        if len(p.indices) and p.indices[-1] >= n:
            raise ValueError(f"prediction index {p.indices[-1]} beyond {n} ground-truth points")
    report = evaluate_ap(preds, ground_truth_instances(gt_cloud))
    print(format_table({args.name or Path(args.pred).name: report}))
    if args.json_out:
        Path(args.json_out).write_text(report.to_json() + "\n")
    else:
        print(report.to_json())
    return 0


def cmd_baseline(args):
    cloud = read_cloud_txt(args.input)
    params = DbscanParams(args.eps, args.min_pts)
    preds = baseline_segment(cloud, params)
    if not args.no_refine:
        preds = refine_instances_dbscan(cloud, preds, params)
    Path(args.out).write_text(predictions_to_json(preds) + "\n")
    counts = np.bincount([p.label for p in preds], minlength=len(CLASS_NAMES)) if preds else \
        np.zeros(len(CLASS_NAMES), dtype=int)
    for cls, name in CLASS_NAMES.items():
        print(f"{name}: {counts[cls]}")
    return 0


def cmd_mesh(args):
    meshes = build_bridge_meshes(generate_bridge_spec(args.seed))
    write_obj(meshes, args.out)
    print(f"{len(meshes)} components -> {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.handler(args)
    except (OSError, ValueError, ConfigurationError) as exc:
        print(f"bridgesynth {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
