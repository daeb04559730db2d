"""Command line front end.

Each subcommand prints a one-line JSON summary on success. Failures print a
one-line JSON error on stderr and exit with the error's category code
(2 usage, 3 data format, 4 degenerate input, 5 non-convergence).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import pipeline
from ._kernels import BACKEND_NAME
from ._version import __version__
from .errors import CortexkitError
from .metrics import MetricsReport
from .phantom import two_hemisphere_phantom
from .volume_io import save_label_volume


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with pipeline settings")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for neighbor queries")


def _config(args, **overrides) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.from_file(args.config) if args.config else pipeline.PipelineConfig()
    return cfg.replace(seed=args.seed, threads=args.threads, **overrides)


def _cmd_init_surfaces(args) -> dict:
    manifest = pipeline.run_init_surfaces(args.labels, args.output, _config(args))
    r = manifest["results"]
    return {
        "output": args.output,
        "lambda_pial": r["lambda_pial"],
        "lambda_white": r["lambda_white"],
        "contacts": sum(r["pair_contacts"].values()),
    }


def _cmd_deform(args) -> dict:
    cfg = _config(args, squaring_steps=args.steps)
    manifest = pipeline.run_deform(args.meshes, args.svf, args.output, cfg)
    mins = manifest["results"]["level_min_jacobian"]
    return {"output": args.output, "min_jacobian": min(mins), "warnings": len(manifest["warnings"])}


def _cmd_metrics(args) -> dict:
    cfg = _config(args, n_samples=args.samples, percentile=args.percentile)
    manifest = pipeline.run_metrics(args.predicted, args.reference, args.output, cfg)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(MetricsReport(manifest["results"]["metrics"]).to_csv())
    return {"output": args.output, "total_loss": manifest["results"]["loss"]["total"]}


def _cmd_collide(args) -> dict:
    manifest = pipeline.run_collide(args.meshes, args.output, _config(args), all_pairs=args.all_pairs)
    return {"output": args.output, "total_contacts": manifest["results"]["total_contacts"]}


def _cmd_phantom(args) -> dict:
    labels = two_hemisphere_phantom(
        dims=tuple(args.dims),
        spacing=tuple(args.spacing),
        gap_mm=args.gap,
        seed=args.seed if args.seed is not None else 0,
        with_medial_structures=not args.no_medial,
    )
    save_label_volume(args.output, labels)
    return {"output": args.output, "foreground_voxels": int((labels.grid.data != 0).sum())}


def _cmd_report(args) -> dict:
    merged = pipeline.run_report(args.manifests, args.output)
    return {"output": args.output, "reports": len(merged["reports"])}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cortexkit",
        description="Collision-free cortical surface extraction, deformation and evaluation.",
    )
    p.add_argument(
        "--version",
        action="version",
        version=f"cortexkit {__version__} ({BACKEND_NAME} backend)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init-surfaces", help="extract four collision-free surfaces from a label volume")
    s.add_argument("labels", help="label volume (.nii, .nii.gz or .json sidecar)")
    s.add_argument("--output", "-o", required=True, help="output directory for meshes and manifest")
    _common(s)
    s.set_defaults(func=_cmd_init_surfaces)

    s = sub.add_parser("deform", help="warp surfaces through composed velocity fields")
    s.add_argument("meshes", help="directory holding the four surface meshes")
    s.add_argument("--svf", action="append", required=True, help="velocity volume, coarse first (repeatable)")
    s.add_argument("--steps", type=int, default=None, help="scaling-and-squaring steps")
    s.add_argument("--output", "-o", required=True, help="output directory")
    _common(s)
    s.set_defaults(func=_cmd_deform)

    s = sub.add_parser("metrics", help="compare predicted surfaces against a reference set")
    s.add_argument("predicted", help="directory with predicted surfaces")
    s.add_argument("reference", help="directory with reference surfaces")
    s.add_argument("--samples", type=int, default=None, help="surface samples per mesh")
    s.add_argument("--percentile", type=float, default=None, help="Hausdorff percentile")
    s.add_argument("--csv", help="also write a flat CSV table here")
    s.add_argument("--output", "-o", default="metrics.json")
    _common(s)
    s.set_defaults(func=_cmd_metrics)

    s = sub.add_parser("collide", help="count surface-pair and self intersections")
    s.add_argument("meshes", help="directory holding the four surface meshes")
    s.add_argument("--all-pairs", action="store_true", help="also check the cross hemisphere pial/white pairs")
    s.add_argument("--output", "-o", default="collisions.json")
    _common(s)
    s.set_defaults(func=_cmd_collide)

    s = sub.add_parser("phantom", help="generate a synthetic two-hemisphere label volume")
    s.add_argument("--dims", type=int, nargs=3, default=[64, 64, 64], metavar=("NX", "NY", "NZ"))
    s.add_argument("--spacing", type=float, nargs=3, default=[1.0, 1.0, 1.0], metavar=("SX", "SY", "SZ"))
    s.add_argument("--gap", type=float, default=1.0, help="guaranteed inter-hemisphere gap in mm")
    s.add_argument("--no-medial", action="store_true", help="skip the medial lump labels")
    s.add_argument("--output", "-o", required=True, help="label volume path (.nii, .nii.gz or .json)")
    _common(s)
    s.set_defaults(func=_cmd_phantom)

    s = sub.add_parser("report", help="merge stage manifests into one report")
    s.add_argument("manifests", nargs="+", help="manifest JSON files")
    s.add_argument("--output", "-o", required=True)
    s.set_defaults(func=_cmd_report)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except CortexkitError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
