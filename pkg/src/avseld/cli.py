"""Command-line entry point: ``avseld <command> ...``.

Exit codes: 0 success, 1 validation error (bad arguments or config),
2 data error (malformed or inconsistent input files).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import AvseldError, ValidationError


def _cmd_transforms_list(args) -> int:
    from .transforms import transform_table

    rows = transform_table()
    if args.json:
        print(json.dumps(rows, indent=1))
        return 0
    header = f"{'name':<16} {'q':>1} {'refl':<5} {'flip':<5} {'channel op':<28} pixel op"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(f"{r['name']:<16} {r['quarter_turns']:>1} {str(r['reflect_azimuth']):<5} "
              f"{str(r['flip_elevation']):<5} {r['channel_op']:<28} {r['pixel_op']}")
    return 0


def _cmd_simulate(args) -> int:
    from .config import load_config, validate_config
    from .pipeline import simulate_dataset, worker_count

    cfg = load_config(args.spec) if args.spec else validate_config({})
    sim = cfg["simulate"]
    manifest = simulate_dataset(args.out, sim["num_clips"], args.seed, sim["events_per_clip"],
                                sim["duration_s"], sim["test_clips"], worker_count(cfg["workers"]))
    print(f"wrote {len(manifest.entries)} clips to {args.out}")
    return 0


def _cmd_augment(args) -> int:
    from .io import read_manifest
    from .pipeline import augment_dataset, worker_count
    from .transforms import load_acs_set

    acs_set = load_acs_set(args.acs_set)
    manifest = read_manifest(args.manifest)
    out = augment_dataset(manifest, acs_set, args.out, args.emit_pixel_map, worker_count())
    print(f"wrote {len(out.entries)} clips to {args.out}")
    return 0


def _cmd_features_extract(args) -> int:
    from .io import read_manifest
    from .pipeline import extract_dataset_features, worker_count
    from .visual_features import GaussianWidths

    widths = GaussianWidths(args.width_h, args.width_v)
    paths = extract_dataset_features(read_manifest(args.manifest), args.out, args.kind, widths, worker_count())
    print(f"wrote {len(paths)} feature files to {args.out}")
    return 0


def _cmd_fuse(args) -> int:
    from .fusion import FusionConfig
    from .pipeline import fuse_file

    try:
        cfg = FusionConfig(sigma_deg=args.sigma, min_confidence=args.min_confidence)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    fuse_file(args.preds, args.keypoints, args.out, cfg)
    print(f"wrote {args.out}")
    return 0


def _cmd_score(args) -> int:
    from .pipeline import score_dirs

    report, per_clip = score_dirs(args.pred, args.ref, args.threshold)
    r = report.as_dict()
    print(f"{'ER20':>8} {'F20':>8} {'LE_CD':>8} {'LR_CD':>8} {'SELD':>8}")
    print(f"{r['er20']:8.4f} {r['f20']:8.4f} {r['le_cd_deg']:8.2f} {r['lr_cd']:8.4f} {r['seld_score']:8.4f}")
    if r["le_undefined"]:
        print("note: no matched pairs; LE_CD reported as the 180 degree sentinel")
    if args.report:
        Path(args.report).write_text(json.dumps({"overall": r, "per_clip": per_clip}, indent=1, sort_keys=True) + "\n")
    return 0


def _cmd_loss_check(args) -> int:
    from .losses import gradient_check_suite

    rows = gradient_check_suite(args.instances, args.seed, tol=args.tol)
    print(f"{'loss':<22} {'max rel err':>12}  result")
    for r in rows:
        print(f"{r['loss']:<22} {r['max_rel_err']:12.3e}  {'PASS' if r['passed'] else 'FAIL'}")
    return 0 if all(r["passed"] for r in rows) else 2


def _cmd_pipeline_run(args) -> int:
    from .config import load_config
    from .pipeline import run_pipeline

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    result = run_pipeline(cfg, args.out)
    print(json.dumps(result.report, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avseld", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("transforms", help="spatial transform table").add_subparsers(dest="action", required=True)
    p = tr.add_parser("list", help="print every channel-swap transform")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_transforms_list)

    p = sub.add_parser("simulate", help="write a simulated dataset")
    p.add_argument("--spec", help="config file (its 'simulate' section is used)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("augment", help="ACS-VPS eightfold expansion of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--acs-set", default="default", help="set name or JSON list of transform names")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-pixel-map", action="store_true")
    p.set_defaults(func=_cmd_augment)

    fe = sub.add_parser("features", help="feature extraction").add_subparsers(dest="action", required=True)
    p = fe.add_parser("extract", help="write one feature container per clip")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("audio", "visual", "fused"), default="audio")
    p.add_argument("--width-h", type=float, default=0.04)
    p.add_argument("--width-v", type=float, default=0.08)
    p.set_defaults(func=_cmd_features_extract)

    p = sub.add_parser("fuse", help="video-guided decision fusion of a prediction CSV")
    p.add_argument("--preds", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=30.0)
    p.add_argument("--min-confidence", type=float, default=0.0)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("score", help="SELD metrics of a prediction directory")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--threshold", type=float, default=20.0)
    p.add_argument("--report", help="write a JSON report here")
    p.set_defaults(func=_cmd_score)

    lo = sub.add_parser("loss", help="loss kernels").add_subparsers(dest="action", required=True)
    p = lo.add_parser("check", help="finite-difference gradient audit")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_loss_check)

    pl = sub.add_parser("pipeline", help="end-to-end run").add_subparsers(dest="action", required=True)
    p = pl.add_parser("run", help="simulate, augment, extract, predict, fuse and score")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_pipeline_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except AvseldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
