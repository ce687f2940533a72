"""Batch command line: ``crip {extract,eval,perturb,synth,codemap}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import descriptor
from .descriptor import code_map, hamming_drift
from .evaluation import ClassifierConfig, EvaluationError, LeakageError, make_plan, run_protocol
from .features import FeatureConfig, feature_vector, write_feature_matrix
from .imaging import (ManifestError, load_image, load_manifest, load_sample, perturb_affine,
                      perturb_noise, perturb_resolution, preprocess, save_pgm)
from .svm import KERNELS
from .synthetic import make_texture_dataset

log = logging.getLogger("crip")

EXIT_OK, EXIT_FAILURES, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser, manifest_required=True):
    p.add_argument("--manifest", required=manifest_required, help="CSV manifest: path,subject,label[,x,y,w,h]")
    p.add_argument("--descriptor", choices=sorted(descriptor.DESCRIPTORS), default="crip")
    p.add_argument("--size", type=int, default=128, help="normalized square image side")
    p.add_argument("--block", type=int, default=16, help="histogram block side")
    p.add_argument("--normalize", action="store_true", help="L1-normalize each block histogram")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crip", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write the feature matrix of every manifest sample")
    _common(p)

    p = sub.add_parser("eval", help="run an evaluation protocol and write its report")
    _common(p)
    p.add_argument("--kernel", choices=KERNELS, default="linear")
    p.add_argument("--c", type=float, default=1.0, dest="C")
    p.add_argument("--protocol", choices=("pd", "kfold", "loso"), default="pd")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--ratio", type=float, default=0.8)

    p = sub.add_parser("perturb", help="measure code-map drift under perturbations")
    _common(p)
    p.add_argument("--perturb", choices=("affine", "noise", "resolution"), required=True)
    p.add_argument("--gain", type=float, nargs="+", default=[2.0])
    p.add_argument("--offset", type=float, nargs="+", default=[-30.0])
    p.add_argument("--sigma", type=float, nargs="+", default=[5.0, 10.0, 20.0])
    p.add_argument("--factor", type=int, nargs="+", default=[2, 4])

    p = sub.add_parser("synth", help="generate the procedural 3-class texture dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=12)
    p.add_argument("--per-class", type=int, default=4)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("codemap", help="export a code map as an 8-bit PGM")
    p.add_argument("--image", required=True)
    p.add_argument("--descriptor", choices=sorted(descriptor.DESCRIPTORS), default="crip")
    p.add_argument("--size", type=int, default=None, help="resize to this square side first")
    p.add_argument("--out", required=True, help="output .pgm path")
    return parser


def _config_echo(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "verbose"}
    cfg["backend"] = descriptor.BACKEND
    return cfg


def _validate(args):
    if getattr(args, "size", None) is not None and args.size < 5:
        raise ValueError(f"--size must be >= 5, got {args.size}")
    if getattr(args, "block", 1) < 1:
        raise ValueError(f"--block must be >= 1, got {args.block}")


def _write_config(out: Path, cfg: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(args.descriptor, args.size, args.block, args.normalize)


def cmd_extract(args) -> int:
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    _write_config(out, _config_echo(args))
    fc = _feature_config(args)
    ids, rows, failed = [], [], []
    for i, s in enumerate(manifest.samples):
        try:
            img = load_sample(manifest, s, fc.size)
        except Exception as exc:  # corrupt or missing image: skip and report
            log.warning("skipping %s: %s", manifest.resolve(s), exc)
            failed.append(s.image_path)
            continue
        rows.append(feature_vector(code_map(img, fc.descriptor), fc.block_size, fc.normalize))
        ids.append(s.image_path)
    matrix = np.array(rows).reshape(len(rows), fc.grid().dimension)
    path = out / "features.csv"
    write_feature_matrix(path, ids, matrix, fc)
    print(f"wrote {matrix.shape[0]} x {matrix.shape[1]} feature matrix to {path} "
          f"({fc.grid().n_blocks} blocks x 256 bins, descriptor={fc.descriptor})")
    if failed:
        print(f"{len(failed)} of {len(manifest.samples)} samples failed", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    plan = make_plan(manifest, args.protocol, k=args.k, repeats=args.repeats, ratio=args.ratio, seed=args.seed)
    report = run_protocol(manifest, _feature_config(args), ClassifierConfig(args.C, args.kernel), plan)
    report.config = {**_config_echo(args), **report.config}
    out = Path(args.out)
    _write_config(out, _config_echo(args))
    paths = report.write(out)
    print(f"{args.protocol}: mean accuracy {report.mean_accuracy:.2f}% over {len(report.folds)} folds "
          f"-> {paths['report']}")
    return EXIT_OK if report.compliant else EXIT_FAILURES


def _perturb_levels(args):
    if args.perturb == "affine":
        for g in args.gain:
            if not g > 0:
                raise ValueError(f"--gain must be > 0, got {g}")
        return [(f"gain={g:g},offset={o:g}", lambda img, i, g=g, o=o: perturb_affine(img, g, o))
                for g in args.gain for o in args.offset]
    if args.perturb == "noise":
        for s in args.sigma:
            if s < 0:
                raise ValueError(f"--sigma must be >= 0, got {s}")
        return [(f"sigma={s:g}", lambda img, i, s=s: perturb_noise(img, s, args.seed * 1_000_003 + i))
                for s in args.sigma]
    for f in args.factor:
        if f < 1:
            raise ValueError(f"--factor must be >= 1, got {f}")
    return [(f"factor={f}", lambda img, i, f=f: perturb_resolution(img, f)) for f in args.factor]


def cmd_perturb(args) -> int:
    manifest = load_manifest(args.manifest)
    levels = _perturb_levels(args)
    out = Path(args.out)
    _write_config(out, _config_echo(args))
    names = sorted(descriptor.DESCRIPTORS)
    rows, failed = [], []
    for i, s in enumerate(manifest.samples):
        try:
            img = load_sample(manifest, s, args.size)
        except Exception as exc:
            log.warning("skipping %s: %s", manifest.resolve(s), exc)
            failed.append(s.image_path)
            continue
        base = {d: code_map(img, d) for d in names}
        for name, fn in levels:
            moved = fn(img, i)
            for d in names:
                rows.append((s.image_path, args.perturb, name, d, hamming_drift(base[d], code_map(moved, d))))
    with open(out / "robustness.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "perturbation", "level", "descriptor", "drift"])
        for r in rows:
            w.writerow([*r[:4], repr(r[4])])
    tripped = False
    summary = []
    for name, _ in levels:
        for d in names:
            vals = [r[4] for r in rows if r[2] == name and r[3] == d]
            mean = float(np.mean(vals)) if vals else float("nan")
            summary.append((name, d, mean))
            if args.perturb == "affine" and any(v != 0 for v in vals):
                tripped = True
                log.error("affine invariance violated for %s at %s", d, name)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "descriptor", "mean_drift"])
        for name, d, mean in summary:
            w.writerow([name, d, repr(mean)])
    print(f"{'level':<24} " + " ".join(f"{d:>10}" for d in names))
    for name, _ in levels:
        vals = {d: m for n, d, m in summary if n == name}
        print(f"{name:<24} " + " ".join(f"{vals[d]:>10.4f}" for d in names))
    if failed:
        print(f"{len(failed)} of {len(manifest.samples)} samples failed", file=sys.stderr)
    return EXIT_FAILURES if failed or tripped else EXIT_OK


def cmd_synth(args) -> int:
    m = make_texture_dataset(args.out, args.subjects, args.per_class, args.size, args.seed)
    print(f"wrote {len(m.samples)} images ({len(m.classes)} classes, {len(m.subjects)} subjects) "
          f"and {Path(args.out) / 'manifest.csv'}")
    return EXIT_OK


def cmd_codemap(args) -> int:
    img = load_image(args.image)
    if args.size:
        img = preprocess(img, None, args.size)
    save_pgm(code_map(img, args.descriptor), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"extract": cmd_extract, "eval": cmd_eval, "perturb": cmd_perturb,
            "synth": cmd_synth, "codemap": cmd_codemap}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        _validate(args)
        return COMMANDS[args.command](args)
    except (ValueError, ManifestError, FileNotFoundError, EvaluationError, LeakageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
