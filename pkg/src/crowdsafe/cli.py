"""Command-line surface: process, augment, evaluate, bench.

Exit codes: 0 success, 1 validation/parse failure, 2 runtime failure
(backend construction or IO during processing).  Flag defaults are the
reference configuration (stride 5, conf 0.5, nms 0.3, eps 200, min_pts 2,
416/128 input sizes), so a defaults-only run is the standard setup.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import augmentation, evaluation, imgio, pipeline
from .backends import (
    BackendContractError,
    GraphError,
    ScenarioError,
    graph_backends,
    load_scenario,
    synthetic_backends,
)
from .distancing import DbscanParams
from .geometry import NmsParams
from .onnxlite import UnsupportedOperator
from .pipeline import PipelineConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

BENCH_ROWS = ("person_detection", "social_distancing", "face_detection",
              "mask_classification", "total")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="video manifest JSON")
    p.add_argument("--backend", required=True, choices=["synthetic", "graph"])
    p.add_argument("--scenario", help="scenario JSON (synthetic backend)")
    p.add_argument("--models", help="directory with person/face/mask graphs (graph backend)")
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--eps", type=float, default=200.0)
    p.add_argument("--min-pts", type=int, default=2)
    p.add_argument("--conf", type=float, default=0.5)
    p.add_argument("--nms", type=float, default=0.3)
    p.add_argument("--mask-threshold", type=float, default=0.5)
    p.add_argument("--detector-input", type=int, default=416)
    p.add_argument("--classifier-input", type=int, default=128)
    p.add_argument("--pixels-per-meter", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=0, help="0 = available parallelism")


def _make_config(args) -> PipelineConfig:
    return PipelineConfig(
        stride=args.stride,
        detector_input=args.detector_input,
        classifier_input=args.classifier_input,
        nms=NmsParams(args.conf, args.nms),
        dbscan=DbscanParams(args.eps, args.min_pts),
        mask_threshold=args.mask_threshold,
        workers=args.workers,
        pixels_per_meter=args.pixels_per_meter,
    )


def _make_backends(args):
    if args.backend == "synthetic":
        if not args.scenario:
            raise _UsageError("--backend synthetic requires --scenario PATH")
        return synthetic_backends(load_scenario(args.scenario)), {"scenario": args.scenario}
    if not args.models:
        raise _UsageError("--backend graph requires --models DIR")
    return graph_backends(args.models, args.detector_input, args.classifier_input), \
        {"models": args.models}


def cmd_process(args) -> int:
    manifest = pipeline.load_manifest(args.manifest)
    backends, source = _make_backends(args)
    cfg = _make_config(args)
    extra = {"backend": args.backend, "seed": args.seed, **source}
    report = pipeline.run(manifest, cfg, backends, out_dir=args.out, extra_config=extra)
    agg = report.aggregates()
    print(f"processed {agg['frames']} frames ({agg['frames_failed']} failed); "
          f"report written to {Path(args.out) / 'report.json'}")
    return EXIT_OK


def cmd_augment_mask(args) -> int:
    records = augmentation.read_manifest(args.manifest)
    assets = []
    for path in sorted(Path(args.masks).glob("*.png")):
        asset = imgio.read_image(path)
        if asset.shape[2] != 4:
            raise ScenarioError(f"mask asset {path} must be RGBA")
        assets.append(asset)
    if not assets:
        raise ScenarioError(f"no RGBA .png mask assets found in {args.masks}")
    outputs, failures = augmentation.generate_dataset(
        records, args.out, mask_assets=assets, landmarks_dir=args.landmarks,
        seed=args.seed, image_format=args.format)
    print(f"wrote {len(outputs)} images ({len(failures)} failures) under {args.out}")
    return EXIT_OK


def cmd_augment_blur(args) -> int:
    records = augmentation.read_manifest(args.manifest)
    outputs, failures = augmentation.generate_dataset(
        records, args.out, seed=args.seed, image_format=args.format)
    train, test = augmentation.split_records(outputs, args.test_fraction, args.seed)
    augmentation.write_manifest(Path(args.out) / "train.csv", train)
    augmentation.write_manifest(Path(args.out) / "test.csv", test)
    print(f"wrote {len(outputs)} images ({len(failures)} failures); "
          f"split {len(train)}/{len(test)} train/test under {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = pipeline.load_report(args.report)
    labels = evaluation.load_labels(args.labels)
    metrics = evaluation.evaluate(report, labels)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    overall = metrics["overall"]
    acc = overall["accuracy"]
    f1 = overall["f1"]
    print(f"evaluated {metrics['frames_evaluated']} frames: "
          f"accuracy={acc if acc is None else round(acc, 4)} "
          f"f1={f1 if f1 is None else round(f1, 4)}; metrics written to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    manifest = pipeline.load_manifest(args.manifest)
    backends, _ = _make_backends(args)
    cfg = _make_config(args)
    stats = pipeline.bench(manifest, cfg, backends, args.repeat)
    print(f"{'stage':<22} {'s_per_video_s':>14} {'stddev':>12}  ({args.repeat} runs)")
    for row in BENCH_ROWS:
        entry = stats[row]
        print(f"{row:<22} {entry['mean']:>14.6f} {entry['stddev']:>12.6f}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="crowdsafe",
                     description="Social-distancing and mask monitoring toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process", parents=[], help="run the video pipeline")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_process)

    aug = sub.add_parser("augment", help="dataset augmentation")
    aug_sub = aug.add_subparsers(dest="augment_command", required=True)

    m = aug_sub.add_parser("mask", help="superimpose mask assets on faces")
    m.add_argument("--manifest", required=True, help="input CSV (path,label)")
    m.add_argument("--masks", required=True, help="directory of RGBA .png mask assets")
    m.add_argument("--landmarks", required=True, help="directory of landmark JSON sidecars")
    m.add_argument("--out", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--format", choices=["png", "ppm"], default="png")
    m.set_defaults(func=cmd_augment_mask)

    b = aug_sub.add_parser("blur", help="random blur augmentation")
    b.add_argument("--manifest", required=True, help="input CSV (path,label)")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--test-fraction", type=float, default=0.10)
    b.add_argument("--format", choices=["png", "ppm"], default="png")
    b.set_defaults(func=cmd_augment_blur)

    e = sub.add_parser("evaluate", help="score a report against count labels")
    e.add_argument("--report", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    bench_p = sub.add_parser("bench", help="timing benchmark")
    _add_pipeline_flags(bench_p)
    bench_p.add_argument("--repeat", type=int, default=3)
    bench_p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ScenarioError, augmentation.ManifestError, augmentation.LandmarkError,
            pipeline.VideoManifestError, pipeline.ReportError, evaluation.LabelError,
            evaluation.LabelMismatchError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GraphError, UnsupportedOperator, BackendContractError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
