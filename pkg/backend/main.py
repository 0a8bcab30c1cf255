import argparse
import json
import logging
import sys
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from config import Config
from evaluators import REPORT_FORMATS, format_accuracy, load_report, make_folds, render_report, save_report
from file_io import atomic_write_bytes, atomic_write_text, infer_format
from graph import cross_validate
from knn_classifier import KnnConfig, fit, load_model, predict_batch, save_model
from plotdata import PLOT_KINDS, plotdata
from segmentation import PipelineConfig, detect_segment, preprocess
from synth_generator import GenConfig, generate_dataset, load_templates
from trace_model import Dataset, GestureLabel, load_dataset, save_dataset
from wavelet_denoise import WaveletId, denoise

# pydantic field -> CLI flag, for usage messages
FIELD_FLAGS = {
    "wavelet_id": "--wavelet",
    "levels": "--levels",
    "threshold_rule": "--threshold",
    "threshold_mode": "--mode",
    "envelope_window_s": "--window",
    "rel_threshold": "--rel-threshold",
    "margin_s": "--margin",
    "fixed_len": "--fixed-len",
    "k": "--k",
    "metric": "--metric",
    "seed": "--seed",
    "reps_per_class": "--reps",
    "distance_cm": "--distance",
    "snr_ref_db": "--snr-db",
}


LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class UsageError(Exception):
    """Bad flag value; reported with exit code 2"""


def _validated(factory: Callable, **values):
    try:
        return factory(**values)
    except ValidationError as e:
        err = e.errors()[0]
        field = str(err["loc"][0]) if err["loc"] else ""
        flag = FIELD_FLAGS.get(field, field)
        raise UsageError(f"{flag}: {err['msg']}") from e


def _data_format(path: str, explicit: Optional[str], flag: str = "--data") -> str:
    if explicit:
        return explicit
    try:
        return infer_format(path)
    except ValueError as e:
        raise UsageError(f"{flag}: {e}") from e


# ============================================================================
# Flag groups
# ============================================================================

def _add_pipeline_flags(parser: argparse.ArgumentParser, segment: bool = True):
    group = parser.add_argument_group("wavelet denoising")
    group.add_argument("--wavelet", choices=[w.value for w in WaveletId], help=f"wavelet family (default {Config.WAVELET})")
    group.add_argument("--levels", type=int, help=f"decomposition depth (default {Config.LEVELS})")
    group.add_argument("--threshold", help="'universal' or a fixed non-negative value")
    group.add_argument("--mode", choices=["soft", "hard"], help="shrinkage mode")
    if segment:
        group = parser.add_argument_group("segmentation")
        group.add_argument("--rel-threshold", type=float, help="envelope threshold as a fraction of its peak")
        group.add_argument("--window", type=float, help="envelope window in seconds")
        group.add_argument("--margin", type=float, help="margin added on both sides, seconds")
        group.add_argument("--fixed-len", type=int, help="padded feature length")


def _add_knn_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--k", type=int, help=f"neighbors (default {Config.K})")
    parser.add_argument("--metric", choices=["euclidean", "manhattan"], help=f"distance (default {Config.METRIC})")


def _pipeline_from_args(args) -> PipelineConfig:
    denoise_cfg = _validated(
        Config.denoise_config,
        wavelet_id=args.wavelet,
        levels=args.levels,
        threshold_rule=args.threshold,
        threshold_mode=args.mode,
    )
    segment_cfg = _validated(
        Config.segment_config,
        envelope_window_s=getattr(args, "window", None),
        rel_threshold=getattr(args, "rel_threshold", None),
        margin_s=getattr(args, "margin", None),
        fixed_len=getattr(args, "fixed_len", None),
    )
    return PipelineConfig(denoise=denoise_cfg, segment=segment_cfg)


def _knn_from_args(args) -> KnnConfig:
    return _validated(Config.knn_config, k=args.k, metric=args.metric)


def _preprocess_all(ds: Dataset, pipeline: PipelineConfig):
    vectors, kept, excluded = [], [], []
    for index, trace in enumerate(ds):
        try:
            vectors.append(preprocess(trace, pipeline.denoise, pipeline.segment))
            kept.append(index)
        except ValueError as e:
            excluded.append(index)
            logging.warning(f"[CLI] Trace {index} unusable: {e}")
    return vectors, kept, excluded


# ============================================================================
# Subcommands
# ============================================================================

def cmd_generate(args) -> str:
    cfg = _validated(
        GenConfig,
        seed=args.seed if args.seed is not None else Config.SEED,
        reps_per_class=args.reps,
        distance_cm=args.distance,
        ambient_on=args.ambient == "on",
        snr_ref_db=args.snr_db,
    )
    fmt = _data_format(args.out, args.format, "--out")
    templates = load_templates(args.templates) if args.templates else None
    ds = generate_dataset(cfg, templates)
    save_dataset(ds, args.out, fmt)
    return f"generated {len(ds)} traces ({cfg.distance_cm:g} cm, ambient {args.ambient}) -> {args.out}"


def cmd_denoise(args) -> str:
    pipeline = _pipeline_from_args(args)
    in_fmt = _data_format(args.data, args.format)
    out_fmt = _data_format(args.out, None, "--out")
    ds = load_dataset(args.data, in_fmt)
    cleaned = Dataset(tuple(denoise(trace, pipeline.denoise) for trace in ds))
    save_dataset(cleaned, args.out, out_fmt)
    return f"denoised {len(cleaned)} traces ({pipeline.denoise.wavelet_id.value}, {pipeline.denoise.levels} levels) -> {args.out}"


def cmd_segment(args) -> str:
    pipeline = _pipeline_from_args(args)
    ds = load_dataset(args.data, _data_format(args.data, args.format))
    segments = []
    for index, trace in enumerate(ds):
        source = denoise(trace, pipeline.denoise) if args.denoise else trace
        seg = detect_segment(source, pipeline.segment)
        segments.append({
            "index": index,
            "label": trace.label.letter,
            "start_idx": seg.start_idx,
            "end_idx": seg.end_idx,
        })
    atomic_write_text(args.out, json.dumps(segments, indent=2) + "\n")
    return f"segmented {len(segments)} traces -> {args.out}"


def cmd_train(args) -> str:
    pipeline = _pipeline_from_args(args)
    knn = _knn_from_args(args)
    ds = load_dataset(args.data, _data_format(args.data, args.format))
    vectors, _, excluded = _preprocess_all(ds, pipeline)
    model = fit(vectors, k=knn.k, metric=knn.metric)
    save_model(model, args.out, pipeline=pipeline.model_dump(mode="json"))
    return f"trained k={knn.k} {knn.metric} on {len(vectors)} traces ({len(excluded)} excluded) -> {args.out}"


def cmd_classify(args) -> str:
    model_file = load_model(args.model)
    pipeline = PipelineConfig(**model_file.pipeline) if model_file.pipeline else PipelineConfig()
    ds = load_dataset(args.data, _data_format(args.data, args.format))
    vectors, kept, excluded = _preprocess_all(ds, pipeline)
    predictions = predict_batch(model_file.model, vectors)

    correct = sum(int(p.label == fv.label) for p, fv in zip(predictions, vectors))
    accuracy = correct / len(predictions) if predictions else 0.0
    payload = {
        "accuracy": accuracy,
        "excluded_indices": excluded,
        "predictions": [
            {
                "index": index,
                "label": fv.label.letter,
                "predicted": p.label.letter,
                "votes": {GestureLabel(c).letter: v for c, v in enumerate(p.vote_counts) if v},
            }
            for index, fv, p in zip(kept, vectors, predictions)
        ],
    }
    atomic_write_text(args.out, json.dumps(payload, indent=2) + "\n")
    return f"classified {len(predictions)} traces, accuracy {accuracy * 100:.2f}% ({len(excluded)} excluded) -> {args.out}"


def cmd_crossval(args) -> str:
    if args.folds < 2:
        raise UsageError(f"--folds must be at least 2, got {args.folds}")
    if args.workers is not None and args.workers < 1:
        raise UsageError(f"--workers must be at least 1, got {args.workers}")
    pipeline = _pipeline_from_args(args)
    knn = _knn_from_args(args)
    seed = args.seed if args.seed is not None else Config.SEED
    ds = load_dataset(args.data, _data_format(args.data, args.format))

    plan = make_folds(ds, K=args.folds, seed=seed, stratified=args.stratified)
    report = cross_validate(ds, pipeline, knn, plan, max_workers=args.workers)
    save_report(report, args.out, args.report)
    return (
        f"crossval {args.folds}-fold: {format_accuracy(report.mean_accuracy, report.accuracy_sd)}, "
        f"{report.excluded} excluded -> {args.out}"
    )


def cmd_report(args) -> Optional[str]:
    report = load_report(args.input)
    rendered = render_report(report, args.report)
    if args.out:
        atomic_write_bytes(args.out, rendered)
        return f"report ({args.report}) -> {args.out}"
    sys.stdout.write(rendered.decode("utf-8"))
    return None


def cmd_plotdata(args) -> str:
    pipeline = _pipeline_from_args(args)
    if args.kind == "trace-stages":
        if not args.data:
            raise UsageError("--data is required for --kind trace-stages")
        ds = load_dataset(args.data, _data_format(args.data, args.format))
        if not 0 <= args.index < len(ds):
            raise UsageError(f"--index {args.index} out of range for {len(ds)} traces")
        inputs = [ds[args.index]]
    else:
        if not args.reports:
            raise UsageError("--reports is required for --kind distance-accuracy")
        inputs = [load_report(path) for path in args.reports]
    data = plotdata(args.kind, inputs, pipeline.denoise, pipeline.segment)
    atomic_write_bytes(args.out, data)
    return f"plotdata {args.kind} -> {args.out}"


COMMANDS: Dict[str, Callable] = {
    "generate": cmd_generate,
    "denoise": cmd_denoise,
    "segment": cmd_segment,
    "train": cmd_train,
    "classify": cmd_classify,
    "crossval": cmd_crossval,
    "report": cmd_report,
    "plotdata": cmd_plotdata,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lws",
        description="Light-wave sensing gesture recognition: generate, denoise, segment, train, classify, evaluate.",
    )
    parser.add_argument("--log-level", default=None, help=f"logging level (default {Config.LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, default=120, help="repetitions per gesture class")
    p.add_argument("--distance", type=float, default=20.0, help="sensing distance in cm")
    p.add_argument("--ambient", choices=["on", "off"], default="on")
    p.add_argument("--snr-db", type=float, default=25.0, help="baseline intensity over white-noise sigma, in dB")
    p.add_argument("--templates", help="gesture template JSON (default backend/templates.json)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("denoise", help="wavelet-denoise every trace of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["csv", "json"], help="input format (default: from extension)")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p, segment=False)

    p = sub.add_parser("segment", help="detect gesture segments, emit indices as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--denoise", action="store_true", help="denoise before segmenting")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)

    p = sub.add_parser("train", help="preprocess a dataset and store a KNN model")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", required=True)
    _add_knn_flags(p)
    _add_pipeline_flags(p)

    p = sub.add_parser("classify", help="predict gestures with a stored model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("crossval", help="K-fold cross-validation report")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--folds", type=int, default=Config.FOLDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--stratified", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--workers", type=int, help=f"parallel folds (default {Config.MAX_WORKERS})")
    p.add_argument("--report", choices=REPORT_FORMATS, default="json")
    p.add_argument("--out", required=True)
    _add_knn_flags(p)
    _add_pipeline_flags(p)

    p = sub.add_parser("report", help="render a saved JSON report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report", choices=REPORT_FORMATS, default="text")
    p.add_argument("--out")

    p = sub.add_parser("plotdata", help="CSV data behind the stage and distance plots")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--data", help="dataset (trace-stages)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--index", type=int, default=0, help="trace index (trace-stages)")
    p.add_argument("--reports", nargs="+", help="crossval JSON reports (distance-accuracy)")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """CLI entry: 0 success, 1 runtime error, 2 usage error"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    level = (args.log_level or Config.LOG_LEVEL).upper()
    if level not in LOG_LEVELS:
        parser.print_usage(sys.stderr)
        source = "--log-level" if args.log_level else "LOG_LEVEL"
        print(f"{parser.prog}: error: {source}: unknown level '{level}' (choose from {', '.join(LOG_LEVELS)})",
              file=sys.stderr)
        return 2
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    # basicConfig is a no-op once the root logger has handlers
    logging.getLogger().setLevel(level)
    logging.debug(f"[CLI] Settings: {Config.summary()}")

    try:
        summary = COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        logging.error(f"[CLI] {args.command} failed: {e}")
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 1

    if summary:
        print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(run())
