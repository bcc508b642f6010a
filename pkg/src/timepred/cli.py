"""Command-line front end: gen, fit, detect, explain, and bench subcommands.

Exit codes: 0 success, 1 usage error, 2 file/format error, 3 infeasible
problem or bad configuration, 4 numerical failure, 5 dimension mismatch.
Every run is deterministic given its flags; structured outputs embed the
tool version and the parameter set that produced them.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import DEFAULT_EPSILON, DEFAULT_REFERENCE, lrp_explain
from .baselines import projection_direction, vanilla_detect
from .benchgen import FAMILIES, ProblemSpec, generate
from .cpd_core import ARCost, L2Cost, RBFCost, SegmentationConfig
from .errors import (
    ConfigError,
    FormatError,
    InfeasibleSegmentationError,
    InvalidRangeError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .harness import BenchmarkConfig, MethodId, all_methods, run_benchmark, timer
from .matrixio import (
    load_labels,
    load_matrix,
    save_labels,
    save_matrix,
    sidecar_path,
)
from .model import TrainConfig, fit, load_model, predict, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_SHAPE = 5


class UsageError(Exception):
    """Command-line level mistake detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--hidden", default="64,32",
                       help="comma-separated hidden widths, or 'none' for a linear head")
    group.add_argument("--epochs", type=int, default=30)
    group.add_argument("--learning-rate", type=float, default=1e-2)
    group.add_argument("--l1", type=float, default=1e-4)
    group.add_argument("--l2", type=float, default=1e-3)
    group.add_argument("--batch-size", type=int, default=None,
                       help="default: min(256, T)")
    group.add_argument("--momentum", type=float, default=0.9)


def _add_segment_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("segmentation")
    group.add_argument("--min-size", type=int, default=2)
    group.add_argument("--jump", type=int, default=None,
                       help="candidate stride; default 1 for T <= 2000, else 5")
    group.add_argument("--ar-order", type=int, default=1)
    group.add_argument("--rbf-bandwidth", type=float, default=None,
                       help="default: median heuristic on the segmented series")


def _parse_hidden(text: str) -> tuple:
    text = text.strip().lower()
    if text in ("", "none", "linear"):
        return ()
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--hidden must be like '64,32' or 'none', got {text!r}") from exc


def _train_config(args, T: int) -> TrainConfig:
    batch = args.batch_size if args.batch_size is not None else min(256, T)
    return TrainConfig(
        l1_weight=args.l1,
        l2_weight=args.l2,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=batch,
        seed=args.seed,
        momentum=args.momentum,
    )


def _cost_from_args(args):
    if args.cost == "l2":
        return L2Cost()
    if args.cost == "ar":
        return ARCost(order=args.ar_order)
    return RBFCost(bandwidth=args.rbf_bandwidth)


def _loss_summary(curve) -> str:
    if not curve:
        return "n/a"
    return (f"first={curve[0]:.6g} min={min(curve):.6g} "
            f"last={curve[-1]:.6g} epochs={len(curve)}")


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_gen(args) -> int:
    overrides = {}
    if args.delta is not None:
        overrides["mean_shift_delta"] = args.delta
    spec = ProblemSpec(
        family=args.family, T=args.T, d=args.d, seed=args.seed,
        cp_window=(args.cp_window[0], args.cp_window[1]), **overrides,
    )
    dataset = generate(spec)
    save_matrix(args.out, dataset.series, fmt=args.format)
    labels = sidecar_path(args.out)
    save_labels(
        labels,
        true_cps=[] if dataset.degenerate else [dataset.true_cp],
        family=dataset.family,
        seed=dataset.seed,
        affected_dims=dataset.affected_dims,
        params={
            "T": spec.T, "d": spec.d, "cp_window": list(spec.cp_window),
            "format": args.format, "degenerate": dataset.degenerate,
            **overrides,
        },
    )
    print(f"wrote {args.out} ({spec.T} x {spec.d}, {args.format})")
    print(f"wrote {labels}")
    print(f"true_cp {dataset.true_cp}")
    return EXIT_OK


def cmd_fit(args) -> int:
    X = load_matrix(args.input)
    config = _train_config(args, X.shape[0])
    model = fit(X, config, hidden_sizes=_parse_hidden(args.hidden))
    save_model(model, args.out)
    print(f"wrote {args.out} (layers {list(model.layer_sizes)})")
    print(f"loss {_loss_summary(model.loss_curve)}")
    return EXIT_OK


def cmd_detect(args) -> int:
    X = load_matrix(args.input)
    T = X.shape[0]
    seg_config = SegmentationConfig(
        n_breakpoints=args.k, min_segment_length=args.min_size, jump=args.jump,
    )
    cost = _cost_from_args(args)
    loss_curve = ()

    if args.method == "vanilla":
        feature_seconds = 0.0
        segmentation, segment_seconds = timer(
            "segment", lambda: vanilla_detect(X, cost, seg_config))
    elif args.method == "wang":
        def _project():
            projection = projection_direction(X, seed=args.seed)
            return X @ projection.direction

        projected, feature_seconds = timer("project", _project)
        segmentation, segment_seconds = timer(
            "segment", lambda: vanilla_detect(projected.reshape(-1, 1), cost, seg_config))
    else:  # timepred
        if args.model is not None:
            model = load_model(args.model)
            y, feature_seconds = timer("predict", lambda: predict(model, X))
        else:
            def _fit_predict():
                trained = fit(X, _train_config(args, T), hidden_sizes=_parse_hidden(args.hidden))
                return trained, predict(trained, X)

            (model, y), feature_seconds = timer("fit+predict", _fit_predict)
            loss_curve = model.loss_curve
        segmentation, segment_seconds = timer(
            "segment", lambda: vanilla_detect(y.reshape(-1, 1), cost, seg_config))

    breakpoints = list(segmentation.breakpoints)
    print(f"breakpoints {breakpoints}")
    print(f"feature_seconds {feature_seconds:.6f}")
    print(f"segment_seconds {segment_seconds:.6f}")
    if loss_curve:
        print(f"loss {_loss_summary(loss_curve)}")

    if args.out is not None:
        _write_json(args.out, {
            "version": __version__,
            "params": {
                "input": str(args.input), "method": args.method, "cost": args.cost,
                "k": args.k, "min_size": args.min_size, "jump": args.jump,
                "ar_order": args.ar_order, "rbf_bandwidth": args.rbf_bandwidth,
                "seed": args.seed, "model": args.model,
            },
            "T": T, "d": X.shape[1],
            "breakpoints": breakpoints,
            "feature_seconds": feature_seconds,
            "segment_seconds": segment_seconds,
            "loss_curve": list(loss_curve),
        })
        print(f"wrote {args.out}")
    return EXIT_OK


def _parse_samples(text: str, T: int) -> list:
    text = text.strip().lower()
    if text == "all":
        return list(range(T))
    if ":" in text and "," not in text:
        lo_s, hi_s = text.split(":", 1)
        try:
            lo = int(lo_s) if lo_s else 0
            hi = int(hi_s) if hi_s else T
        except ValueError as exc:
            raise UsageError(f"bad sample range {text!r}") from exc
        indices = list(range(lo, hi))
    else:
        try:
            indices = [int(tok) for tok in text.split(",") if tok.strip()]
        except ValueError as exc:
            raise UsageError(f"bad sample list {text!r}") from exc
    if not indices:
        raise UsageError("no samples requested")
    for i in indices:
        if not 0 <= i < T:
            raise UsageError(f"sample index {i} out of range [0, {T})")
    return indices


def cmd_explain(args) -> int:
    X = load_matrix(args.input)
    model = load_model(args.model)
    indices = _parse_samples(args.samples, X.shape[0])
    d = X.shape[1]
    rows = []
    for i in indices:
        attribution = lrp_explain(model, X[i], reference=args.reference, epsilon=args.epsilon)
        rows.append((i, attribution))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        header = ["sample_index"] + [f"dim_{j}" for j in range(d)] + ["explained_value"]
        fh.write(",".join(header) + "\n")
        for i, attribution in rows:
            fields = [str(i)]
            fields += [f"{v:.17g}" for v in attribution.relevance]
            fields.append(f"{attribution.explained_value:.17g}")
            fh.write(",".join(fields) + "\n")
    print(f"wrote {args.out} ({len(rows)} samples, reference={args.reference})")
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = tuple(MethodId.parse(m) for m in args.methods) if args.methods else all_methods()
    base = {}
    if args.paper_scale:
        base.update(T=10_000, d=100, n_reps=100, tolerance=100)
    if args.T is not None:
        base["T"] = args.T
    if args.d is not None:
        base["d"] = args.d
    if args.reps is not None:
        base["n_reps"] = args.reps
    if args.tol is not None:
        base["tolerance"] = args.tol

    train = TrainConfig(
        l1_weight=args.l1, l2_weight=args.l2, learning_rate=args.learning_rate,
        epochs=args.epochs, batch_size=args.batch_size or 256, momentum=args.momentum,
    )
    config = BenchmarkConfig(
        families=tuple(args.families),
        methods=methods,
        master_seed=args.seed,
        min_segment_length=args.min_size,
        jump=args.jump,
        ar_order=args.ar_order,
        rbf_bandwidth=args.rbf_bandwidth,
        train=train,
        hidden_sizes=_parse_hidden(args.hidden),
        n_jobs=args.jobs,
        **base,
    )
    report, seconds = timer("benchmark", lambda: run_benchmark(config))
    json_path = Path(str(args.out) + ".json")
    csv_path = Path(str(args.out) + ".csv")
    report.save_json(json_path)
    report.save_csv(csv_path)
    print(f"wrote {json_path}")
    print(f"wrote {csv_path}")
    print(f"benchmark_seconds {seconds:.3f}")
    print(f"{'family':<16}{'method':<16}{'precision':>10}{'n':>5}{'total_s':>12}")
    for row in report.summary:
        print(f"{row['family']:<16}{row['method']:<16}"
              f"{row['precision']:>10.3f}{row['n_datasets']:>5}"
              f"{row['mean_total_seconds']:>12.4f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="timepred",
                     description="Change point detection via time-index regression.")
    parser.add_argument("--version", action="version", version=f"timepred {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset + label sidecar")
    p_gen.add_argument("--family", required=True, choices=FAMILIES)
    p_gen.add_argument("--T", type=int, default=2000)
    p_gen.add_argument("--d", type=int, default=20)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--format", choices=("binary", "csv"), default="binary")
    p_gen.add_argument("--cp-window", type=float, nargs=2, default=(0.25, 0.75),
                       metavar=("LO", "HI"))
    p_gen.add_argument("--delta", type=float, default=None,
                       help="mean-shift magnitude override (mean_shift family)")
    p_gen.set_defaults(func=cmd_gen)

    p_fit = sub.add_parser("fit", help="train a time predictor on a matrix file")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--seed", type=int, default=0)
    _add_train_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_detect = sub.add_parser("detect", help="detect change points in a matrix file")
    p_detect.add_argument("--input", required=True)
    p_detect.add_argument("--method", choices=("vanilla", "wang", "timepred"),
                          default="timepred")
    p_detect.add_argument("--cost", choices=("l2", "ar", "rbf"), default="l2")
    p_detect.add_argument("--k", type=int, default=1, help="number of breakpoints")
    p_detect.add_argument("--seed", type=int, default=0)
    p_detect.add_argument("--model", default=None,
                          help="pretrained model file (timepred method only)")
    p_detect.add_argument("--out", default=None, help="JSON result file")
    _add_segment_flags(p_detect)
    _add_train_flags(p_detect)
    p_detect.set_defaults(func=cmd_detect)

    p_explain = sub.add_parser("explain", help="per-dimension relevance for samples")
    p_explain.add_argument("--input", required=True)
    p_explain.add_argument("--model", required=True)
    p_explain.add_argument("--samples", default="all",
                           help="'all', 'i', 'i:j', or comma-separated indices")
    p_explain.add_argument("--reference", type=float, default=DEFAULT_REFERENCE)
    p_explain.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p_explain.add_argument("--out", required=True)
    p_explain.set_defaults(func=cmd_explain)

    p_bench = sub.add_parser("bench", help="run the benchmark grid, write reports")
    p_bench.add_argument("--families", nargs="+", choices=FAMILIES, default=list(FAMILIES))
    p_bench.add_argument("--methods", nargs="+", default=None,
                         help="method ids like timepred/l2 (default: full grid)")
    p_bench.add_argument("--reps", type=int, default=None)
    p_bench.add_argument("--T", type=int, default=None)
    p_bench.add_argument("--d", type=int, default=None)
    p_bench.add_argument("--tol", type=int, default=None)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--jobs", type=int, default=None,
                         help="worker processes (default: logical core count)")
    p_bench.add_argument("--paper-scale", action="store_true",
                         help="T=10000, d=100, 100 reps, tolerance 100")
    p_bench.add_argument("--out", default="benchmark_report",
                         help="output path prefix for .json/.csv")
    _add_segment_flags(p_bench)
    _add_train_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"timepred: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"timepred: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ShapeMismatchError as exc:
        print(f"timepred: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (InfeasibleSegmentationError, ConfigError, InvalidRangeError) as exc:
        print(f"timepred: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TrainingDivergedError, FloatingPointError) as exc:
        print(f"timepred: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"timepred: file error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
