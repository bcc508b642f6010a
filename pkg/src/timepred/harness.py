"""Experiment orchestration: method grids over replicated datasets.

A grid cell is (family, replication, method).  Every cell derives its own
seeds from the master seed with a counter-based scheme, so cells are
independent of grid composition and execution order; datasets within a grid
can therefore be processed by a worker pool without affecting results.
Failed cells are recorded and never abort the grid.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .baselines import projection_direction, vanilla_detect
from .benchgen import FAMILIES, ProblemSpec, generate
from .cpd_core import ARCost, CostKind, L2Cost, RBFCost, Segmentation, SegmentationConfig
from .errors import ConfigError
from .model import TrainConfig, fit, predict

METHOD_KINDS = ("vanilla", "wang", "timepred")
COST_NAMES = ("l2", "ar", "rbf")

_METHOD_CODES = {kind: code for code, kind in enumerate(METHOD_KINDS, start=1)}
_COST_CODES = {name: code for code, name in enumerate(COST_NAMES, start=1)}
_FAMILY_CODES = {family: code for code, family in enumerate(FAMILIES, start=1)}


@dataclass(frozen=True)
class MethodId:
    """A detection pipeline paired with a segment cost, e.g. ``timepred/l2``."""

    method: str
    cost: str

    def __post_init__(self):
        if self.method not in METHOD_KINDS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHOD_KINDS}")
        if self.cost not in COST_NAMES:
            raise ConfigError(f"unknown cost {self.cost!r}, expected one of {COST_NAMES}")

    @property
    def id(self) -> str:
        return f"{self.method}/{self.cost}"

    @classmethod
    def parse(cls, text: str) -> "MethodId":
        parts = text.strip().lower().split("/")
        if len(parts) != 2:
            raise ConfigError(f"method id must look like 'timepred/l2', got {text!r}")
        return cls(parts[0], parts[1])


def all_methods() -> tuple:
    """The full method-by-cost grid in canonical order."""
    return tuple(MethodId(m, c) for m in METHOD_KINDS for c in COST_NAMES)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Grid definition plus shared detection and training parameters.

    Defaults are desk scale (T=2000, d=20, 20 reps, tolerance 20); see
    :meth:`paper_scale` for the full-size setup (T=10000, d=100, 100 reps,
    tolerance 100).
    """

    families: tuple = FAMILIES
    methods: tuple = field(default_factory=all_methods)
    n_reps: int = 20
    T: int = 2000
    d: int = 20
    tolerance: int = 20
    master_seed: int = 0
    n_breakpoints: int = 1  # the generators place exactly one change
    min_segment_length: int = 2
    jump: Optional[int] = None
    ar_order: int = 1
    rbf_bandwidth: Optional[float] = None  # None -> median heuristic per series
    train: TrainConfig = TrainConfig()
    hidden_sizes: tuple = (64, 32)
    n_jobs: Optional[int] = None
    spec_overrides: tuple = ()  # (name, value) pairs forwarded to ProblemSpec

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        methods = tuple(
            m if isinstance(m, MethodId) else MethodId.parse(m) for m in self.methods
        )
        object.__setattr__(self, "methods", methods)
        if int(self.n_reps) < 1:
            raise ConfigError(f"n_reps must be >= 1, got {self.n_reps}")
        if not methods:
            raise ConfigError("the method grid is empty")
        for family in self.families:
            if family not in FAMILIES:
                raise ConfigError(f"unknown family {family!r}, expected one of {FAMILIES}")
        object.__setattr__(self, "spec_overrides", tuple(self.spec_overrides))

    @classmethod
    def paper_scale(cls, **kwargs) -> "BenchmarkConfig":
        base = dict(T=10_000, d=100, n_reps=100, tolerance=100)
        base.update(kwargs)
        return cls(**base)


def timer(label: str, thunk: Callable):
    """Run the thunk, returning (result, wall seconds on the monotonic clock)."""
    start = time.perf_counter()
    result = thunk()
    return result, time.perf_counter() - start


def precision_at_tolerance(predicted, truth: Sequence[int], tol: int) -> float:
    """Fraction of predicted breakpoints within tol of a true change, one-to-one.

    Matching is greedy closest-first and each true change can absorb at most
    one prediction.  Returns 1.0 when there are no predictions (no false
    positives to score) and 0.0 when predictions exist but no truths do.
    """
    if tol < 0:
        raise ConfigError(f"tolerance must be >= 0, got {tol}")
    preds = list(predicted.breakpoints) if isinstance(predicted, Segmentation) else list(predicted)
    if not preds:
        return 1.0
    truths = list(truth)
    if not truths:
        return 0.0
    pairs = sorted(
        (abs(p - t), pi, ti)
        for pi, p in enumerate(preds)
        for ti, t in enumerate(truths)
        if abs(p - t) <= tol
    )
    used_p = set()
    used_t = set()
    matched = 0
    for _, pi, ti in pairs:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        matched += 1
    return matched / len(preds)


def _derive_seed(*entropy: int) -> int:
    masked = tuple(e & 0xFFFFFFFFFFFFFFFF for e in entropy)
    return int(np.random.SeedSequence(masked).generate_state(1, np.uint64)[0])


def dataset_seed(master_seed: int, family: str, rep: int) -> int:
    """Seed of the dataset at (family, rep); independent of grid composition."""
    return _derive_seed(master_seed, _FAMILY_CODES[family], rep)


def method_seed(master_seed: int, family: str, rep: int, method: MethodId) -> int:
    code = 10 * _METHOD_CODES[method.method] + _COST_CODES[method.cost]
    return _derive_seed(master_seed, _FAMILY_CODES[family], rep, code)


def _cost_kind(name: str, ar_order: int, rbf_bandwidth: Optional[float]) -> CostKind:
    if name == "l2":
        return L2Cost()
    if name == "ar":
        return ARCost(order=ar_order)
    return RBFCost(bandwidth=rbf_bandwidth)


def _run_cell(config: BenchmarkConfig, family: str, rep: int, method: MethodId) -> dict:
    ds_seed = dataset_seed(config.master_seed, family, rep)
    cell = {
        "family": family,
        "rep": rep,
        "method": method.id,
        "dataset_seed": ds_seed,
        "error": None,
    }
    try:
        spec = ProblemSpec(
            family=family, T=config.T, d=config.d, seed=ds_seed,
            **dict(config.spec_overrides),
        )
        dataset, gen_seconds = timer("generate", lambda: generate(spec))
        seg_config = SegmentationConfig(
            n_breakpoints=config.n_breakpoints,
            min_segment_length=config.min_segment_length,
            jump=config.jump,
        )
        cost = _cost_kind(method.cost, config.ar_order, config.rbf_bandwidth)
        seed = method_seed(config.master_seed, family, rep, method)

        if method.method == "vanilla":
            feature_seconds = 0.0
            segmentation, segment_seconds = timer(
                "segment", lambda: vanilla_detect(dataset.series, cost, seg_config)
            )
        elif method.method == "wang":
            def _project():
                projection = projection_direction(dataset.series, seed=seed)
                return dataset.series @ projection.direction

            projected, feature_seconds = timer("project", _project)
            segmentation, segment_seconds = timer(
                "segment",
                lambda: vanilla_detect(projected.reshape(-1, 1), cost, seg_config),
            )
        else:  # timepred
            train_cfg = dataclasses.replace(config.train, seed=seed)

            def _fit_predict():
                model = fit(dataset.series, train_cfg, hidden_sizes=config.hidden_sizes)
                return predict(model, dataset.series)

            y, feature_seconds = timer("fit+predict", _fit_predict)
            segmentation, segment_seconds = timer(
                "segment",
                lambda: vanilla_detect(y.reshape(-1, 1), cost, seg_config),
            )

        truth = [] if dataset.degenerate else [dataset.true_cp]
        cell.update(
            true_cp=int(dataset.true_cp),
            degenerate=bool(dataset.degenerate),
            breakpoints=list(segmentation.breakpoints),
            precision=precision_at_tolerance(segmentation, truth, config.tolerance),
            gen_seconds=gen_seconds,
            feature_seconds=feature_seconds,
            segment_seconds=segment_seconds,
            total_seconds=feature_seconds + segment_seconds,
        )
    except Exception as exc:  # record and continue; the grid never aborts
        cell["error"] = f"{type(exc).__name__}: {exc}"
    return cell


@dataclass
class BenchmarkReport:
    """Per-cell results plus per-(family, method) aggregates."""

    config: dict
    cells: list
    summary: list
    version: str = __version__

    def summary_row(self, family: str, method: str) -> dict:
        for row in self.summary:
            if row["family"] == family and row["method"] == method:
                return row
        raise KeyError(f"no summary row for ({family!r}, {method!r})")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "cells": self.cells,
            "summary": self.summary,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path) -> None:
        columns = [
            "family", "method", "precision", "n_datasets", "n_failed", "tolerance",
            "mean_feature_seconds", "mean_segment_seconds", "mean_total_seconds",
        ]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in self.summary:
                fh.write(",".join(_csv_field(row[c]) for c in columns) + "\n")


def _csv_field(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _config_dict(config: BenchmarkConfig) -> dict:
    doc = dataclasses.asdict(config)
    doc["methods"] = [m.id for m in config.methods]
    doc["families"] = list(config.families)
    doc["hidden_sizes"] = list(config.hidden_sizes)
    doc["spec_overrides"] = {name: value for name, value in config.spec_overrides}
    return doc


def run_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    """Run the full (family, rep, method) grid and aggregate per-cell results.

    Fully reproducible from the master seed: cell seeds are derived, results
    are keyed, and assembly is order-independent.  ``n_jobs`` controls the
    process pool (defaults to the machine's core count; 1 runs inline).
    """
    tasks = [
        (family, rep, method)
        for family in config.families
        for rep in range(config.n_reps)
        for method in config.methods
    ]
    n_jobs = config.n_jobs if config.n_jobs is not None else (os.cpu_count() or 1)
    n_jobs = max(1, min(n_jobs, len(tasks)))

    if n_jobs == 1:
        cells = [_run_cell(config, *task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_cell, config, *task) for task in tasks]
            cells = [f.result() for f in futures]

    method_order = {m.id: i for i, m in enumerate(config.methods)}
    cells.sort(key=lambda c: (_FAMILY_CODES[c["family"]], c["rep"], method_order[c["method"]]))

    summary = []
    for family in config.families:
        for method in config.methods:
            rows = [c for c in cells if c["family"] == family and c["method"] == method.id]
            scored = [c for c in rows if c["error"] is None and not c["degenerate"]]
            failed = [c for c in rows if c["error"] is not None]
            summary.append({
                "family": family,
                "method": method.id,
                "precision": float(np.mean([c["precision"] for c in scored])) if scored else float("nan"),
                "n_datasets": len(scored),
                "n_failed": len(failed),
                "tolerance": config.tolerance,
                "seeds": [c["dataset_seed"] for c in rows],
                "mean_feature_seconds": float(np.mean([c["feature_seconds"] for c in scored])) if scored else float("nan"),
                "mean_segment_seconds": float(np.mean([c["segment_seconds"] for c in scored])) if scored else float("nan"),
                "mean_total_seconds": float(np.mean([c["total_seconds"] for c in scored])) if scored else float("nan"),
            })

    return BenchmarkReport(config=_config_dict(config), cells=cells, summary=summary)
