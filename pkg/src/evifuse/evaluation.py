"""Grouped evaluation, JSON reports, and seeded experiment pipelines.

An evaluation slices the test set into groups (all, normal, conflictive, and
one group per conflict kind), computes accuracy, uncertainty, reliability and
inter-view conflict per group, and attaches a 50-bin uncertainty histogram
plus per-instance records. Reports serialize to JSON with a schema version so
downstream tooling can detect drift.

``run_experiment`` drives one full pipeline: build or load data, split,
standardize with training statistics, inject conflicts into the test half,
train, evaluate. ``multi_run`` repeats it over consecutive seeds and
aggregates mean and spread per metric.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .config import RunConfig
from .data import (
    NOISE_VIEW,
    UNALIGNED_VIEW,
    MultiViewDataset,
    apply_scaler,
    fit_scaler,
    generate_synthetic,
    inject_noise_views,
    inject_unaligned_views,
    load_csv,
    split,
)
from .network import EvidentialNet, TrainTrace

__all__ = [
    "SCHEMA_VERSION",
    "HISTOGRAM_BINS",
    "EvalReport",
    "RunResult",
    "mean_pairwise_conflict",
    "evaluate",
    "export_report",
    "load_report",
    "run_experiment",
    "multi_run",
]

SCHEMA_VERSION = 1
HISTOGRAM_BINS = 50


def mean_pairwise_conflict(alphas: np.ndarray) -> np.ndarray:
    """Mean conflictive degree over view pairs, one value per instance.

    Parameters
    ----------
    alphas : ndarray, shape (V, N, K)
        Per-view Dirichlet parameters.

    Returns
    -------
    ndarray, shape (N,)
        Zeros when V == 1 (no pairs to disagree).
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    v, n, k = alphas.shape
    if v < 2:
        return np.zeros(n)
    strength = alphas.sum(axis=-1)
    # uniform base rates make the projected probability alpha / S
    probs = alphas / strength[..., None]
    unc = k / strength
    total = np.zeros(n)
    for i in range(v):
        for j in range(i + 1, v):
            c_p = 0.5 * np.abs(probs[i] - probs[j]).sum(axis=-1)
            total += c_p * (1.0 - unc[i]) * (1.0 - unc[j])
    return total / (v * (v - 1) / 2)


def _histogram(values: np.ndarray) -> dict:
    densities, edges = np.histogram(
        values, bins=HISTOGRAM_BINS, range=(0.0, 1.0), density=True
    )
    return {
        "bin_edges": [float(e) for e in edges],
        "densities": [float(d) for d in densities],
    }


def _group_stats(mask, correct, uncertainty, reliability, conflict) -> dict:
    return {
        "count": int(mask.sum()),
        "accuracy": float(correct[mask].mean()),
        "mean_uncertainty": float(uncertainty[mask].mean()),
        "mean_reliability": float(reliability[mask].mean()),
        "mean_pairwise_conflict": float(conflict[mask].mean()),
        "uncertainty_histogram": _histogram(uncertainty[mask]),
    }


@dataclass(frozen=True)
class EvalReport:
    """Grouped test-set metrics plus per-instance records.

    ``accuracy_normal`` and ``accuracy_conflictive`` are None when the
    corresponding group is empty; ``group_stats`` then simply lacks that
    group. Group keys are ``all``, ``normal``, ``conflictive`` and the
    individual conflict kinds present in the data.
    """

    n_instances: int
    accuracy: float
    accuracy_normal: float | None
    accuracy_conflictive: float | None
    group_stats: dict
    records: list
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "n_instances": self.n_instances,
            "accuracy": self.accuracy,
            "accuracy_normal": self.accuracy_normal,
            "accuracy_conflictive": self.accuracy_conflictive,
            "group_stats": self.group_stats,
            "records": self.records,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version: {version!r}")
        return cls(
            n_instances=int(payload["n_instances"]),
            accuracy=float(payload["accuracy"]),
            accuracy_normal=_opt_float(payload["accuracy_normal"]),
            accuracy_conflictive=_opt_float(payload["accuracy_conflictive"]),
            group_stats=payload["group_stats"],
            records=payload["records"],
        )


def _opt_float(value):
    return None if value is None else float(value)


def evaluate(net: EvidentialNet, dataset: MultiViewDataset) -> EvalReport:
    """Score a trained network on a (possibly conflict-injected) dataset.

    Raises
    ------
    ValueError
        On an empty dataset, or a view/class shape the network was not
        built for.
    """
    if dataset.n_instances == 0:
        raise ValueError("cannot evaluate an empty dataset")
    alphas = net.alphas(dataset.views)
    v, n, k = alphas.shape
    fused = alphas.mean(axis=0)
    strength = fused.sum(axis=1)
    uncertainty = k / strength
    reliability = 1.0 - uncertainty
    predictions = fused.argmax(axis=1)
    labels = dataset.class_ids
    correct = predictions == labels
    conflict = mean_pairwise_conflict(alphas)

    kinds = np.array([t.kind for t in dataset.tags])
    conflictive = np.array([t.is_conflictive for t in dataset.tags])

    masks = {
        "all": np.ones(n, dtype=bool),
        "normal": ~conflictive,
        "conflictive": conflictive,
    }
    for kind in (NOISE_VIEW, UNALIGNED_VIEW):
        masks[kind] = kinds == kind
    group_stats = {
        name: _group_stats(mask, correct, uncertainty, reliability, conflict)
        for name, mask in masks.items()
        if mask.any()
    }

    records = []
    for i in range(n):
        tag = dataset.tags[i]
        records.append(
            {
                "index": i,
                "label": int(labels[i]),
                "prediction": int(predictions[i]),
                "correct": bool(correct[i]),
                "uncertainty": float(uncertainty[i]),
                "reliability": float(reliability[i]),
                "mean_pairwise_conflict": float(conflict[i]),
                "tag": {
                    "kind": tag.kind,
                    "view": None if tag.view is None else int(tag.view),
                    "sigma": None if tag.sigma is None else float(tag.sigma),
                },
            }
        )

    def _group_accuracy(name):
        stats = group_stats.get(name)
        return None if stats is None else stats["accuracy"]

    return EvalReport(
        n_instances=n,
        accuracy=float(correct.mean()),
        accuracy_normal=_group_accuracy("normal"),
        accuracy_conflictive=_group_accuracy("conflictive"),
        group_stats=group_stats,
        records=records,
    )


def export_report(report: EvalReport, path) -> None:
    """Write a report as deterministic JSON (sorted keys)."""
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> EvalReport:
    with open(path) as fh:
        return EvalReport.from_dict(json.load(fh))


# ----------------------------------------------------------------------
# Experiment pipeline
# ----------------------------------------------------------------------


@dataclass
class RunResult:
    """Everything one pipeline run produced."""

    config: RunConfig
    net: EvidentialNet
    scaler: tuple
    train_set: MultiViewDataset
    test_set: MultiViewDataset
    trace: TrainTrace
    report: EvalReport


def run_experiment(config: RunConfig, seed_override: int | None = None) -> RunResult:
    """One full run: data, split, standardize, inject, train, evaluate.

    Standardization statistics come from the training half only and are
    applied to both halves before any conflict injection, so injected noise
    scales live in standardized feature units.

    ``seed_override`` swaps the seed while keeping everything else; used by
    ``multi_run``.
    """
    cfg = config if seed_override is None else config.with_overrides(seed=int(seed_override))
    if cfg.data == "synthetic":
        full = generate_synthetic(
            cfg.views, cfg.classes, cfg.instances, cfg.view_dims(), cfg.separation, cfg.seed
        )
    else:
        # geometry keys (views/classes/instances/dim/separation) are ignored:
        # the files define them
        full = load_csv(cfg.data_dir)
    train_set, test_set = split(full, cfg.split_spec())
    scaler = fit_scaler(train_set)
    train_set = apply_scaler(train_set, scaler)
    test_set = apply_scaler(test_set, scaler)
    if cfg.noise_fraction > 0.0:
        test_set = inject_noise_views(test_set, cfg.noise_fraction, cfg.noise_sigma, cfg.seed)
    if cfg.unaligned_fraction > 0.0:
        test_set = inject_unaligned_views(test_set, cfg.unaligned_fraction, cfg.seed)

    view_dims = tuple(mat.shape[1] for mat in train_set.views)
    net = EvidentialNet(cfg.net_config(view_dims, train_set.n_classes))
    trace = net.train(train_set, cfg.loss_config())
    report = evaluate(net, test_set)
    return RunResult(
        config=cfg,
        net=net,
        scaler=scaler,
        train_set=train_set,
        test_set=test_set,
        trace=trace,
        report=report,
    )


_AGGREGATE_STATS = (
    "accuracy",
    "mean_uncertainty",
    "mean_reliability",
    "mean_pairwise_conflict",
)


def multi_run(config: RunConfig, n_runs: int | None = None):
    """Repeat ``run_experiment`` over consecutive seeds and summarize.

    Runs use seeds ``config.seed .. config.seed + R - 1``, so a single run
    with the base seed reproduces the first entry exactly.

    Returns
    -------
    (results, aggregate)
        ``results`` is the list of per-seed RunResult. ``aggregate`` maps
        ``<group>.<stat>`` to mean / std / values over the runs that had
        that group, plus the overall accuracy.
    """
    r = config.runs if n_runs is None else int(n_runs)
    if r < 1:
        raise ValueError("need at least one run")
    results = [run_experiment(config, seed_override=config.seed + i) for i in range(r)]
    reports = [res.report for res in results]

    metrics = {"accuracy": [rep.accuracy for rep in reports]}
    group_names = sorted({name for rep in reports for name in rep.group_stats})
    for group in group_names:
        for stat in _AGGREGATE_STATS:
            values = [
                rep.group_stats[group][stat] for rep in reports if group in rep.group_stats
            ]
            if values:
                metrics[f"{group}.{stat}"] = values
    aggregate = {
        "schema_version": SCHEMA_VERSION,
        "runs": r,
        "seeds": [res.config.seed for res in results],
        "metrics": {
            name: {
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
                "values": [float(v) for v in values],
            }
            for name, values in metrics.items()
        },
    }
    return results, aggregate
