"""Repeated random-split evaluation: stratified splits, confusion matrices,
macro metrics, and the (model x seed) experiment grid.

Conventions, surfaced in every report: test fraction defaults to 0.2
(an assumed 80/20 split), splits are stratified on the stress label, any
0/0 metric ratio counts as 0, and macro averaging runs per class within a
label first, then unweighted over the three labels.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ExperimentError, ValidationError
from .ensembles import ModelSpec, fit_multioutput
from .trees import as_feature_matrix

logger = logging.getLogger(__name__)

LABEL_NAMES = ("stress", "factor1", "factor2")
METRIC_NAMES = ("macro_precision", "macro_recall", "macro_f1")


@dataclass(frozen=True)
class SplitSpec:
    """Repeated random subsampling protocol."""

    test_fraction: float = 0.2
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    stratify_on: str = "stress"

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError(
                f"test_fraction must be in (0,1), got {self.test_fraction}"
            )
        if not self.seeds:
            raise ValidationError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError(f"seeds must be distinct, got {self.seeds}")
        if self.stratify_on not in LABEL_NAMES:
            raise ValidationError(
                f"stratify_on must be one of {LABEL_NAMES}, got {self.stratify_on!r}"
            )


def split(labels: np.ndarray, seed: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, covering (train, test) index arrays, deterministic in seed.

    Test size is round(test_fraction * n). Within each stratum of the
    stratify_on label the test share deviates from test_fraction by at most
    one sample (largest-remainder allocation).
    """
    Y = np.asarray(labels)
    if Y.ndim != 2 or Y.shape[1] != len(LABEL_NAMES):
        raise ValidationError(f"labels must have shape (n, 3), got {Y.shape}")
    n = Y.shape[0]
    if n < 10:
        raise ValidationError(f"dataset must have at least 10 rows, got {n}")
    column = Y[:, LABEL_NAMES.index(spec.stratify_on)]
    n_test = int(np.round(spec.test_fraction * n))

    strata = sorted(int(v) for v in np.unique(column))
    sizes = {v: int((column == v).sum()) for v in strata}
    for v in strata:
        if sizes[v] < 2:
            raise ValidationError(
                f"stratum {spec.stratify_on}={v} has {sizes[v]} sample(s); need at least 2"
            )
    base = {v: int(np.floor(spec.test_fraction * sizes[v])) for v in strata}
    remainder = n_test - sum(base.values())
    by_fraction = sorted(
        strata, key=lambda v: (-(spec.test_fraction * sizes[v] - base[v]), v)
    )
    counts = dict(base)
    for v in by_fraction[:remainder]:
        counts[v] += 1

    rng = np.random.default_rng(seed)
    test_parts, train_parts = [], []
    for v in strata:
        members = np.flatnonzero(column == v)
        order = rng.permutation(members)
        test_parts.append(order[: counts[v]])
        train_parts.append(order[counts[v] :])
    test = np.sort(np.concatenate(test_parts))
    train = np.sort(np.concatenate(train_parts))
    return train, test


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts with class 1 as positive."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).astype(np.int64)
    p = np.asarray(y_pred).astype(np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError(
            f"y_true and y_pred must be 1-D of equal length, got {t.shape} and {p.shape}"
        )
    if t.size == 0:
        raise ValidationError("confusion of empty sequences")
    for name, arr in (("y_true", t), ("y_pred", p)):
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError(f"{name} must be binary (0/1)")
    return ConfusionMatrix(
        tp=int(((t == 1) & (p == 1)).sum()),
        fp=int(((t == 0) & (p == 1)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()),
        tn=int(((t == 0) & (p == 0)).sum()),
    )


class MacroMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0:
        logger.warning("macro metric %s is 0/0; treated as 0 by convention", what)
        return 0.0
    return num / den


def macro_metrics(cm: ConfusionMatrix) -> MacroMetrics:
    """Unweighted two-class mean of precision, recall, and F1.

    Class-0 quantities treat 0 as the positive class; any 0/0 ratio is 0.
    """
    per_class = []
    for positive in (0, 1):
        if positive == 1:
            tp, fp, fn = cm.tp, cm.fp, cm.fn
        else:
            tp, fp, fn = cm.tn, cm.fn, cm.fp
        per_class.append(
            (
                _ratio(tp, tp + fp, f"precision[class {positive}]"),
                _ratio(tp, tp + fn, f"recall[class {positive}]"),
                _ratio(2 * tp, 2 * tp + fp + fn, f"f1[class {positive}]"),
            )
        )
    (p0, r0, f0), (p1, r1, f1) = per_class
    return MacroMetrics((p0 + p1) / 2.0, (r0 + r1) / 2.0, (f0 + f1) / 2.0)


def multilabel_macro(per_label: Sequence[MacroMetrics]) -> MacroMetrics:
    """Unweighted mean of the three per-label metric triples."""
    if len(per_label) != len(LABEL_NAMES):
        raise ValidationError(
            f"expected {len(LABEL_NAMES)} per-label entries, got {len(per_label)}"
        )
    return MacroMetrics(
        float(np.mean([m.precision for m in per_label])),
        float(np.mean([m.recall for m in per_label])),
        float(np.mean([m.f1 for m in per_label])),
    )


@dataclass(frozen=True)
class LabelEval:
    label: str
    cm: ConfusionMatrix
    metrics: MacroMetrics


@dataclass(frozen=True)
class CellResult:
    """One (model, seed) evaluation."""

    model_id: str
    seed: int
    labels: tuple[LabelEval, ...]
    averaged: MacroMetrics
    importances: np.ndarray  # (3, n_features), one row per label model
    importance_mean: np.ndarray


@dataclass(frozen=True)
class ModelAggregate:
    model_id: str
    mean: MacroMetrics
    std: MacroMetrics


@dataclass(frozen=True)
class ExperimentReport:
    model_ids: tuple[str, ...]
    seeds: tuple[int, ...]
    test_fraction: float
    stratify_on: str
    n_samples: int
    n_features: int
    cells: tuple[CellResult, ...]
    aggregates: tuple[ModelAggregate, ...]
    assumptions: tuple[str, ...]

    def cells_for(self, model_id: str) -> tuple[CellResult, ...]:
        return tuple(c for c in self.cells if c.model_id == model_id)

    def flat_rows(self) -> list[tuple[str, int, str, str, float]]:
        """(model, seed, label, metric, value) records, label 'mean' included."""
        rows = []
        for cell in self.cells:
            entries = [(le.label, le.metrics) for le in cell.labels]
            entries.append(("mean", cell.averaged))
            for label, metrics in entries:
                for metric_name, value in zip(METRIC_NAMES, metrics):
                    rows.append((cell.model_id, cell.seed, label, metric_name, float(value)))
        return rows

    def aggregate_rows(self) -> list[tuple[str, MacroMetrics, MacroMetrics]]:
        return [(a.model_id, a.mean, a.std) for a in self.aggregates]

    def to_json_dict(self) -> dict:
        return {
            "model_ids": list(self.model_ids),
            "seeds": list(self.seeds),
            "test_fraction": self.test_fraction,
            "stratify_on": self.stratify_on,
            "n_samples": self.n_samples,
            "n_features": self.n_features,
            "assumptions": list(self.assumptions),
            "cells": [
                {
                    "model": cell.model_id,
                    "seed": cell.seed,
                    "labels": [
                        {
                            "label": le.label,
                            "confusion": le.cm.to_dict(),
                            "macro_precision": le.metrics.precision,
                            "macro_recall": le.metrics.recall,
                            "macro_f1": le.metrics.f1,
                        }
                        for le in cell.labels
                    ],
                    "label_mean": dict(zip(METRIC_NAMES, cell.averaged)),
                    "importances": [[float(v) for v in row] for row in cell.importances],
                }
                for cell in self.cells
            ],
            "aggregates": [
                {
                    "model": agg.model_id,
                    "mean": dict(zip(METRIC_NAMES, agg.mean)),
                    "std": dict(zip(METRIC_NAMES, agg.std)),
                }
                for agg in self.aggregates
            ],
        }


def _std_over_seeds(values: Sequence[float]) -> float:
    if len(values) > 1:
        return float(np.std(values, ddof=1))
    return 0.0


def run_experiment(
    features,
    labels,
    model_specs: Sequence[ModelSpec],
    split_spec: SplitSpec,
) -> ExperimentReport:
    """Evaluate every model over every seed on stratified random splits.

    Per cell: split, fit one multi-output model on the training rows, score
    the test rows per label, and record confusion matrices, macro metrics,
    their label mean, and per-label importance vectors. The split seed also
    seeds the fit, so the whole grid is a pure function of its inputs.
    """
    X = as_feature_matrix(features)
    Y = np.asarray(labels)
    if Y.shape != (X.shape[0], len(LABEL_NAMES)):
        raise ValidationError(
            f"labels must have shape ({X.shape[0]}, {len(LABEL_NAMES)}), got {Y.shape}"
        )
    if not model_specs:
        raise ValidationError("model_specs must be non-empty")

    cells = []
    aggregates = []
    for spec in model_specs:
        model_cells = []
        for seed in split_spec.seeds:
            try:
                train, test = split(Y, seed, split_spec)
                params = dataclasses.replace(spec.params, seed=seed)
                model = fit_multioutput(spec.kind, params, X[train], Y[train])
                pred = model.predict(X[test])
                label_evals = []
                for col, name in enumerate(LABEL_NAMES):
                    cm = confusion(Y[test][:, col], pred[:, col])
                    label_evals.append(LabelEval(name, cm, macro_metrics(cm)))
                importances = np.stack([m.importance for m in model.models])
                cell = CellResult(
                    model_id=spec.model_id,
                    seed=seed,
                    labels=tuple(label_evals),
                    averaged=multilabel_macro([le.metrics for le in label_evals]),
                    importances=importances,
                    importance_mean=importances.mean(axis=0),
                )
            except Exception as exc:
                raise ExperimentError(f"model {spec.model_id}, seed {seed}: {exc}") from exc
            model_cells.append(cell)
        cells.extend(model_cells)
        mean = MacroMetrics(
            float(np.mean([c.averaged.precision for c in model_cells])),
            float(np.mean([c.averaged.recall for c in model_cells])),
            float(np.mean([c.averaged.f1 for c in model_cells])),
        )
        std = MacroMetrics(
            _std_over_seeds([c.averaged.precision for c in model_cells]),
            _std_over_seeds([c.averaged.recall for c in model_cells]),
            _std_over_seeds([c.averaged.f1 for c in model_cells]),
        )
        aggregates.append(ModelAggregate(spec.model_id, mean, std))

    assumptions = (
        f"evaluation: repeated random subsampling over seeds {list(split_spec.seeds)}, "
        f"test fraction {split_spec.test_fraction} (assumed, not externally prescribed), "
        f"stratified on '{split_spec.stratify_on}'",
        "model hyperparameters: untuned library-style defaults unless overridden",
        "macro metrics: per-class mean within each label, then unweighted mean over the 3 labels",
        "0/0 metric ratios count as 0",
        "model ids: dt, rf, ada, gb, gb2; gb2 is gradient boosting with a regularized "
        "second-order split gain, standing in for dedicated second-order libraries",
    )
    return ExperimentReport(
        model_ids=tuple(s.model_id for s in model_specs),
        seeds=tuple(split_spec.seeds),
        test_fraction=split_spec.test_fraction,
        stratify_on=split_spec.stratify_on,
        n_samples=X.shape[0],
        n_features=X.shape[1],
        cells=tuple(cells),
        aggregates=tuple(aggregates),
        assumptions=assumptions,
    )
