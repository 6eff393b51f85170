"""Report outputs: aggregate tables, delimited files, manifest, SVG figures.

Figures are rendered with matplotlib's Agg backend and saved as SVG with a
fixed hash salt and no creation date, so identical report data produces
byte-identical files. Numbers in tables are percentages with two decimals,
shown as "mean ± std".
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import ValidationError  # noqa: E402
from .evaluate import ExperimentReport, LABEL_NAMES  # noqa: E402

import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "stresslab"

_SVG_METADATA = {"Date": None}


def format_mean_std(mean: float, std: float) -> str:
    """Percent with two decimals, e.g. 0.9253 ± 0.0507 -> '92.53 ± 5.07'."""
    return f"{100.0 * mean:.2f} ± {100.0 * std:.2f}"


def _float_repr(value: float) -> str:
    return f"{value:.12g}"


# ------------------------------------------------------------------ importance


@dataclass(frozen=True)
class ImportanceSummary:
    """Per-model importance means/stds over seeds plus the global ranking."""

    model_ids: tuple[str, ...]
    question_ids: tuple[str, ...]
    per_model_mean: dict[str, np.ndarray]
    per_model_std: dict[str, np.ndarray]
    global_mean: np.ndarray
    ranking: tuple[str, ...]
    top_set: tuple[str, ...]
    bottom_set: tuple[str, ...]

    @classmethod
    def build(
        cls,
        per_model_mean: dict[str, np.ndarray],
        per_model_std: dict[str, np.ndarray],
        head_size: int = 4,
    ) -> "ImportanceSummary":
        model_ids = tuple(per_model_mean)
        n_questions = len(next(iter(per_model_mean.values())))
        question_ids = tuple(f"Q{i}" for i in range(1, n_questions + 1))
        global_mean = np.mean([per_model_mean[m] for m in model_ids], axis=0)
        order = sorted(range(n_questions), key=lambda i: (-global_mean[i], i))
        ranking = tuple(question_ids[i] for i in order)
        head = min(head_size, n_questions)
        return cls(
            model_ids=model_ids,
            question_ids=question_ids,
            per_model_mean={m: np.asarray(v, dtype=float) for m, v in per_model_mean.items()},
            per_model_std={m: np.asarray(v, dtype=float) for m, v in per_model_std.items()},
            global_mean=global_mean,
            ranking=ranking,
            top_set=ranking[:head],
            bottom_set=tuple(reversed(ranking[-head:])),
        )


def build_importance_summary(report: ExperimentReport) -> ImportanceSummary:
    """Aggregate each model's per-seed mean-over-labels importance vectors."""
    means, stds = {}, {}
    for model_id in report.model_ids:
        vectors = np.stack([c.importance_mean for c in report.cells_for(model_id)])
        means[model_id] = vectors.mean(axis=0)
        stds[model_id] = vectors.std(axis=0, ddof=1) if len(vectors) > 1 else np.zeros(
            vectors.shape[1]
        )
    return ImportanceSummary.build(means, stds)


def rank_questions(summary: ImportanceSummary, k: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Top-k (most important first) and bottom-k (least important first).

    Both views read off one global ranking by cross-model mean importance,
    ties broken by the lower question id.
    """
    n = len(summary.question_ids)
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1,{n}], got {k}")
    return summary.ranking[:k], tuple(reversed(summary.ranking[-k:]))


# ------------------------------------------------------------ delimited files


def write_aggregate_csv(report: ExperimentReport, path: str | Path) -> None:
    """One row per model: 'mean ± std' percent strings per metric."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "precision", "recall", "f1"])
        for model_id, mean, std in report.aggregate_rows():
            writer.writerow(
                [
                    model_id,
                    format_mean_std(mean.precision, std.precision),
                    format_mean_std(mean.recall, std.recall),
                    format_mean_std(mean.f1, std.f1),
                ]
            )


def write_flat_csv(report: ExperimentReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "seed", "label", "metric", "value"])
        for model, seed, label, metric, value in report.flat_rows():
            writer.writerow([model, seed, label, metric, _float_repr(value)])


def write_confusion_csv(report: ExperimentReport, model_id: str, path: str | Path) -> None:
    cells = report.cells_for(model_id)
    if not cells:
        raise ValidationError(f"no cells for model {model_id!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "seed", "label", "tp", "fp", "fn", "tn"])
        for cell in cells:
            for le in cell.labels:
                writer.writerow(
                    [model_id, cell.seed, le.label, le.cm.tp, le.cm.fp, le.cm.fn, le.cm.tn]
                )


def write_importance_csv(summary: ImportanceSummary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "question", "mean", "std"])
        for model_id in summary.model_ids:
            for i, question in enumerate(summary.question_ids):
                writer.writerow(
                    [
                        model_id,
                        question,
                        _float_repr(summary.per_model_mean[model_id][i]),
                        _float_repr(summary.per_model_std[model_id][i]),
                    ]
                )


def load_importance_csv(path: str | Path) -> ImportanceSummary:
    """Rebuild an ImportanceSummary from a file written by write_importance_csv."""
    means: dict[str, dict[str, float]] = {}
    stds: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "question", "mean", "std"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"{path} is not an importance CSV (columns {reader.fieldnames})")
        for row in reader:
            means.setdefault(row["model"], {})[row["question"]] = float(row["mean"])
            stds.setdefault(row["model"], {})[row["question"]] = float(row["std"])
    if not means:
        raise ValidationError(f"{path} contains no importance rows")
    questions = sorted(next(iter(means.values())), key=lambda q: int(q[1:]))
    per_model_mean = {
        m: np.array([by_q[q] for q in questions]) for m, by_q in means.items()
    }
    per_model_std = {m: np.array([stds[m][q] for q in questions]) for m in means}
    return ImportanceSummary.build(per_model_mean, per_model_std)


def write_report_json(report: ExperimentReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


# -------------------------------------------------------------------- markdown


def results_markdown(report: ExperimentReport) -> str:
    summary = build_importance_summary(report)
    lines = [
        "# Experiment results",
        "",
        f"- samples: {report.n_samples}, features: {report.n_features}",
        f"- models: {', '.join(report.model_ids)}",
        f"- seeds: {', '.join(str(s) for s in report.seeds)}, "
        f"test fraction {report.test_fraction}, stratified on {report.stratify_on}",
        "",
        "Assumptions:",
    ]
    lines += [f"- {a}" for a in report.assumptions]
    lines += [
        "",
        "## Macro metrics over seeds (percent, mean ± std)",
        "",
        "| Model | Precision | Recall | F1 |",
        "| --- | --- | --- | --- |",
    ]
    for model_id, mean, std in report.aggregate_rows():
        lines.append(
            f"| {model_id} | {format_mean_std(mean.precision, std.precision)} "
            f"| {format_mean_std(mean.recall, std.recall)} "
            f"| {format_mean_std(mean.f1, std.f1)} |"
        )
    top, bottom = rank_questions(summary, min(4, len(summary.question_ids)))
    lines += [
        "",
        "## Question importance (cross-model mean)",
        "",
        f"- most informative: {', '.join(top)}",
        f"- least informative: {', '.join(bottom)}",
        "",
    ]
    return "\n".join(lines)


# -------------------------------------------------------------------- manifest


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def write_manifest(manifest: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


# --------------------------------------------------------------------- figures


def render_importance_svg(summary: ImportanceSummary, path: str | Path) -> None:
    """Per-model bar charts of mean question importance with std error bars."""
    n_models = len(summary.model_ids)
    ncols = min(3, n_models)
    nrows = (n_models + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.2 * ncols, 2.9 * nrows), squeeze=False, sharey=True
    )
    x = np.arange(len(summary.question_ids))
    for idx, model_id in enumerate(summary.model_ids):
        ax = axes[idx // ncols][idx % ncols]
        ax.bar(
            x,
            summary.per_model_mean[model_id],
            yerr=summary.per_model_std[model_id],
            color="#4878a8",
            error_kw={"elinewidth": 0.8},
        )
        ax.set_title(model_id)
        ax.set_xticks(x)
        ax.set_xticklabels(summary.question_ids, rotation=90, fontsize=7)
        ax.tick_params(axis="y", labelsize=7)
    for idx in range(n_models, nrows * ncols):
        axes[idx // ncols][idx % ncols].set_axis_off()
    fig.suptitle("Mean question importance over seeds", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.95))
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def render_confusion_svg(report: ExperimentReport, model_id: str, path: str | Path) -> None:
    """Grid of annotated 2x2 confusion matrices: labels as rows, seeds as columns."""
    cells = report.cells_for(model_id)
    if not cells:
        raise ValidationError(f"no cells for model {model_id!r}")
    nrows, ncols = len(LABEL_NAMES), len(cells)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(1.9 * ncols, 1.9 * nrows), squeeze=False
    )
    vmax = max(le.cm.total for cell in cells for le in cell.labels)
    for col, cell in enumerate(cells):
        for row, le in enumerate(cell.labels):
            ax = axes[row][col]
            matrix = np.array([[le.cm.tn, le.cm.fp], [le.cm.fn, le.cm.tp]])
            ax.imshow(matrix, cmap="Blues", vmin=0, vmax=vmax)
            for i in range(2):
                for j in range(2):
                    shade = "white" if matrix[i, j] > 0.6 * vmax else "black"
                    ax.text(j, i, str(matrix[i, j]), ha="center", va="center",
                            color=shade, fontsize=9)
            ax.set_xticks([0, 1])
            ax.set_yticks([0, 1])
            ax.set_xticklabels(["0", "1"], fontsize=7)
            ax.set_yticklabels(["0", "1"], fontsize=7)
            if row == 0:
                ax.set_title(f"seed {cell.seed}", fontsize=9)
            if col == 0:
                ax.set_ylabel(le.label, fontsize=9)
    fig.suptitle(f"{model_id}: confusion matrices (rows true, columns predicted)", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
