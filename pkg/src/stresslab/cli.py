"""Command line interface: score | synth | run | rank.

Every flag falls back to an STRESSLAB_-prefixed environment variable
(e.g. STRESSLAB_OUT for --out), then to its built-in default. Exit codes:
0 success, 1 usage error, 2 data/validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .data import (
    DEFAULT_SYNTH_PROFILE,
    LABELS,
    LikertMapping,
    ScoredDataset,
    SummaryStats,
    SynthProfile,
    describe,
    load_profile,
    parse_csv,
    synth_generate,
    validate_dataset,
    write_csv,
)
from .ensembles import (
    ModelSpec,
    default_hyperparams,
    default_model_specs,
    _DEFAULTS as MODEL_CATALOG,
)
from .errors import StressLabError, ValidationError
from .evaluate import SplitSpec, run_experiment
from .report import (
    build_importance_summary,
    config_hash,
    format_mean_std,
    load_importance_csv,
    rank_questions,
    render_confusion_svg,
    render_importance_svg,
    results_markdown,
    write_aggregate_csv,
    write_confusion_csv,
    write_flat_csv,
    write_importance_csv,
    write_manifest,
    write_report_json,
)
from .scale import DEFAULT_SCALE, ScaleDefinition, load_scale, score_dataset
from .trees import HyperParams

ENV_PREFIX = "STRESSLAB_"
EMIT_KINDS = ("csv", "json", "markdown", "svg")
MANIFEST_FORMAT = 1


class UsageError(Exception):
    """Bad command line; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="stresslab",
        description=(
            "Score 14-item perceived-stress survey responses, generate synthetic "
            "cohorts, train tree-ensemble classifiers over repeated random splits, "
            "and write table/figure reports. Flags fall back to STRESSLAB_* "
            "environment variables (e.g. STRESSLAB_SCALE)."
        ),
        epilog=(
            "Documented defaults and assumptions: label thresholds compare strictly "
            "(score > threshold; switchable to inclusive in the scale file); the "
            "split protocol is repeated random subsampling with test fraction 0.2 "
            "over seeds 0..4, stratified on the stress label; model hyperparameters "
            "are untuned library-style defaults; gb2 is gradient boosting with a "
            "regularized second-order split gain. All randomness uses seeded PCG64."
        ),
    )
    parser.add_argument("--version", action="version", version=f"stresslab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_scale(p):
        p.add_argument(
            "--scale",
            default=_env("SCALE"),
            help="scale definition JSON (default: built-in PSS-14 definition)",
        )

    def add_mapping(p):
        p.add_argument(
            "--mapping",
            default=_env("MAPPING"),
            help="answer-text mapping JSON (default: built-in Turkish five-anchor mapping)",
        )

    p_score = sub.add_parser(
        "score", help="score a survey CSV and write the canonical dataset CSV"
    )
    add_scale(p_score)
    add_mapping(p_score)
    p_score.add_argument("--input", default=_env("INPUT"), help="survey export CSV")
    p_score.add_argument(
        "--out",
        default=_env("OUT"),
        help="canonical dataset CSV to write (q1..q14 + scores + labels)",
    )
    p_score.set_defaults(func=cmd_score)

    p_synth = sub.add_parser(
        "synth", help="generate a synthetic cohort and write the canonical dataset CSV"
    )
    add_scale(p_synth)
    p_synth.add_argument(
        "--profile",
        default=_env("PROFILE"),
        help="synthesis profile JSON (default: built-in 150-person profile, seed 7)",
    )
    p_synth.add_argument("--out", default=_env("OUT"), help="canonical dataset CSV to write")
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser(
        "run", help="run the full experiment grid and write the report bundle"
    )
    add_scale(p_run)
    add_mapping(p_run)
    p_run.add_argument("--input", default=_env("INPUT"), help="survey export CSV to train on")
    p_run.add_argument(
        "--profile",
        default=_env("PROFILE"),
        help="synthesis profile JSON (used when no --input; default: built-in profile)",
    )
    p_run.add_argument(
        "--config",
        default=None,
        help="rerun from a manifest.json written by a previous run (excludes other data flags)",
    )
    p_run.add_argument(
        "--models",
        default=_env("MODELS"),
        help=(
            "comma-separated model ids out of dt,rf,ada,gb,gb2 (default: all five), "
            "or a JSON file with per-model hyperparameter overrides"
        ),
    )
    p_run.add_argument(
        "--seeds",
        default=_env("SEEDS"),
        help="comma-separated split seeds (default: 0,1,2,3,4)",
    )
    p_run.add_argument(
        "--test-fraction",
        default=_env("TEST_FRACTION"),
        help="test fraction in (0,1) (default: 0.2, an assumed 80/20 split)",
    )
    p_run.add_argument(
        "--emit",
        default=_env("EMIT"),
        help=f"comma-separated outputs out of {','.join(EMIT_KINDS)} (default: all)",
    )
    p_run.add_argument("--out", default=_env("OUT"), help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_rank = sub.add_parser(
        "rank", help="rank questions from an importance.csv written by run"
    )
    p_rank.add_argument(
        "--importance", default=_env("IMPORTANCE"), help="importance.csv from a run"
    )
    p_rank.add_argument(
        "-k", type=int, default=4, help="how many top/bottom questions to list (default 4)"
    )
    p_rank.set_defaults(func=cmd_rank)

    return parser


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required (flag or {ENV_PREFIX}{flag.strip('-').upper().replace('-', '_')})")
    return value


def _load_scale_arg(path: str | None) -> ScaleDefinition:
    return load_scale(path) if path else DEFAULT_SCALE


def _load_mapping_arg(path: str | None) -> LikertMapping | None:
    return LikertMapping.from_json_file(path) if path else None


def _sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _print_summary(stats: SummaryStats) -> None:
    columns = (("total", stats.total), ("factor1", stats.factor1), ("factor2", stats.factor2))
    print(f"{'':>6}" + "".join(f"{name:>10}" for name, _ in columns))
    for row_label, attr in (
        ("count", "count"),
        ("mean", "mean"),
        ("std", "std"),
        ("min", "min"),
        ("25%", "p25"),
        ("50%", "p50"),
        ("75%", "p75"),
        ("max", "max"),
    ):
        cells = []
        for _, col in columns:
            value = getattr(col, attr)
            cells.append(f"{value:>10d}" if attr == "count" else f"{value:>10.2f}")
        print(f"{row_label:>6}" + "".join(cells))
    print()
    print("label counts (0 / 1):")
    for name in LABELS:
        zeros, ones = stats.label_counts[name]
        print(f"  {name:<8} {zeros} / {ones}")


# ------------------------------------------------------------------- commands


def cmd_score(args) -> int:
    scale = _load_scale_arg(args.scale)
    mapping = _load_mapping_arg(args.mapping)
    input_path = _require(args.input, "--input")
    out_path = _require(args.out, "--out")
    dataset = parse_csv(input_path, scale, mapping)
    records = score_dataset(scale, dataset.sheets)
    stats = describe(records)  # rejects empty datasets before any write
    write_csv(out_path, dataset, records, scale)
    _print_summary(stats)
    print(f"\nwrote {len(records)} scored rows to {out_path}")
    return 0


def cmd_synth(args) -> int:
    scale = _load_scale_arg(args.scale)
    profile = load_profile(args.profile) if args.profile else DEFAULT_SYNTH_PROFILE
    dataset = synth_generate(profile, scale)
    records = score_dataset(scale, dataset.sheets)
    write_csv(_require(args.out, "--out"), dataset, records, scale)
    print(f"wrote {len(records)} synthetic rows to {args.out} (seed {profile.seed})")
    return 0


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters; the manifest serializes exactly this."""

    scale: ScaleDefinition
    source: dict
    models: tuple[ModelSpec, ...]
    split: SplitSpec
    emit: tuple[str, ...]

    def to_config_dict(self) -> dict:
        return {
            "scale": self.scale.to_dict(),
            "source": self.source,
            "models": [
                {
                    "model_id": spec.model_id,
                    "kind": spec.kind,
                    "hyperparams": dataclasses.asdict(spec.params),
                }
                for spec in self.models
            ],
            "split": {
                "test_fraction": self.split.test_fraction,
                "seeds": list(self.split.seeds),
                "stratify_on": self.split.stratify_on,
            },
            "emit": list(self.emit),
        }

    def to_manifest(self) -> dict:
        config = self.to_config_dict()
        return {
            "artifact": {
                "name": "stresslab",
                "version": __version__,
                "manifest_format": MANIFEST_FORMAT,
            },
            "config": config,
            "config_hash": config_hash(config),
            "seeds": list(self.split.seeds),
        }

    @classmethod
    def from_config_dict(cls, config: dict) -> "RunConfig":
        models = tuple(
            ModelSpec(
                entry["model_id"], entry["kind"], HyperParams(**entry["hyperparams"])
            )
            for entry in config["models"]
        )
        split = SplitSpec(
            test_fraction=float(config["split"]["test_fraction"]),
            seeds=tuple(int(s) for s in config["split"]["seeds"]),
            stratify_on=config["split"]["stratify_on"],
        )
        return cls(
            scale=ScaleDefinition.from_dict(config["scale"]),
            source=config["source"],
            models=models,
            split=split,
            emit=tuple(config.get("emit", EMIT_KINDS)),
        )


def _parse_model_arg(models_arg: str | None) -> tuple[ModelSpec, ...]:
    if models_arg is None:
        return default_model_specs()
    if models_arg.endswith(".json") or os.path.exists(models_arg):
        with open(models_arg, encoding="utf-8") as fh:
            entries = json.load(fh)
        if not isinstance(entries, list):
            raise ValidationError(f"model file {models_arg} must contain a JSON array")
        specs = []
        for entry in entries:
            model_id = entry["model_id"]
            overrides = entry.get("hyperparams", {})
            if model_id in MODEL_CATALOG:
                kind = entry.get("kind", MODEL_CATALOG[model_id][0])
                params = default_hyperparams(model_id, **overrides)
            else:
                kind = entry["kind"]
                params = HyperParams(**overrides)
            specs.append(ModelSpec(model_id, kind, params))
        if not specs:
            raise ValidationError(f"model file {models_arg} lists no models")
        return tuple(specs)
    ids = tuple(part.strip() for part in models_arg.split(",") if part.strip())
    return default_model_specs(ids)


def _parse_emit_arg(emit_arg: str | None) -> tuple[str, ...]:
    if emit_arg is None:
        return EMIT_KINDS
    wanted = {part.strip() for part in emit_arg.split(",") if part.strip()}
    unknown = wanted - set(EMIT_KINDS)
    if unknown:
        raise ValidationError(
            f"unknown emit kind(s) {sorted(unknown)}; expected subset of {list(EMIT_KINDS)}"
        )
    return tuple(kind for kind in EMIT_KINDS if kind in wanted)


def _resolve_run_config(args) -> RunConfig:
    if args.config:
        conflicting = [
            flag
            for flag, value in (
                ("--input", args.input),
                ("--profile", args.profile),
                ("--models", args.models),
                ("--seeds", args.seeds),
                ("--test-fraction", args.test_fraction),
                ("--scale", args.scale),
            )
            if value is not None
        ]
        if conflicting:
            raise UsageError(f"--config cannot be combined with {', '.join(conflicting)}")
        with open(args.config, encoding="utf-8") as fh:
            manifest = json.load(fh)
        fmt = manifest.get("artifact", {}).get("manifest_format")
        if fmt != MANIFEST_FORMAT:
            raise ValidationError(f"unsupported manifest_format: {fmt!r}")
        return RunConfig.from_config_dict(manifest["config"])

    if args.input and args.profile:
        raise UsageError("use exactly one of --input or --profile")
    scale = _load_scale_arg(args.scale)
    if args.input:
        source = {
            "kind": "input",
            "path": str(args.input),
            "sha256": _sha256_file(args.input),
            "mapping": None
            if args.mapping is None
            else _load_mapping_arg(args.mapping).to_dict(),
        }
    else:
        profile = load_profile(args.profile) if args.profile else DEFAULT_SYNTH_PROFILE
        source = {"kind": "profile", "profile": profile.to_dict()}

    split_kwargs = {}
    if args.test_fraction is not None:
        try:
            split_kwargs["test_fraction"] = float(args.test_fraction)
        except ValueError:
            raise UsageError(f"--test-fraction must be a number, got {args.test_fraction!r}")
    if args.seeds is not None:
        try:
            split_kwargs["seeds"] = tuple(
                int(part) for part in str(args.seeds).split(",") if part.strip()
            )
        except ValueError:
            raise UsageError(f"--seeds must be comma-separated integers, got {args.seeds!r}")
    return RunConfig(
        scale=scale,
        source=source,
        models=_parse_model_arg(args.models),
        split=SplitSpec(**split_kwargs),
        emit=_parse_emit_arg(args.emit),
    )


def _load_run_dataset(config: RunConfig) -> ScoredDataset:
    if config.source["kind"] == "profile":
        dataset = synth_generate(SynthProfile.from_dict(config.source["profile"]), config.scale)
    elif config.source["kind"] == "input":
        path = config.source["path"]
        recorded = config.source.get("sha256")
        actual = _sha256_file(path)
        if recorded and recorded != actual:
            raise ValidationError(
                f"input file {path} changed since the manifest was written "
                f"(sha256 {actual} != {recorded})"
            )
        mapping_doc = config.source.get("mapping")
        mapping = LikertMapping.from_dict(mapping_doc) if mapping_doc else None
        dataset = parse_csv(path, config.scale, mapping)
    else:
        raise ValidationError(f"unknown source kind {config.source.get('kind')!r}")
    findings = validate_dataset(dataset, config.scale)
    if findings:
        raise ValidationError("; ".join(findings))
    return ScoredDataset.build(dataset, config.scale)


def cmd_run(args) -> int:
    config = _resolve_run_config(args)
    out_dir = Path(_require(args.out, "--out"))
    scored = _load_run_dataset(config)
    report = run_experiment(
        scored.feature_matrix(), scored.label_matrix(), config.models, config.split
    )
    summary = build_importance_summary(report)

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, writer):
        path = out_dir / name
        writer(path)
        written.append(name)

    emit("manifest.json", lambda p: write_manifest(config.to_manifest(), p))
    if "csv" in config.emit:
        emit("results.csv", lambda p: write_aggregate_csv(report, p))
        emit("results_flat.csv", lambda p: write_flat_csv(report, p))
        emit("importance.csv", lambda p: write_importance_csv(summary, p))
        for model_id in report.model_ids:
            emit(
                f"confusion_{model_id}.csv",
                lambda p, m=model_id: write_confusion_csv(report, m, p),
            )
    if "json" in config.emit:
        emit("report.json", lambda p: write_report_json(report, p))
    if "markdown" in config.emit:
        emit(
            "results.md",
            lambda p: p.write_text(results_markdown(report), encoding="utf-8"),
        )
    if "svg" in config.emit:
        emit("importance.svg", lambda p: render_importance_svg(summary, p))
        for model_id in report.model_ids:
            emit(
                f"confusion_{model_id}.svg",
                lambda p, m=model_id: render_confusion_svg(report, m, p),
            )

    print(f"{'model':<6} {'precision':>16} {'recall':>16} {'f1':>16}")
    for model_id, mean, std in report.aggregate_rows():
        print(
            f"{model_id:<6} {format_mean_std(mean.precision, std.precision):>16} "
            f"{format_mean_std(mean.recall, std.recall):>16} "
            f"{format_mean_std(mean.f1, std.f1):>16}"
        )
    print(f"\nwrote {len(written)} files to {out_dir}: {', '.join(written)}")
    return 0


def cmd_rank(args) -> int:
    summary = load_importance_csv(_require(args.importance, "--importance"))
    top, bottom = rank_questions(summary, args.k)
    value_of = dict(zip(summary.question_ids, summary.global_mean))
    print(f"top {args.k} questions by cross-model mean importance:")
    for rank, question in enumerate(top, start=1):
        print(f"  {rank}. {question:<4} {value_of[question]:.4f}")
    print(f"bottom {args.k} (least important first):")
    for rank, question in enumerate(bottom, start=1):
        print(f"  {rank}. {question:<4} {value_of[question]:.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            print("stresslab: a command is required (score | synth | run | rank)", file=sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except StressLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
