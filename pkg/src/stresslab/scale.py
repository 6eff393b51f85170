"""PSS-14 scale definition, scoring, and label derivation.

The scale is data, not code: :class:`ScaleDefinition` carries the item
partition and thresholds, with the published PSS-14 values as defaults, so
variant scales can be loaded from a JSON file without code changes. Scores
are integers throughout; all types are immutable and every operation is a
pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError

DEFAULT_REVERSE_ITEMS = frozenset({4, 5, 6, 7, 9, 10, 13})
DEFAULT_FACTOR1_ITEMS = frozenset({4, 5, 6, 8, 9, 10, 13})
DEFAULT_FACTOR2_ITEMS = frozenset({1, 2, 3, 7, 11, 12, 14})

COMPARISON_MODES = ("strict", "inclusive")


@dataclass(frozen=True)
class ScaleDefinition:
    """Item partition and label thresholds for a perceived-stress scale.

    ``comparison_mode`` selects how thresholds turn scores into labels:
    ``"strict"`` marks a label positive when the score is strictly above the
    threshold, ``"inclusive"`` when it is at or above. Strict is the default;
    the convention is a documented assumption, not part of the scale itself.
    """

    item_count: int = 14
    max_item_value: int = 4
    reverse_items: frozenset[int] = DEFAULT_REVERSE_ITEMS
    factor1_items: frozenset[int] = DEFAULT_FACTOR1_ITEMS
    factor2_items: frozenset[int] = DEFAULT_FACTOR2_ITEMS
    stress_threshold: int = 28
    factor_threshold: int = 14
    comparison_mode: str = "strict"

    def __post_init__(self) -> None:
        if self.item_count < 1:
            raise ValidationError(f"item_count must be positive, got {self.item_count}")
        if self.max_item_value < 1:
            raise ValidationError(f"max_item_value must be positive, got {self.max_item_value}")
        all_items = frozenset(range(1, self.item_count + 1))
        if self.factor1_items & self.factor2_items:
            raise ValidationError(
                "factor1_items and factor2_items must be disjoint; both contain "
                f"{sorted(self.factor1_items & self.factor2_items)}"
            )
        if self.factor1_items | self.factor2_items != all_items:
            raise ValidationError(
                "factor1_items and factor2_items must partition "
                f"1..{self.item_count}"
            )
        if not self.reverse_items <= all_items:
            raise ValidationError(
                f"reverse_items outside 1..{self.item_count}: "
                f"{sorted(self.reverse_items - all_items)}"
            )
        if self.comparison_mode not in COMPARISON_MODES:
            raise ValidationError(
                f"comparison_mode must be one of {COMPARISON_MODES}, got {self.comparison_mode!r}"
            )

    @property
    def max_total(self) -> int:
        return self.item_count * self.max_item_value

    def factor_items(self, which: int) -> frozenset[int]:
        if which == 1:
            return self.factor1_items
        if which == 2:
            return self.factor2_items
        raise ValidationError(f"which must be 1 or 2, got {which}")

    def max_factor(self, which: int) -> int:
        return len(self.factor_items(which)) * self.max_item_value

    def to_dict(self) -> dict:
        return {
            "item_count": self.item_count,
            "max_item_value": self.max_item_value,
            "reverse_items": sorted(self.reverse_items),
            "factor1_items": sorted(self.factor1_items),
            "factor2_items": sorted(self.factor2_items),
            "stress_threshold": self.stress_threshold,
            "factor_threshold": self.factor_threshold,
            "comparison_mode": self.comparison_mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScaleDefinition":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        for field in ("reverse_items", "factor1_items", "factor2_items"):
            if field in known:
                known[field] = frozenset(int(v) for v in known[field])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown scale fields: {sorted(unknown)}")
        return cls(**known)


DEFAULT_SCALE = ScaleDefinition()


def load_scale(path: str | Path) -> ScaleDefinition:
    """Load a scale definition from a flat JSON document."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid scale file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"scale file {path} must contain a JSON object")
    return ScaleDefinition.from_dict(data)


def save_scale(scale: ScaleDefinition, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scale.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class ResponseSheet:
    """One respondent's raw Likert answers, item order, pre-reversal."""

    answers: tuple[int, ...]

    def findings(self, scale: ScaleDefinition) -> list[str]:
        """All invariant violations of this sheet against ``scale``."""
        out = []
        if len(self.answers) != scale.item_count:
            out.append(f"expected {scale.item_count} answers, got {len(self.answers)}")
            return out
        for i, value in enumerate(self.answers, start=1):
            if not isinstance(value, int) or isinstance(value, bool):
                out.append(f"answer for item {i} is not an integer: {value!r}")
            elif not 0 <= value <= scale.max_item_value:
                out.append(
                    f"answer for item {i} out of range [0,{scale.max_item_value}]: {value}"
                )
        return out


@dataclass(frozen=True)
class LabelTriple:
    """Binary stress / factor-1 / factor-2 labels."""

    stress: int
    factor1: int
    factor2: int

    def __post_init__(self) -> None:
        for name in ("stress", "factor1", "factor2"):
            if getattr(self, name) not in (0, 1):
                raise ValidationError(f"{name} label must be 0 or 1, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.stress, self.factor1, self.factor2)


@dataclass(frozen=True)
class ScoredRecord:
    """Total and factor scores for one sheet, plus its derived labels.

    The factors partition the items, so the factor scores always sum to the
    total.
    """

    total_score: int
    factor1_score: int
    factor2_score: int
    labels: LabelTriple

    def __post_init__(self) -> None:
        if self.total_score != self.factor1_score + self.factor2_score:
            raise ValidationError(
                f"total_score {self.total_score} != factor1_score {self.factor1_score} "
                f"+ factor2_score {self.factor2_score}"
            )


def _check_sheet(scale: ScaleDefinition, sheet: ResponseSheet) -> None:
    findings = sheet.findings(scale)
    if findings:
        raise ValidationError(f"invalid answers: {'; '.join(findings)}")


def item_score(scale: ScaleDefinition, item_index: int, raw: int) -> int:
    """Score of a single item: ``raw``, or ``max - raw`` for reversed items."""
    if not 1 <= item_index <= scale.item_count:
        raise ValidationError(
            f"item_index out of range [1,{scale.item_count}]: {item_index}"
        )
    if not 0 <= raw <= scale.max_item_value:
        raise ValidationError(f"raw out of range [0,{scale.max_item_value}]: {raw}")
    if item_index in scale.reverse_items:
        return scale.max_item_value - raw
    return raw


def total_score(scale: ScaleDefinition, sheet: ResponseSheet) -> int:
    """Sum of item scores over the whole sheet."""
    _check_sheet(scale, sheet)
    return sum(
        item_score(scale, i, raw) for i, raw in enumerate(sheet.answers, start=1)
    )


def factor_score(scale: ScaleDefinition, sheet: ResponseSheet, which: int) -> int:
    """Sum of item scores over factor ``which`` (1 or 2)."""
    items = scale.factor_items(which)
    _check_sheet(scale, sheet)
    return sum(item_score(scale, i, sheet.answers[i - 1]) for i in sorted(items))


def derive_labels(scale: ScaleDefinition, total: int, f1: int, f2: int) -> LabelTriple:
    """Threshold the three scores into binary labels.

    Strict mode: positive iff score > threshold. Inclusive mode: >=.
    """
    if not 0 <= total <= scale.max_total:
        raise ValidationError(f"total out of range [0,{scale.max_total}]: {total}")
    if not 0 <= f1 <= scale.max_factor(1):
        raise ValidationError(f"f1 out of range [0,{scale.max_factor(1)}]: {f1}")
    if not 0 <= f2 <= scale.max_factor(2):
        raise ValidationError(f"f2 out of range [0,{scale.max_factor(2)}]: {f2}")
    if scale.comparison_mode == "strict":
        return LabelTriple(
            int(total > scale.stress_threshold),
            int(f1 > scale.factor_threshold),
            int(f2 > scale.factor_threshold),
        )
    return LabelTriple(
        int(total >= scale.stress_threshold),
        int(f1 >= scale.factor_threshold),
        int(f2 >= scale.factor_threshold),
    )


def score_sheet(scale: ScaleDefinition, sheet: ResponseSheet) -> ScoredRecord:
    """Score one sheet and derive its labels."""
    total = total_score(scale, sheet)
    f1 = factor_score(scale, sheet, 1)
    f2 = factor_score(scale, sheet, 2)
    return ScoredRecord(total, f1, f2, derive_labels(scale, total, f1, f2))


def score_dataset(
    scale: ScaleDefinition, sheets: Iterable[ResponseSheet]
) -> tuple[ScoredRecord, ...]:
    """Score every sheet, preserving order.

    Invalid sheets are reported together, one entry per offending sheet,
    indexed by position in the input sequence.
    """
    sheets = tuple(sheets)
    problems = []
    for idx, sheet in enumerate(sheets):
        for finding in sheet.findings(scale):
            problems.append(f"sheet {idx}: {finding}")
    if problems:
        raise ValidationError("; ".join(problems))
    return tuple(score_sheet(scale, sheet) for sheet in sheets)


def sheets_from_rows(rows: Sequence[Sequence[int]]) -> tuple[ResponseSheet, ...]:
    """Convenience constructor used by ingest and tests."""
    return tuple(ResponseSheet(tuple(int(v) for v in row)) for row in rows)
