"""Ingest, descriptive statistics, and synthetic generation tests.

Expected values for describe() were computed by hand (sample std, linear
interpolation quantiles) before the implementation existed.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from stresslab.data import (
    DEFAULT_LIKERT_MAPPING,
    DEFAULT_SYNTH_PROFILE,
    ColumnLayout,
    Dataset,
    LikertMapping,
    ScoredDataset,
    SynthProfile,
    describe,
    load_profile,
    parse_csv,
    save_profile,
    synth_generate,
    validate_dataset,
    write_csv,
)
from stresslab.errors import ValidationError
from stresslab.scale import DEFAULT_SCALE, LabelTriple, ResponseSheet, ScoredRecord, score_dataset

ZERO_ROW = ",".join(["0"] * 14)


def make_csv(tmp_path, text, name="survey.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def record(total, f1, f2):
    return ScoredRecord(total, f1, f2, LabelTriple(int(total > 28), int(f1 > 14), int(f2 > 14)))


# ------------------------------------------------------------------ parse_csv


def test_parse_single_all_zero_row(tmp_path):
    header = ",".join(f"q{i}" for i in range(1, 15))
    path = make_csv(tmp_path, f"{header}\n{ZERO_ROW}\n")
    dataset = parse_csv(path, DEFAULT_SCALE)
    assert len(dataset.sheets) == 1
    assert dataset.sheets[0] == ResponseSheet((0,) * 14)
    assert dataset.row_provenance == (2,)


def test_parse_text_cells_via_mapping(tmp_path):
    header = ",".join(f"q{i}" for i in range(1, 15))
    row = ",".join(["hiçbir zaman"] * 7 + ["Çok sık"] * 7)
    path = make_csv(tmp_path, f"{header}\n{row}\n")
    dataset = parse_csv(path, DEFAULT_SCALE)
    assert dataset.sheets[0].answers == (0,) * 7 + (4,) * 7


def test_parse_out_of_range_numeric(tmp_path):
    header = ",".join(f"q{i}" for i in range(1, 15))
    row = "0,0,5," + ",".join(["0"] * 11)
    path = make_csv(tmp_path, f"{header}\n{row}\n")
    with pytest.raises(ValidationError, match=r"value out of range \[0,4\] at row 2, column q3"):
        parse_csv(path, DEFAULT_SCALE)


def test_parse_unknown_text(tmp_path):
    header = ",".join(f"q{i}" for i in range(1, 15))
    row = "0,sometimes," + ",".join(["0"] * 12)
    path = make_csv(tmp_path, f"{header}\n{row}\n")
    with pytest.raises(ValidationError, match="unknown answer text 'sometimes' at row 2, column q2"):
        parse_csv(path, DEFAULT_SCALE)


def test_parse_short_row(tmp_path):
    header = ",".join(f"q{i}" for i in range(1, 15))
    path = make_csv(tmp_path, f"{header}\n0,0,0\n")
    with pytest.raises(ValidationError, match="row 2"):
        parse_csv(path, DEFAULT_SCALE)


def test_parse_missing_column(tmp_path):
    header = ",".join(f"q{i}" for i in range(1, 14))  # q14 missing
    path = make_csv(tmp_path, f"{header}\n{','.join(['0'] * 13)}\n")
    with pytest.raises(ValidationError, match="q14"):
        parse_csv(path, DEFAULT_SCALE)


def test_parse_empty_file(tmp_path):
    path = make_csv(tmp_path, "")
    with pytest.raises(ValidationError, match="empty dataset"):
        parse_csv(path, DEFAULT_SCALE)


def test_parse_ignores_extra_columns_and_preserves_order(tmp_path):
    header = "timestamp," + ",".join(f"q{i}" for i in range(1, 15))
    rows = [f"2023-05-0{k}," + ",".join(str((k + j) % 5) for j in range(14)) for k in (1, 2, 3)]
    path = make_csv(tmp_path, header + "\n" + "\n".join(rows) + "\n")
    dataset = parse_csv(path, DEFAULT_SCALE)
    assert len(dataset.sheets) == 3
    assert dataset.sheets[0].answers[0] == 1
    assert dataset.sheets[2].answers[0] == 3
    assert dataset.row_provenance == (2, 3, 4)


def test_parse_custom_layout(tmp_path):
    cols = [f"soru {i}" for i in range(1, 15)]
    header = ",".join(cols)
    path = make_csv(tmp_path, f"{header}\n{ZERO_ROW}\n")
    dataset = parse_csv(path, DEFAULT_SCALE, layout=ColumnLayout(tuple(cols)))
    assert dataset.sheets[0].answers == (0,) * 14


def test_mapping_is_case_and_whitespace_insensitive():
    mapping = LikertMapping.from_dict({"Never": 0, "Always": 4})
    assert mapping.lookup("  never ") == 0
    assert mapping.lookup("ALWAYS") == 4
    with pytest.raises(KeyError):
        mapping.lookup("sometimes")


def test_mapping_rejects_out_of_range_values():
    with pytest.raises(ValidationError, match="franky"):
        LikertMapping.from_dict({"franky": 9})


def test_default_mapping_covers_five_anchors():
    assert sorted(set(DEFAULT_LIKERT_MAPPING.values())) == [0, 1, 2, 3, 4]


# ------------------------------------------------------------------ round trip


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    sheets = tuple(ResponseSheet(tuple(int(v) for v in rng.integers(0, 5, 14))) for _ in range(25))
    dataset = Dataset(sheets, "mem", tuple(range(1, 26)))
    records = score_dataset(DEFAULT_SCALE, sheets)
    path = tmp_path / "canonical.csv"
    write_csv(path, dataset, records, DEFAULT_SCALE)
    back = parse_csv(path, DEFAULT_SCALE)
    assert back.sheets == dataset.sheets


def test_canonical_csv_columns(tmp_path):
    sheets = (ResponseSheet((0,) * 14),)
    dataset = Dataset(sheets, "mem", (1,))
    records = score_dataset(DEFAULT_SCALE, sheets)
    path = tmp_path / "canonical.csv"
    write_csv(path, dataset, records, DEFAULT_SCALE)
    text = path.read_text(encoding="utf-8")
    lines = text.strip().splitlines()
    assert lines[0].split(",") == [f"q{i}" for i in range(1, 15)] + [
        "skor", "faktor_1_skor", "faktor_2_skor", "stres", "faktor_1", "faktor_2",
    ]
    assert lines[1] == ZERO_ROW + ",28,24,4,0,1,0"


# ------------------------------------------------------------------- describe


def test_describe_two_totals():
    stats = describe([record(20, 10, 10), record(36, 18, 18)])
    assert stats.total.count == 2
    assert stats.total.mean == pytest.approx(28.0)
    assert stats.total.std == pytest.approx(8 * math.sqrt(2))


def test_describe_quantiles_on_five_points():
    recs = [record(t, t // 2, t - t // 2) for t in (4, 20, 27, 35, 52)]
    stats = describe(recs)
    assert stats.total.p25 == pytest.approx(20.0)
    assert stats.total.p50 == pytest.approx(27.0)
    assert stats.total.p75 == pytest.approx(35.0)
    assert stats.total.min == pytest.approx(4.0)
    assert stats.total.max == pytest.approx(52.0)


def test_describe_single_record_convention():
    stats = describe([record(30, 15, 15)])
    assert stats.total.std == 0.0
    assert stats.total.min == stats.total.max == stats.total.mean == pytest.approx(30.0)


def test_describe_empty_errors():
    with pytest.raises(ValidationError, match="empty dataset"):
        describe([])


def test_describe_label_counts():
    recs = [record(40, 20, 20), record(10, 5, 5), record(29, 20, 9)]
    stats = describe(recs)
    assert stats.label_counts["stress"] == (1, 2)
    assert stats.label_counts["factor1"] == (1, 2)
    assert stats.label_counts["factor2"] == (2, 1)


def test_describe_mean_additivity():
    rng = np.random.default_rng(9)
    sheets = tuple(ResponseSheet(tuple(int(v) for v in rng.integers(0, 5, 14))) for _ in range(60))
    stats = describe(score_dataset(DEFAULT_SCALE, sheets))
    assert stats.total.mean == pytest.approx(stats.factor1.mean + stats.factor2.mean, abs=1e-9)


def test_describe_quantile_ordering():
    rng = np.random.default_rng(13)
    sheets = tuple(ResponseSheet(tuple(int(v) for v in rng.integers(0, 5, 14))) for _ in range(40))
    stats = describe(score_dataset(DEFAULT_SCALE, sheets))
    for col in (stats.total, stats.factor1, stats.factor2):
        assert col.min <= col.p25 <= col.p50 <= col.p75 <= col.max


# ---------------------------------------------------------------------- synth


def test_synth_population_zero():
    profile = SynthProfile(population_size=0, latent_mean=2.0, latent_std=0.7,
                           item_loadings=(1.0,) * 14, noise_std=0.8, seed=3)
    dataset = synth_generate(profile, DEFAULT_SCALE)
    assert dataset.sheets == ()


def test_synth_deterministic(tmp_path):
    profile = SynthProfile(population_size=40, latent_mean=2.0, latent_std=0.7,
                           item_loadings=(1.0,) * 14, noise_std=0.8, seed=99)
    a = synth_generate(profile, DEFAULT_SCALE)
    b = synth_generate(profile, DEFAULT_SCALE)
    assert a.sheets == b.sheets
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    for ds, path in ((a, pa), (b, pb)):
        write_csv(path, ds, score_dataset(DEFAULT_SCALE, ds.sheets), DEFAULT_SCALE)
    assert pa.read_bytes() == pb.read_bytes()


def test_synth_seed_changes_output():
    base = DEFAULT_SYNTH_PROFILE
    a = synth_generate(base, DEFAULT_SCALE)
    b = synth_generate(base.replace(seed=base.seed + 1), DEFAULT_SCALE)
    assert a.sheets != b.sheets


def test_synth_sheets_are_valid():
    dataset = synth_generate(DEFAULT_SYNTH_PROFILE, DEFAULT_SCALE)
    assert validate_dataset(dataset, DEFAULT_SCALE) == ()
    assert len(dataset.sheets) == 150


def test_synth_higher_trait_means_higher_score():
    # With zero noise, the latent trait orders total scores monotonically.
    lo = SynthProfile(population_size=200, latent_mean=1.2, latent_std=0.0,
                      item_loadings=(1.0,) * 14, noise_std=0.0, seed=1)
    hi = lo.replace(latent_mean=3.0)
    score_of = lambda p: score_dataset(DEFAULT_SCALE, synth_generate(p, DEFAULT_SCALE).sheets)
    lo_mean = np.mean([r.total_score for r in score_of(lo)])
    hi_mean = np.mean([r.total_score for r in score_of(hi)])
    assert hi_mean > lo_mean


def test_default_profile_hits_population_targets():
    # Calibration contract for the shipped profile: 10,000 rows land within
    # +-1.0 of the published total-score mean 27.72 and +-1.5 of std 9.65.
    big = DEFAULT_SYNTH_PROFILE.replace(population_size=10_000)
    records = score_dataset(DEFAULT_SCALE, synth_generate(big, DEFAULT_SCALE).sheets)
    totals = np.array([r.total_score for r in records], dtype=float)
    assert abs(totals.mean() - 27.72) <= 1.0
    assert abs(totals.std(ddof=1) - 9.65) <= 1.5


def test_synth_rejects_wrong_loading_count():
    with pytest.raises(ValidationError, match="item_loadings"):
        synth_generate(
            SynthProfile(10, 2.0, 0.7, (1.0,) * 13, 0.8, 1), DEFAULT_SCALE
        )


def test_profile_file_round_trip(tmp_path):
    path = tmp_path / "profile.json"
    save_profile(DEFAULT_SYNTH_PROFILE, path)
    assert load_profile(path) == DEFAULT_SYNTH_PROFILE


# ------------------------------------------------------------------- validate


def test_validate_dataset_clean():
    dataset = synth_generate(DEFAULT_SYNTH_PROFILE.replace(population_size=20), DEFAULT_SCALE)
    assert validate_dataset(dataset, DEFAULT_SCALE) == ()


def test_validate_dataset_reports_short_row():
    dataset = Dataset((ResponseSheet((0,) * 13),), "mem", (7,))
    findings = validate_dataset(dataset, DEFAULT_SCALE)
    assert findings == ("row 7: expected 14 answers, got 13",)


def test_validate_dataset_orders_findings_by_row():
    dataset = Dataset(
        (ResponseSheet((0,) * 14), ResponseSheet((9,) + (0,) * 13), ResponseSheet((0,) * 12)),
        "mem",
        (2, 5, 9),
    )
    findings = validate_dataset(dataset, DEFAULT_SCALE)
    assert len(findings) == 2
    assert findings[0].startswith("row 5:")
    assert findings[1].startswith("row 9:")


# -------------------------------------------------------------- scored matrix


def test_scored_dataset_matrices():
    dataset = synth_generate(DEFAULT_SYNTH_PROFILE.replace(population_size=30), DEFAULT_SCALE)
    scored = ScoredDataset.build(dataset, DEFAULT_SCALE)
    X = scored.feature_matrix()
    Y = scored.label_matrix()
    assert X.shape == (30, 14) and Y.shape == (30, 3)
    assert X.min() >= 0 and X.max() <= 4
    assert set(np.unique(Y)) <= {0, 1}
    assert X[0].tolist() == list(dataset.sheets[0].answers)
