"""End-to-end CLI tests: subcommands, exit codes, output bundle, determinism."""

from __future__ import annotations

import json

import pytest

from stresslab.cli import main
from stresslab.data import DEFAULT_SYNTH_PROFILE, save_profile

HEADER = ",".join(f"q{i}" for i in range(1, 15))
ZERO_ROW = ",".join(["0"] * 14)


@pytest.fixture()
def small_profile(tmp_path):
    path = tmp_path / "profile.json"
    save_profile(DEFAULT_SYNTH_PROFILE.replace(population_size=60, seed=11), path)
    return path


# ---------------------------------------------------------------------- score


def test_score_all_zero_row(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text(f"{HEADER}\n{ZERO_ROW}\n", encoding="utf-8")
    out = tmp_path / "scored.csv"
    assert main(["score", "--input", str(src), "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").strip().splitlines()
    assert lines[1].endswith(",28,24,4,0,1,0")
    stdout = capsys.readouterr().out
    assert "mean" in stdout and "label counts" in stdout


def test_score_empty_file_exits_2(tmp_path, capsys):
    src = tmp_path / "empty.csv"
    src.write_text("", encoding="utf-8")
    code = main(["score", "--input", str(src), "--out", str(tmp_path / "o.csv")])
    assert code == 2
    assert "empty dataset" in capsys.readouterr().err


def test_score_header_only_exits_2(tmp_path, capsys):
    src = tmp_path / "header.csv"
    src.write_text(f"{HEADER}\n", encoding="utf-8")
    assert main(["score", "--input", str(src), "--out", str(tmp_path / "o.csv")]) == 2
    assert "empty dataset" in capsys.readouterr().err


def test_score_unwritable_output_exits_3(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text(f"{HEADER}\n{ZERO_ROW}\n", encoding="utf-8")
    out = tmp_path / "no" / "such" / "dir" / "o.csv"
    assert main(["score", "--input", str(src), "--out", str(out)]) == 3
    assert "I/O error" in capsys.readouterr().err


def test_score_bad_cell_exits_2(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text(f"{HEADER}\n" + "0,0,5," + ",".join(["0"] * 11) + "\n", encoding="utf-8")
    assert main(["score", "--input", str(src), "--out", str(tmp_path / "o.csv")]) == 2
    assert "row 2, column q3" in capsys.readouterr().err


# ---------------------------------------------------------------------- synth


def test_synth_default_writes_150_rows(tmp_path):
    out = tmp_path / "synth.csv"
    assert main(["synth", "--out", str(out)]) == 0
    assert len(out.read_text(encoding="utf-8").strip().splitlines()) == 151


def test_synth_same_seed_identical_files(tmp_path, small_profile):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--profile", str(small_profile), "--out", str(a)]) == 0
    assert main(["synth", "--profile", str(small_profile), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_synth_env_override_for_out(tmp_path, monkeypatch):
    out = tmp_path / "env.csv"
    monkeypatch.setenv("STRESSLAB_OUT", str(out))
    assert main(["synth"]) == 0
    assert out.exists()


# ------------------------------------------------------------------------ run


def run_args(profile, out, models="dt", seeds="0,1"):
    return [
        "run",
        "--profile",
        str(profile),
        "--models",
        models,
        "--seeds",
        seeds,
        "--out",
        str(out),
    ]


def test_run_writes_report_bundle(tmp_path, small_profile, capsys):
    out = tmp_path / "report"
    assert main(run_args(small_profile, out, models="dt,ada")) == 0
    for name in (
        "manifest.json",
        "results.csv",
        "results_flat.csv",
        "importance.csv",
        "results.md",
        "report.json",
        "importance.svg",
        "confusion_dt.csv",
        "confusion_dt.svg",
        "confusion_ada.csv",
        "confusion_ada.svg",
    ):
        assert (out / name).exists(), name
    stdout = capsys.readouterr().out
    assert "±" in stdout
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["artifact"]["name"] == "stresslab"
    assert manifest["config"]["source"]["kind"] == "profile"
    assert manifest["seeds"] == [0, 1]


def test_run_single_model_section(tmp_path, small_profile):
    out = tmp_path / "only-dt"
    assert main(run_args(small_profile, out, models="dt")) == 0
    results = (out / "results.csv").read_text(encoding="utf-8").strip().splitlines()
    assert len(results) == 2  # header + one model row
    assert results[1].startswith("dt,")


def test_run_rerun_from_manifest_byte_identical(tmp_path, small_profile):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(run_args(small_profile, out1)) == 0
    assert main(["run", "--config", str(out1 / "manifest.json"), "--out", str(out2)]) == 0
    files1 = sorted(p.name for p in out1.iterdir())
    files2 = sorted(p.name for p in out2.iterdir())
    assert files1 == files2
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_run_emit_filter(tmp_path, small_profile):
    out = tmp_path / "csv-only"
    assert main(run_args(small_profile, out) + ["--emit", "csv"]) == 0
    names = {p.name for p in out.iterdir()}
    assert "results.csv" in names and "manifest.json" in names
    assert not any(n.endswith(".svg") for n in names)
    assert "results.md" not in names and "report.json" not in names


def test_run_input_and_profile_conflict_exits_1(tmp_path, small_profile, capsys):
    code = main(
        [
            "run",
            "--input",
            "x.csv",
            "--profile",
            str(small_profile),
            "--out",
            str(tmp_path / "o"),
        ]
    )
    assert code == 1
    assert "exactly one" in capsys.readouterr().err


def test_run_on_input_csv(tmp_path, small_profile):
    # synth a CSV first, then run on it as an input file
    data = tmp_path / "cohort.csv"
    assert main(["synth", "--profile", str(small_profile), "--out", str(data)]) == 0
    out = tmp_path / "from-input"
    assert main(
        ["run", "--input", str(data), "--models", "dt", "--seeds", "0,1", "--out", str(out)]
    ) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["source"]["kind"] == "input"
    assert len(manifest["config"]["source"]["sha256"]) == 64


def test_run_unknown_model_exits_2(tmp_path, small_profile, capsys):
    code = main(run_args(small_profile, tmp_path / "o", models="xgb"))
    assert code == 2
    assert "xgb" in capsys.readouterr().err


def test_run_bad_seeds_exits_1(tmp_path, small_profile, capsys):
    code = main(run_args(small_profile, tmp_path / "o", seeds="0,banana"))
    assert code == 1


def test_run_models_json_with_overrides(tmp_path, small_profile):
    models = tmp_path / "models.json"
    models.write_text(
        json.dumps([{"model_id": "rf", "hyperparams": {"n_members": 7}}]), encoding="utf-8"
    )
    out = tmp_path / "override"
    assert main(run_args(small_profile, out, models=str(models))) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    entry = manifest["config"]["models"][0]
    assert entry["model_id"] == "rf"
    assert entry["hyperparams"]["n_members"] == 7
    assert entry["hyperparams"]["bootstrap"] is True  # catalog default survives


# ----------------------------------------------------------------------- rank


def test_rank_from_run_output(tmp_path, small_profile, capsys):
    out = tmp_path / "rank-src"
    assert main(run_args(small_profile, out, models="dt,gb")) == 0
    capsys.readouterr()
    assert main(["rank", "--importance", str(out / "importance.csv"), "-k", "3"]) == 0
    stdout = capsys.readouterr().out
    assert "top 3" in stdout and "bottom 3" in stdout
    assert stdout.count("Q") >= 6


def test_rank_missing_file_exits_3(tmp_path, capsys):
    assert main(["rank", "--importance", str(tmp_path / "nope.csv")]) == 3


# ---------------------------------------------------------------------- usage


def test_no_command_exits_1(capsys):
    assert main([]) == 1


def test_unknown_command_exits_1(capsys):
    assert main(["frobnicate"]) == 1


def test_missing_required_out_exits_1(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text(f"{HEADER}\n{ZERO_ROW}\n", encoding="utf-8")
    assert main(["score", "--input", str(src)]) == 1
    assert "--out" in capsys.readouterr().err
