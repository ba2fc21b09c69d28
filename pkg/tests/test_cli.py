"""Command-line surface: exit codes, report bundles, stage plumbing."""
from __future__ import annotations

import json
from datetime import date
from pathlib import Path

from reviewpulse.cli import main
from reviewpulse.ingest import serialize_reviews
from reviewpulse.synth import generate, scenario_to_dict, spike_pair_scenario

BUNDLE_FILES = (
    "catalog.json",
    "correlated_events.json",
    "correlations.csv",
    "events.csv",
    "metrics.csv",
    "metrics_daily.csv",
    "rejects.jsonl",
    "summaries.json",
    "summary_requests.json",
)


def _small_dataset(tmp_path: Path) -> Path:
    reviews, _ = generate(spike_pair_scenario(seed=2, n_apps=3, n_windows=12, spike_window=6))
    path = tmp_path / "reviews.jsonl"
    path.write_text(serialize_reviews(reviews, fmt="jsonl"), encoding="utf-8")
    return path


def test_empty_dataset_yields_empty_reports_and_exit_zero(tmp_path) -> None:
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", str(empty), "--out", str(out)]) == 0
    for name in BUNDLE_FILES:
        assert (out / name).is_file(), name
    assert json.loads((out / "correlated_events.json").read_text()) == []
    assert json.loads((out / "summary_requests.json").read_text()) == []
    assert json.loads((out / "summaries.json").read_text()) == []
    assert (out / "rejects.jsonl").read_text() == ""
    # CSVs reduce to their header line.
    for name in ("events.csv", "correlations.csv", "metrics.csv", "metrics_daily.csv"):
        lines = (out / name).read_text().strip().splitlines()
        assert len(lines) == 1, name


def test_same_inputs_give_byte_identical_bundles(tmp_path) -> None:
    dataset = _small_dataset(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(dataset), "--out", str(out_a)]) == 0
    assert main(["run", str(dataset), "--out", str(out_b)]) == 0
    for name in BUNDLE_FILES:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_ce_stage_rebuilds_the_run_output_from_csvs_alone(tmp_path) -> None:
    dataset = _small_dataset(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(dataset), "--out", str(out)]) == 0
    ce_out = tmp_path / "ce"
    assert main([
        "ce", str(out / "events.csv"), str(out / "correlations.csv"),
        "--out", str(ce_out),
    ]) == 0
    assert (ce_out / "correlated_events.json").read_bytes() == (
        out / "correlated_events.json"
    ).read_bytes()


def test_staged_commands_chain_into_the_same_artifacts(tmp_path) -> None:
    dataset = _small_dataset(tmp_path)
    out = tmp_path / "run"
    assert main(["run", str(dataset), "--out", str(out)]) == 0

    staged = tmp_path / "staged"
    assert main(["metrics", str(dataset), "--out", str(staged)]) == 0
    assert main(["detect", str(staged / "metrics.csv"), "--out", str(staged)]) == 0
    assert main(["correlate", str(staged / "metrics_daily.csv"), "--out", str(staged)]) == 0
    assert main([
        "ce", str(staged / "events.csv"), str(staged / "correlations.csv"),
        "--out", str(staged),
    ]) == 0
    assert main([
        "summarize-prep", str(staged / "correlated_events.json"), str(dataset),
        "--out", str(staged),
    ]) == 0
    for name in (
        "metrics.csv", "metrics_daily.csv", "events.csv", "correlations.csv",
        "correlated_events.json", "summary_requests.json", "summaries.json",
    ):
        assert (staged / name).read_bytes() == (out / name).read_bytes(), name


def test_synthetic_market_run_reports_exactly_the_injected_pair(tmp_path) -> None:
    scenario_path = tmp_path / "scenario.json"
    scenario_path.write_text(
        json.dumps(scenario_to_dict(spike_pair_scenario(seed=0))), encoding="utf-8"
    )
    synth_out = tmp_path / "synth"
    assert main(["synth", str(scenario_path), "--out", str(synth_out)]) == 0
    for name in ("reviews.jsonl", "labels.json", "scenario.json"):
        assert (synth_out / name).is_file(), name
    labels = json.loads((synth_out / "labels.json").read_text())
    assert {(l["app_id"], l["metric"], l["window_index"], l["sign"]) for l in labels} == {
        ("spike0", "count", 30, 1),
        ("spike1", "count", 30, 1),
    }

    run_out = tmp_path / "run"
    assert main(["run", str(synth_out / "reviews.jsonl"), "--out", str(run_out)]) == 0
    ces = json.loads((run_out / "correlated_events.json").read_text())
    week30 = date(2024, 1, 4).toordinal() + 30 * 7
    assert len(ces) == 1
    only = ces[0]
    assert (only["app_i"], only["app_j"], only["metric"], only["ce"]) == (
        "spike0", "spike1", "count", 1,
    )
    assert date.fromisoformat(only["window_start"]).toordinal() == week30


def test_config_violations_exit_two_with_each_error_on_stderr(tmp_path, capsys) -> None:
    dataset = tmp_path / "d.jsonl"
    dataset.write_text("", encoding="utf-8")
    code = main([
        "run", str(dataset), "--out", str(tmp_path / "out"),
        "--set", "correlation_threshold=1.5", "--set", "sensitivity=0",
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "correlation_threshold" in err
    assert "sensitivity" in err
    assert err.count("config error:") == 2


def test_missing_dataset_exits_three(tmp_path, capsys) -> None:
    code = main(["run", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "out")])
    assert code == 3
    assert "dataset error:" in capsys.readouterr().err


def test_unreadable_csv_header_exits_three(tmp_path, capsys) -> None:
    bad = tmp_path / "bad.csv"
    bad.write_text("who,what,when\n1,2,3\n", encoding="utf-8")
    code = main(["run", str(bad), "--format", "csv", "--out", str(tmp_path / "out")])
    assert code == 3
    assert "dataset error:" in capsys.readouterr().err


def test_partial_rejects_still_succeed(tmp_path) -> None:
    dataset = _small_dataset(tmp_path)
    mixed = tmp_path / "mixed.jsonl"
    mixed.write_text("not json\n" + dataset.read_text(), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", str(mixed), "--out", str(out)]) == 0
    rejects = [json.loads(l) for l in (out / "rejects.jsonl").read_text().splitlines()]
    assert len(rejects) == 1
    assert rejects[0]["line_no"] == 1
    assert rejects[0]["reason"].startswith("invalid-json:")


def test_ingest_check_writes_coverage_reports(tmp_path, capsys) -> None:
    dataset = _small_dataset(tmp_path)
    out = tmp_path / "out"
    assert main(["ingest-check", str(dataset), "--out", str(out)]) == 0
    catalog = json.loads((out / "catalog.json").read_text())
    assert (out / "rejects.jsonl").read_text() == ""
    assert set(catalog["apps"]) == {"app00", "spike0", "spike1"}
    assert "accepted" in capsys.readouterr().out


def test_synth_seed_flag_changes_the_market(tmp_path) -> None:
    scenario_path = tmp_path / "scenario.json"
    scenario_path.write_text(
        json.dumps(scenario_to_dict(spike_pair_scenario(seed=0, n_apps=3, n_windows=6, spike_window=3))),
        encoding="utf-8",
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", str(scenario_path), "--out", str(out_a)]) == 0
    assert main(["synth", str(scenario_path), "--seed", "1", "--out", str(out_b)]) == 0
    assert (out_a / "reviews.jsonl").read_text() != (out_b / "reviews.jsonl").read_text()
    assert json.loads((out_b / "scenario.json").read_text())["seed"] == 1


def test_bad_scenario_file_exits_two(tmp_path, capsys) -> None:
    scenario_path = tmp_path / "scenario.json"
    scenario_path.write_text('{"n_windows": 0}', encoding="utf-8")
    code = main(["synth", str(scenario_path), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "bad scenario" in capsys.readouterr().err
