import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from levfp.cli import main

DATA = Path(__file__).resolve().parent.parent / "data"

SMALL = [
    "--subjects", "12", "--regions", "12", "--signature-edges", "10", "--seed", "3",
]


@pytest.fixture()
def runner():
    return CliRunner()


def _run(runner, args, expect=0):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == expect, result.output + (result.stderr or "")
    return result


@pytest.fixture()
def cohort_dir(tmp_path, runner):
    out = tmp_path / "cohort"
    _run(runner, ["synth", "--out", str(out), *SMALL])
    return out


def test_synth_outputs(cohort_dir):
    for name in ("g1.csv", "g2.csv", "answer_key.json", "run_manifest.json"):
        assert (cohort_dir / name).exists()
    key = json.loads((cohort_dir / "answer_key.json").read_text())
    assert len(key["signature_edges"]) == 10
    manifest = json.loads((cohort_dir / "run_manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 3
    assert "started" in manifest and "finished" in manifest


def test_synth_with_tasks(tmp_path, runner):
    out = tmp_path / "c"
    _run(runner, ["synth", "--out", str(out), *SMALL, "--tasks", "2",
                  "--task-edges", "8"])
    task_files = sorted((out / "tasks").glob("*.csv"))
    assert len(task_files) == 24  # 12 subjects x 2 encodings
    key = json.loads((out / "answer_key.json").read_text())
    assert len(key["per_task_edges"]) == 2


def test_fingerprint_command(tmp_path, runner, cohort_dir):
    out = tmp_path / "fp"
    _run(runner, ["fingerprint", str(cohort_dir / "g1.csv"),
                  str(cohort_dir / "g2.csv"), "--out", str(out),
                  "--t", "20", "--trials", "5", "--null-trials", "20"])
    report = json.loads((out / "fingerprint_report.json").read_text())
    assert set(report) >= {"leverage_train", "leverage_test", "random_features",
                           "empirical_p", "manifest"}
    assert report["leverage_test"]["trials"] == 5
    assert 0 < report["empirical_p"] <= 1


def test_fingerprint_byte_determinism(tmp_path, runner, cohort_dir):
    args = ["fingerprint", str(cohort_dir / "g1.csv"), str(cohort_dir / "g2.csv"),
            "--t", "20", "--trials", "4", "--null-trials", "10", "--seed", "7"]
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    _run(runner, args + ["--out", str(out_a)])
    _run(runner, args + ["--out", str(out_b)])
    assert (out_a / "fingerprint_report.json").read_bytes() == (
        out_b / "fingerprint_report.json"
    ).read_bytes()
    ma = json.loads((out_a / "run_manifest.json").read_text())
    mb = json.loads((out_b / "run_manifest.json").read_text())
    for m in (ma, mb):
        m.pop("started")
        m.pop("finished")
    assert ma == mb


def test_sweep_command(tmp_path, runner, cohort_dir):
    out = tmp_path / "sweep"
    _run(runner, ["sweep", str(cohort_dir / "g1.csv"), str(cohort_dir / "g2.csv"),
                  "--out", str(out), "--t-min", "5", "--t-max", "30",
                  "--step", "5", "--trials", "3"])
    summary = json.loads((out / "sweep_summary.json").read_text())
    assert summary["budgets"] == [5, 10, 15, 20, 25, 30]
    assert summary["plateau_t_95pct"] in summary["budgets"]
    lines = (out / "sweep_curve.csv").read_text().splitlines()
    assert lines[0] == "budget,mean_test_accuracy"
    assert len(lines) == 7


def test_enrich_command(tmp_path, runner, cohort_dir):
    out = tmp_path / "enrich"
    _run(runner, ["enrich", str(cohort_dir / "g1.csv"), str(cohort_dir / "g2.csv"),
                  "--out", str(out), "--t", "10", "--trials", "40",
                  "--feature-pvalue", "1e-6", "--region-pvalue", "1e-3",
                  "--min-degree", "2"])
    summary = json.loads((out / "enrich_summary.json").read_text())
    assert "high_confidence_edges" in summary
    assert (out / "features.tsv").exists()
    assert (out / "regions.tsv").exists()
    assert (out / "plot_edges.tsv").exists()


def test_restrict_eval_command(tmp_path, runner, cohort_dir):
    out = tmp_path / "restrict"
    _run(runner, ["restrict-eval", str(cohort_dir / "g1.csv"),
                  str(cohort_dir / "g2.csv"), "--out", str(out),
                  "--regions", "0,1,2,3,4", "--random-trials", "5"])
    report = json.loads((out / "restrict_report.json").read_text())
    assert report["regions"] == [0, 1, 2, 3, 4]
    assert 0 <= report["restricted_accuracy"] <= 100
    assert report["random_region_trials"] == 5


def test_baseline_command(tmp_path, runner, cohort_dir):
    out = tmp_path / "baseline"
    _run(runner, ["baseline", str(cohort_dir / "g1.csv"), str(cohort_dir / "g2.csv"),
                  "--out", str(out), "--drop", "0,1", "--t", "10",
                  "--trials", "3"])
    table = json.loads((out / "baseline_table.json").read_text())
    methods = [r["method"] for r in table["rows"]]
    assert methods == ["full_matrix", "pca_drop_0", "pca_drop_1", "principal_features"]
    lines = (out / "baseline_table.csv").read_text().splitlines()
    assert lines[0] == "method,train_mean,train_std,test_mean,test_std"


def test_tasks_command(tmp_path, runner):
    cohort = tmp_path / "c"
    _run(runner, ["synth", "--out", str(cohort), *SMALL, "--tasks", "3",
                  "--task-edges", "8", "--task-strength", "0.4"])
    out = tmp_path / "tasks"
    _run(runner, ["tasks", str(cohort / "tasks"), "--out", str(out),
                  "--t", "20", "--threshold", "1e-3", "--trials", "3"])
    report = json.loads((out / "task_report.json").read_text())
    assert "aggregated_features" in report
    assert "full_feature_mean" in report
    assert set(report["per_task_edges"]) == {"task0", "task1", "task2"}


def test_ingest_command(tmp_path, runner):
    out = tmp_path / "ingested"
    _run(runner, ["ingest", "--timeseries-dir", str(DATA / "toy_timeseries"),
                  "--parcellation", str(DATA / "toy_parcellation.tsv"),
                  "--out", str(out)])
    assert (out / "g1.csv").exists()
    assert (out / "g2.csv").exists()
    manifest = json.loads((out / "g1.manifest.json").read_text())
    assert manifest["region_count"] == 6


def test_ingest_no_filter_options(tmp_path, runner):
    out = tmp_path / "ingested"
    _run(runner, ["ingest", "--timeseries-dir", str(DATA / "toy_timeseries"),
                  "--parcellation", str(DATA / "toy_parcellation.tsv"),
                  "--out", str(out), "--no-gsr", "--bandpass", "off"])
    assert (out / "g1.csv").exists()


def test_exit_code_usage(tmp_path, runner, cohort_dir):
    result = runner.invoke(
        main,
        ["restrict-eval", str(cohort_dir / "g1.csv"), str(cohort_dir / "g2.csv"),
         "--out", str(tmp_path / "o"), "--regions", "3"],
    )
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "usage"


def test_exit_code_data(tmp_path, runner):
    bad = tmp_path / "bad.csv"
    bad.write_text("subject_id,e0\nx,0.1\n")
    manifest = tmp_path / "bad.manifest.json"
    manifest.write_text(json.dumps({"region_count": 4,
                                    "edge_ordering": "row-major-upper",
                                    "source_session": "1"}))
    result = runner.invoke(
        main, ["fingerprint", str(bad), str(bad), "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 2
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "data"


def test_exit_code_numeric(tmp_path, runner, cohort_dir):
    # train_fraction of 0.99 on 12 subjects leaves no test side
    result = runner.invoke(
        main,
        ["fingerprint", str(cohort_dir / "g1.csv"), str(cohort_dir / "g2.csv"),
         "--out", str(tmp_path / "o"), "--t", "10", "--split", "0.99",
         "--trials", "2", "--null-trials", "2"],
    )
    assert result.exit_code == 3
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "numeric"
