import json
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from popaudit.pipeline import (
    AuditConfig,
    alpha_sweep,
    correlation_analysis,
    emit_reports,
    run_audit,
)
from popaudit.validation import ConfigError

MINI = Path(__file__).parent / "data" / "miniature"


def mini_config(tmp_path, **overrides) -> AuditConfig:
    base = dict(
        ratings_path=str(MINI / "ratings.csv"),
        genres_path=str(MINI / "genres.csv"),
        format="csv",
        seed=1,
        algorithms=("Popular", "Random"),
        out_dir=str(tmp_path / "out"),
    )
    base.update(overrides)
    return AuditConfig(**base)


@pytest.fixture(scope="module")
def mini_report(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("audit")
    config = mini_config(tmp)
    started = time.time()
    report = run_audit(config)
    report_wall = time.time() - started
    return report, report_wall


def test_miniature_audit_two_algorithms_under_ten_seconds(mini_report):
    report, wall = mini_report
    assert wall < 10.0
    assert set(report.algorithms) == {"Popular", "Random"}
    for result in report.algorithms.values():
        assert len(result.user_metrics) == report.stats["n_train_users"]
        assert set(result.group_metrics["basis"]) == {"item", "genre"}


def test_unknown_algorithm_rejected_before_work(tmp_path):
    with pytest.raises(ConfigError, match="unknown algorithm"):
        mini_config(tmp_path, algorithms=("Popular", "DeepFM"))


def test_config_json_round_trip(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({
        "ratings_path": str(MINI / "ratings.csv"),
        "genres_path": str(MINI / "genres.csv"),
        "format": "csv",
        "algorithms": ["Popular"],
        "out_dir": str(tmp_path / "o"),
    }))
    config = AuditConfig.from_json(cfg_path, seed=5)
    assert config.seed == 5
    assert config.algorithms == ("Popular",)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ratings_path": "x", "genres_path": "y",
                               "mystery_knob": 3}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        AuditConfig.from_json(bad)


def test_invalid_config_values(tmp_path):
    with pytest.raises(ConfigError):
        mini_config(tmp_path, split_ratio=1.2)
    with pytest.raises(ConfigError):
        mini_config(tmp_path, alphas=(0.5, 0.1))
    with pytest.raises(ConfigError):
        mini_config(tmp_path, grouping_order="middle_first")


def test_emit_reports_files(mini_report, tmp_path):
    report, _ = mini_report
    paths = emit_reports(report, tmp_path / "emit")
    names = {p.name for p in paths}
    expected = {"item_partition.csv", "genre_partition.csv", "user_groups.csv",
                "overlap_matrix.csv", "accuracy.csv", "alpha_sweep.csv",
                "correlations.csv", "recs_Popular.csv", "recs_Random.csv",
                "user_metrics_Popular.csv", "user_metrics_Random.csv",
                "group_metrics_Popular.csv", "group_metrics_Random.csv",
                "audit.json", "summary.txt"}
    assert expected <= names


def test_audit_json_matches_group_csvs(mini_report, tmp_path):
    report, _ = mini_report
    out = tmp_path / "roundtrip"
    emit_reports(report, out)
    audit = json.loads((out / "audit.json").read_text())
    for name in ("Popular", "Random"):
        csv_rows = pd.read_csv(out / f"group_metrics_{name}.csv")
        json_rows = [r for r in audit["group_metrics"] if r["algorithm"] == name]
        assert len(json_rows) == len(csv_rows)
        for json_row, (_, csv_row) in zip(json_rows, csv_rows.iterrows()):
            for key in ("app", "arp", "pl", "pl_user_mean", "upd"):
                assert json_row[key] == pytest.approx(csv_row[key], abs=1e-12)
    for row in audit["accuracy"]:
        csv_row = pd.read_csv(out / "accuracy.csv").set_index("algorithm").loc[
            row["algorithm"]]
        assert row["precision"] == pytest.approx(csv_row["precision"], abs=1e-12)


def test_rerun_is_byte_identical(tmp_path):
    config_a = mini_config(tmp_path / "a")
    config_b = mini_config(tmp_path / "b")
    paths_a = emit_reports(run_audit(config_a))
    paths_b = emit_reports(run_audit(config_b))
    by_name_b = {p.name: p for p in paths_b}
    compared = 0
    for path_a in paths_a:
        if path_a.suffix != ".csv":
            continue
        assert path_a.read_bytes() == by_name_b[path_a.name].read_bytes()
        compared += 1
    assert compared >= 10


def test_user_groups_csv_schema(mini_report, tmp_path):
    report, _ = mini_report
    out = tmp_path / "schema"
    emit_reports(report, out)
    df = pd.read_csv(out / "user_groups.csv")
    assert list(df.columns) == ["user_id", "basis", "group", "p_h", "p_m", "p_t",
                                "pi", "diversity", "app", "profile_size"]
    assert set(df["basis"]) == {"item", "genre"}
    per_basis = df.groupby("basis").size()
    assert per_basis["item"] == per_basis["genre"] == report.stats["n_train_users"]
    sums = df[["p_h", "p_m", "p_t"]].sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-9)


def test_alpha_sweep_rows():
    niche = np.array([0, 1, 2, 3])
    pl = np.array([1.0, 2.0, 3.0, 4.0])
    upd = np.array([0.1, 0.2, 0.3, 0.4])
    pi = np.array([0.05, 0.15, 0.25, 0.9])
    rows = alpha_sweep(niche, pl, upd, pi, [0.0, 0.1, 0.2, 1.0])
    assert rows[0]["n_users"] == 0 and rows[0]["mean_pl"] is None
    assert rows[1]["n_users"] == 1
    assert rows[1]["mean_upd"] == pytest.approx(0.1)
    assert rows[3]["n_users"] == 4
    assert rows[3]["mean_pl"] == pytest.approx(2.5)
    counts = [r["n_users"] for r in rows]
    assert counts == sorted(counts)


def test_correlation_analysis_null_propagation():
    div = np.array([1.0, 2.0, 3.0, 4.0])
    constant = np.ones(4)
    upd = np.array([0.1, 0.3, 0.2, 0.5])
    rows = correlation_analysis(div, constant, upd, "Popular")
    pl_pearson = [r for r in rows
                  if r["y"] == "pl" and r["method"] == "pearson"][0]
    assert pl_pearson["rho"] is None and pl_pearson["note"] == "zero variance"
    upd_pearson = [r for r in rows
                   if r["y"] == "upd" and r["method"] == "pearson"][0]
    assert upd_pearson["rho"] == pytest.approx(
        np.corrcoef(div, upd)[0, 1])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_failure_isolation(tmp_path, monkeypatch):
    from popaudit import pipeline as pl_mod

    original = pl_mod.DEFAULT_MODEL_PARAMS["BiasedMF"]
    monkeypatch.setitem(pl_mod.DEFAULT_MODEL_PARAMS, "BiasedMF",
                        {**original, "learn_rate": 1e160, "epochs": 2})
    config = mini_config(tmp_path, algorithms=("BiasedMF", "Popular"))
    report = run_audit(config)
    assert "BiasedMF" in report.failures
    assert "Popular" in report.algorithms
    assert "TrainingDivergedError" in report.failures["BiasedMF"]


def test_grid_search_path(tmp_path):
    config = mini_config(tmp_path, algorithms=("UserKNN",),
                         grids={"UserKNN": {"k": [5, 20]}})
    report = run_audit(config)
    result = report.algorithms["UserKNN"]
    assert result.grid_log is not None and len(result.grid_log) == 2
    assert result.spec.params["k"] in (5, 20)


def test_worker_count_env_cap(tmp_path, monkeypatch):
    from popaudit.pipeline import worker_count

    config = mini_config(tmp_path)
    monkeypatch.setenv("POPAUDIT_THREADS", "1")
    assert worker_count(config, 6) == 1
    monkeypatch.setenv("POPAUDIT_THREADS", "4")
    assert worker_count(config, 6) == 4
    assert worker_count(config, 2) == 2
    monkeypatch.delenv("POPAUDIT_THREADS")
    config2 = mini_config(tmp_path, threads=1)
    assert worker_count(config2, 6) == 1
