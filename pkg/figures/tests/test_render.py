import shutil
from pathlib import Path

import pandas as pd
import pytest

from popaudit_figures import FIGURE_SPECS, render_all

GOLDEN = Path(__file__).parent / "data" / "golden"


def test_all_thirteen_figures_render(tmp_path):
    results = render_all(GOLDEN, tmp_path, "png")
    assert len(results) == len(FIGURE_SPECS) == 13
    rendered = {r.figure_id for r in results if r.status == "rendered"}
    assert rendered == {s.figure_id for s in FIGURE_SPECS}
    for r in results:
        assert r.path.exists()
        assert r.path.stat().st_size > 0


def test_rho_annotations_match_csv_exactly(tmp_path):
    results = {r.figure_id: r for r in render_all(GOLDEN, tmp_path, "svg")}
    corr = pd.read_csv(GOLDEN / "correlations.csv")
    pearson = corr[(corr["x"] == "diversity") & (corr["method"] == "pearson")]
    for figure_id, metric in (("diversity_pl", "pl"), ("diversity_upd", "upd")):
        result = results[figure_id]
        assert result.status == "rendered"
        svg_text = result.path.read_text()
        rows = pearson[pearson["y"] == metric]
        for _, row in rows.iterrows():
            expected = f"rho = {row['rho']}"
            assert result.metadata["annotations"][row["algorithm"]] == expected
            assert expected in svg_text


def test_missing_input_fails_only_that_figure(tmp_path):
    csv_dir = tmp_path / "partial"
    shutil.copytree(GOLDEN, csv_dir)
    (csv_dir / "overlap_matrix.csv").unlink()
    results = render_all(csv_dir, tmp_path / "imgs")
    by_id = {r.figure_id: r for r in results}
    assert by_id["overlap_heatmap"].status == "failed"
    assert "overlap_matrix.csv" in by_id["overlap_heatmap"].error
    rendered = [r for r in results if r.status == "rendered"]
    assert len(rendered) == 12


def test_missing_column_reported(tmp_path):
    csv_dir = tmp_path / "cols"
    shutil.copytree(GOLDEN, csv_dir)
    df = pd.read_csv(csv_dir / "alpha_sweep.csv").drop(columns=["mean_upd"])
    df.to_csv(csv_dir / "alpha_sweep.csv", index=False)
    results = {r.figure_id: r for r in render_all(csv_dir, tmp_path / "imgs")}
    assert results["pi_sweep_upd"].status == "failed"
    assert "mean_upd" in results["pi_sweep_upd"].error
    assert results["pi_sweep_pl"].status == "rendered"


def test_pop_dist_point_count_matches_partition(tmp_path):
    results = {r.figure_id: r for r in render_all(GOLDEN, tmp_path)}
    n_items = len(pd.read_csv(GOLDEN / "item_partition.csv"))
    assert results["pop_dist"].metadata["n_points"] == n_items


def test_rendering_is_idempotent(tmp_path):
    first = render_all(GOLDEN, tmp_path, "png")
    second = render_all(GOLDEN, tmp_path, "png")
    assert [r.status for r in first] == [r.status for r in second]
    # inputs untouched
    assert (GOLDEN / "user_groups.csv").exists()


def test_cli_roundtrip(tmp_path, capsys):
    from popaudit_figures.cli import main

    code = main(["--in", str(GOLDEN), "--out", str(tmp_path / "out"),
                 "--format", "png"])
    assert code == 0
    out = capsys.readouterr().out
    assert "13 rendered, 0 failed" in out
    assert len(list((tmp_path / "out").glob("*.png"))) == 13
