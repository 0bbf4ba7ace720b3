"""Render audit CSVs into the thirteen figure families.

Everything here is read-only over the CSV directory; numeric annotations
(correlation values, group means) are taken from the CSVs as-is, never
recomputed. Each renderer returns (figure, metadata) where metadata records
what was drawn (the tests assert on it).
"""

from __future__ import annotations

import glob
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .specs import FIGURE_SPECS

GROUP_ORDER = ("Blockbuster", "Diverse", "Niche")
GROUP_COLORS = {"Blockbuster": "#c44e52", "Diverse": "#55a868", "Niche": "#4c72b0"}
PART_COLORS = {"head": "#c44e52", "mid": "#55a868", "tail": "#4c72b0"}


class FigureInputError(RuntimeError):
    """Missing CSV or column for a figure."""


def _read(csv_dir: Path, name: str) -> pd.DataFrame:
    path = csv_dir / name
    if not path.exists():
        raise FigureInputError(f"missing input {name}")
    return pd.read_csv(path)


def _read_glob(csv_dir: Path, pattern: str) -> dict:
    paths = sorted(glob.glob(str(csv_dir / pattern)))
    if not paths:
        raise FigureInputError(f"no inputs match {pattern}")
    out = {}
    for p in paths:
        stem = Path(p).stem
        algorithm = stem.split("_", 2)[-1]
        out[algorithm] = pd.read_csv(p)
    return out


def _require(df: pd.DataFrame, columns, source: str):
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise FigureInputError(f"{source} lacks columns {missing}")


def render_pop_dist(csv_dir: Path):
    df = _read(csv_dir, "item_partition.csv")
    _require(df, ("rank", "pop", "group"), "item_partition.csv")
    df = df.sort_values("rank")
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.fill_between(df["rank"], df["pop"], color="#4c72b0", alpha=0.8)
    n_head = int((df["group"] == "head").sum())
    n_tail = int((df["group"] == "tail").sum())
    cut_head = n_head + 0.5
    cut_tail = len(df) - n_tail + 0.5
    for cut, label in ((cut_head, "Head"), (cut_tail, "Tail")):
        ax.axvline(cut, color="black", linestyle="--", linewidth=1)
    ax.text(cut_head / 2, ax.get_ylim()[1] * 0.9, "Head", ha="center")
    ax.text((cut_head + cut_tail) / 2, ax.get_ylim()[1] * 0.9, "Mid", ha="center")
    ax.text((cut_tail + len(df)) / 2, ax.get_ylim()[1] * 0.9, "Tail", ha="center")
    ax.set_xlabel("items sorted by popularity")
    ax.set_ylabel("fraction of interactions")
    ax.set_title("Item popularity distribution")
    return fig, {"n_points": len(df), "boundaries": (n_head, n_tail)}


def render_genre_pop_dist(csv_dir: Path):
    df = _read(csv_dir, "genre_partition.csv")
    _require(df, ("genre", "mass", "group"), "genre_partition.csv")
    df = df.sort_values("mass", ascending=False)
    fig, ax = plt.subplots(figsize=(9, 4))
    colors = [PART_COLORS[g] for g in df["group"]]
    ax.bar(df["genre"], df["mass"], color=colors)
    ax.set_ylabel("interaction mass")
    ax.set_title("Genre popularity distribution")
    ax.tick_params(axis="x", rotation=60)
    fig.tight_layout()
    return fig, {"n_points": len(df)}


def _render_group_bars(csv_dir: Path, metric: str, basis: str, title: str):
    frames = _read_glob(csv_dir, "group_metrics_*.csv")
    records = []
    for algorithm, df in frames.items():
        _require(df, ("algorithm", "basis", "group", metric),
                 f"group_metrics_{algorithm}.csv")
        part = df[df["basis"] == basis]
        for _, row in part.iterrows():
            records.append((row["algorithm"], row["group"], row[metric]))
    data = pd.DataFrame(records, columns=["algorithm", "group", metric])
    algorithms = sorted(data["algorithm"].unique())
    x = np.arange(len(algorithms))
    width = 0.25
    fig, ax = plt.subplots(figsize=(9, 4))
    for offset, group in zip((-width, 0, width), GROUP_ORDER):
        vals = [data[(data["algorithm"] == a) & (data["group"] == group)][metric].iloc[0]
                if len(data[(data["algorithm"] == a) & (data["group"] == group)])
                else np.nan
                for a in algorithms]
        ax.bar(x + offset, vals, width, label=group, color=GROUP_COLORS[group])
    ax.set_xticks(x)
    ax.set_xticklabels(algorithms, rotation=20)
    ax.set_ylabel(metric.upper())
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return fig, {"algorithms": algorithms, "n_points": len(data)}


def render_pl_groups(csv_dir: Path):
    return _render_group_bars(csv_dir, "pl", "item",
                              "Popularity lift per user group (item basis)")


def render_upd_groups(csv_dir: Path):
    return _render_group_bars(csv_dir, "upd", "item",
                              "User popularity deviation per user group (item basis)")


def render_pl_genre_groups(csv_dir: Path):
    return _render_group_bars(csv_dir, "pl", "genre",
                              "Popularity lift per genre-based user group")


def render_upd_genre_groups(csv_dir: Path):
    return _render_group_bars(csv_dir, "upd", "genre",
                              "User popularity deviation per genre-based user group")


def render_item_genre_scatter(csv_dir: Path):
    df = _read(csv_dir, "user_groups.csv")
    _require(df, ("user_id", "basis", "group", "app"), "user_groups.csv")
    item = df[df["basis"] == "item"].set_index("user_id")
    genre = df[df["basis"] == "genre"].set_index("user_id")
    joined = item.join(genre, lsuffix="_item", rsuffix="_genre", how="inner")
    fig, ax = plt.subplots(figsize=(6, 5))
    for group in GROUP_ORDER:
        part = joined[joined["group_item"] == group]
        ax.scatter(part["app_item"], part["app_genre"], s=6, alpha=0.5,
                   label=group, color=GROUP_COLORS[group])
    ax.set_xlabel("average item popularity of profile")
    ax.set_ylabel("average genre popularity of profile")
    ax.set_title("Item vs genre popularity of user profiles")
    ax.legend()
    return fig, {"n_points": len(joined)}


def render_overlap_heatmap(csv_dir: Path):
    df = _read(csv_dir, "overlap_matrix.csv")
    _require(df, ("item_group", "genre_group", "overlap_pct"), "overlap_matrix.csv")
    matrix = df.pivot(index="item_group", columns="genre_group",
                      values="overlap_pct").reindex(index=GROUP_ORDER,
                                                    columns=GROUP_ORDER)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(matrix.to_numpy(), cmap="Blues", vmin=0, vmax=100)
    ax.set_xticks(range(3), [f"{g} (genre)" for g in GROUP_ORDER], rotation=20)
    ax.set_yticks(range(3), [f"{g} (item)" for g in GROUP_ORDER])
    for i in range(3):
        for j in range(3):
            ax.text(j, i, f"{matrix.iloc[i, j]:.1f}", ha="center", va="center")
    fig.colorbar(im, ax=ax, label="% of item-based group")
    ax.set_title("Overlap between item- and genre-based groups")
    fig.tight_layout()
    return fig, {"n_points": 9}


def _render_sweep(csv_dir: Path, metric: str, title: str):
    df = _read(csv_dir, "alpha_sweep.csv")
    _require(df, ("algorithm", "alpha", metric), "alpha_sweep.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    for algorithm, part in df.groupby("algorithm"):
        part = part.dropna(subset=[metric])
        ax.plot(part["alpha"], part[metric], marker="o", label=algorithm)
    ax.set_xlabel("profile-inconsistency threshold")
    ax.set_ylabel(f"mean {metric.split('_')[-1].upper()} of retained Niche users")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, {"n_points": int(df[metric].notna().sum())}


def render_pi_sweep_pl(csv_dir: Path):
    return _render_sweep(csv_dir, "mean_pl",
                         "Popularity lift vs profile-inconsistency threshold")


def render_pi_sweep_upd(csv_dir: Path):
    return _render_sweep(csv_dir, "mean_upd",
                         "Popularity deviation vs profile-inconsistency threshold")


def _correlation_lookup(csv_dir: Path, y: str) -> dict:
    corr = _read(csv_dir, "correlations.csv")
    _require(corr, ("algorithm", "x", "y", "method", "rho"), "correlations.csv")
    rows = corr[(corr["x"] == "diversity") & (corr["y"] == y)
                & (corr["method"] == "pearson")]
    return dict(zip(rows["algorithm"], rows["rho"]))


def _render_diversity(csv_dir: Path, metric: str, title: str):
    frames = _read_glob(csv_dir, "user_metrics_*.csv")
    rho_by_algorithm = _correlation_lookup(csv_dir, metric)
    n = len(frames)
    ncols = min(3, n)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4 * ncols, 3.2 * nrows),
                             squeeze=False)
    annotations = {}
    for k, (algorithm, df) in enumerate(sorted(frames.items())):
        _require(df, ("diversity", metric), f"user_metrics_{algorithm}.csv")
        ax = axes[k // ncols][k % ncols]
        ax.scatter(df["diversity"], df[metric], s=4, alpha=0.35, color="#4c72b0")
        rho = rho_by_algorithm.get(algorithm)
        text = f"rho = {rho}" if rho is not None and not pd.isna(rho) else "rho = n/a"
        annotations[algorithm] = text
        ax.text(0.05, 0.92, text, transform=ax.transAxes, fontsize=9)
        ax.set_title(algorithm, fontsize=10)
        ax.set_xlabel("popularity diversity")
        ax.set_ylabel(metric.upper())
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.suptitle(title)
    fig.tight_layout()
    return fig, {"annotations": annotations, "n_points": n}


def render_diversity_pl(csv_dir: Path):
    return _render_diversity(csv_dir, "pl",
                             "Popularity diversity vs popularity lift")


def render_diversity_upd(csv_dir: Path):
    return _render_diversity(csv_dir, "upd",
                             "Popularity diversity vs popularity deviation")


def render_size_vs_app(csv_dir: Path):
    df = _read(csv_dir, "user_groups.csv")
    _require(df, ("basis", "group", "app", "profile_size"), "user_groups.csv")
    item = df[df["basis"] == "item"]
    fig, ax = plt.subplots(figsize=(6, 5))
    for group in GROUP_ORDER:
        part = item[item["group"] == group]
        ax.scatter(part["profile_size"], part["app"], s=6, alpha=0.5,
                   label=group, color=GROUP_COLORS[group])
    ax.set_xlabel("profile size")
    ax.set_ylabel("average profile popularity")
    ax.set_title("Profile size vs average profile popularity")
    ax.legend()
    return fig, {"n_points": len(item)}


@dataclass(frozen=True)
class RenderResult:
    figure_id: str
    status: str            # "rendered" or "failed"
    path: Path | None = None
    error: str = ""
    metadata: dict | None = None


def render_all(csv_dir, out_dir, image_format: str = "png") -> list:
    """Render every figure; individual failures do not stop the rest."""
    csv_dir = Path(csv_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    renderers = globals()
    results = []
    for spec in FIGURE_SPECS:
        try:
            fig, metadata = renderers[spec.renderer](csv_dir)
        except FigureInputError as exc:
            results.append(RenderResult(spec.figure_id, "failed", error=str(exc)))
            continue
        path = out_dir / f"{spec.figure_id}.{image_format}"
        fig.savefig(path)
        plt.close(fig)
        results.append(RenderResult(spec.figure_id, "rendered", path=path,
                                    metadata=metadata))
    return results
