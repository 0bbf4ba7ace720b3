"""Figure catalog: what each figure needs and which renderer draws it."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: tuple                  # CSV file names (glob patterns allowed)
    required_columns: dict         # file name/pattern -> columns that must exist
    renderer: str                  # function name in render.py


FIGURE_SPECS = (
    FigureSpec("pop_dist", ("item_partition.csv",),
               {"item_partition.csv": ("rank", "pop", "group")},
               "render_pop_dist"),
    FigureSpec("genre_pop_dist", ("genre_partition.csv",),
               {"genre_partition.csv": ("genre", "mass", "group")},
               "render_genre_pop_dist"),
    FigureSpec("pl_groups", ("group_metrics_*.csv",),
               {"group_metrics_*.csv": ("algorithm", "basis", "group", "pl")},
               "render_pl_groups"),
    FigureSpec("upd_groups", ("group_metrics_*.csv",),
               {"group_metrics_*.csv": ("algorithm", "basis", "group", "upd")},
               "render_upd_groups"),
    FigureSpec("pl_genre_groups", ("group_metrics_*.csv",),
               {"group_metrics_*.csv": ("algorithm", "basis", "group", "pl")},
               "render_pl_genre_groups"),
    FigureSpec("upd_genre_groups", ("group_metrics_*.csv",),
               {"group_metrics_*.csv": ("algorithm", "basis", "group", "upd")},
               "render_upd_genre_groups"),
    FigureSpec("item_genre_scatter", ("user_groups.csv",),
               {"user_groups.csv": ("user_id", "basis", "group", "app")},
               "render_item_genre_scatter"),
    FigureSpec("overlap_heatmap", ("overlap_matrix.csv",),
               {"overlap_matrix.csv": ("item_group", "genre_group", "overlap_pct")},
               "render_overlap_heatmap"),
    FigureSpec("pi_sweep_pl", ("alpha_sweep.csv",),
               {"alpha_sweep.csv": ("algorithm", "alpha", "mean_pl")},
               "render_pi_sweep_pl"),
    FigureSpec("pi_sweep_upd", ("alpha_sweep.csv",),
               {"alpha_sweep.csv": ("algorithm", "alpha", "mean_upd")},
               "render_pi_sweep_upd"),
    FigureSpec("diversity_pl", ("user_metrics_*.csv", "correlations.csv"),
               {"user_metrics_*.csv": ("diversity", "pl"),
                "correlations.csv": ("algorithm", "x", "y", "method", "rho")},
               "render_diversity_pl"),
    FigureSpec("diversity_upd", ("user_metrics_*.csv", "correlations.csv"),
               {"user_metrics_*.csv": ("diversity", "upd"),
                "correlations.csv": ("algorithm", "x", "y", "method", "rho")},
               "render_diversity_upd"),
    FigureSpec("size_vs_app", ("user_groups.csv",),
               {"user_groups.csv": ("basis", "group", "app", "profile_size")},
               "render_size_vs_app"),
)
