"""End-to-end audit orchestration: load, split, group, fit, measure, emit."""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd

from . import __version__
from .dataset import Dataset, load_dataset, rating_matrix, split, stats, user_profiles
from .metrics import (
    group_reports,
    jsd,
    ndcg_at_k,
    pearson,
    precision_at_k,
    recall_at_k,
    spearman,
)
from .popularity import (
    GROUP_NAMES,
    NICHE,
    all_genre_profile_popularity,
    all_profile_inconsistency,
    all_profile_popularity,
    entropy_bits,
    genre_popularity,
    group_overlap,
    group_users,
    inconsistency_flags,
    item_genre_group_shares,
    item_popularity,
    partition_genres,
    partition_items,
    profile_ratios,
    profile_ratios_genre,
    profile_sizes,
)
from .recommenders import ALGORITHMS, ModelSpec, TrainingDivergedError, grid_search
from .validation import ConfigError, check_fraction, check_positive_int

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DEFAULT_MODEL_PARAMS = {
    "UserKNN": {"k": 50, "shrink": 15.0},
    "ItemKNN": {"k": 100, "shrink": 600.0},
    "BiasedMF": {"factors": 20, "learn_rate": 0.01, "reg": 0.05, "epochs": 40},
    "BPR": {"factors": 10, "learn_rate": 0.03, "reg": 0.02, "epochs": 5},
    "Popular": {},
    "Random": {},
}

# stable sub-seed index per stage/algorithm, fanned out from the run seed
_SEED_ROLES = {"split": 0, "grid": 1, "UserKNN": 10, "ItemKNN": 11,
               "BiasedMF": 12, "BPR": 13, "Popular": 14, "Random": 15}


@dataclass
class AuditConfig:
    """Declarative description of one audit run."""

    ratings_path: str
    genres_path: str
    format: str = "ml1m"
    split_ratio: float = 0.8
    seed: int = 1
    head_frac: float = 0.2
    tail_frac: float = 0.2
    user_quantile: float = 0.2
    list_size: int = 10
    algorithms: tuple = ("UserKNN", "ItemKNN", "BiasedMF", "BPR", "Popular", "Random")
    model_params: dict = field(default_factory=dict)
    grids: dict | None = None
    grid_metric: str = "ndcg"
    alphas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    out_dir: str = "audit-out"
    grouping_order: str = "niche_first"
    threads: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        check_fraction(self.split_ratio, "split_ratio")
        check_fraction(self.head_frac, "head_frac")
        check_fraction(self.tail_frac, "tail_frac")
        check_fraction(self.user_quantile, "user_quantile")
        check_positive_int(self.list_size, "list_size")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}; "
                                  f"expected one of {sorted(ALGORITHMS)}")
        for name in self.model_params:
            if name not in ALGORITHMS:
                raise ConfigError(f"model_params for unknown algorithm {name!r}")
        alphas = tuple(float(a) for a in self.alphas)
        if list(alphas) != sorted(alphas) or any(not 0 <= a <= 1 for a in alphas):
            raise ConfigError("alphas must be ascending fractions in [0, 1]")
        self.alphas = alphas
        self.algorithms = tuple(self.algorithms)
        if self.grouping_order not in ("niche_first", "blockbuster_first"):
            raise ConfigError(f"unknown grouping_order {self.grouping_order!r}")
        if self.grid_metric not in ("precision", "recall", "ndcg"):
            raise ConfigError(f"unknown grid_metric {self.grid_metric!r}")

    @classmethod
    def from_json(cls, path, **overrides) -> "AuditConfig":
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["algorithms"] = list(self.algorithms)
        out["alphas"] = list(self.alphas)
        return out


def _sub_seed(seed: int, role: str) -> int:
    rng = np.random.default_rng([seed, _SEED_ROLES[role]])
    return int(rng.integers(0, 2 ** 31 - 1))


def worker_count(config: AuditConfig, n_tasks: int) -> int:
    limit = os.environ.get("POPAUDIT_THREADS")
    cap = int(limit) if limit else (os.cpu_count() or 1)
    if config.threads:
        cap = min(cap, config.threads)
    return max(1, min(cap, n_tasks))


@dataclass
class AlgorithmResult:
    name: str
    spec: ModelSpec
    recs: np.ndarray
    rec_scores: np.ndarray
    user_metrics: pd.DataFrame
    group_metrics: pd.DataFrame
    accuracy: dict
    grid_log: list | None = None


@dataclass
class AuditReport:
    config: AuditConfig
    stats: dict
    users: pd.DataFrame
    item_partition: pd.DataFrame
    genre_partition: pd.DataFrame
    overlap: pd.DataFrame
    algorithms: dict
    alpha_sweep: pd.DataFrame
    correlations: pd.DataFrame
    accuracy: pd.DataFrame
    failures: dict
    manifest: dict
    item_ids: np.ndarray = None  # original item id per internal index


def _test_sets(test: Dataset | None) -> dict:
    if test is None:
        return {}
    bounds = np.searchsorted(test.u_idx, np.arange(test.n_users + 1))
    return {u: set(test.i_idx[bounds[u]:bounds[u + 1]].tolist())
            for u in range(test.n_users)}


def _evaluate_algorithm(name, config, train_X, artifacts, test_sets, train):
    """Fit one algorithm and compute its per-user and group metrics."""
    params = dict(DEFAULT_MODEL_PARAMS.get(name, {}))
    params.update(config.model_params.get(name, {}))
    seed = _sub_seed(config.seed, name)
    grid_log = None
    if config.grids is not None and name in config.grids:
        inner = split(train, 0.9, _sub_seed(config.seed, "grid"))
        inner_sets = _test_sets(inner.test)
        best, grid_log = grid_search(name, rating_matrix(inner.train), inner_sets,
                                     grid=config.grids[name], n=config.list_size,
                                     target_metric=config.grid_metric, seed=seed)
        params = dict(best.params)
    spec = ModelSpec(name, params, seed=seed)
    model = spec.build().fit(train_X)
    recs, scores = model.recommend_all(config.list_size)

    table = artifacts["table"]
    ipart = artifacts["ipart"]
    app = artifacts["app"]
    ratios_item = artifacts["ratios_item"]
    arp = table.pop_of[recs].mean(axis=1)
    pl = (arp - app) / app
    n_users = len(app)
    q = np.stack([np.bincount(ipart.group_of[recs[u]].astype(np.int64), minlength=3)
                  for u in range(n_users)]).astype(float)
    q /= q.sum(axis=1, keepdims=True)
    upd = np.array([jsd(ratios_item[u], q[u]) for u in range(n_users)])

    k = config.list_size
    precision = np.full(n_users, np.nan)
    recall = np.full(n_users, np.nan)
    ndcg = np.full(n_users, np.nan)
    for u, test_items in test_sets.items():
        if not test_items:
            continue
        precision[u] = precision_at_k(recs[u], test_items, k)
        recall[u] = recall_at_k(recs[u], test_items, k)
        ndcg[u] = ndcg_at_k(recs[u], test_items, k)

    users = artifacts["users_df"]
    user_metrics = pd.DataFrame({
        "user_id": users["user_id"],
        "group_item": users["group_item"],
        "group_genre": users["group_genre"],
        "app": app,
        "arp": arp,
        "pl": pl,
        "upd": upd,
        "pi": artifacts["pi"],
        "diversity": artifacts["diversity"],
        "profile_size": artifacts["sizes"],
        "precision": precision,
        "recall": recall,
        "ndcg": ndcg,
    })

    rows = []
    for basis, assignment in (("item", artifacts["assign_item"]),
                              ("genre", artifacts["assign_genre"])):
        for report in group_reports(assignment, app, arp, pl, upd):
            rows.append({"algorithm": name, "basis": basis, "group": report.group,
                         "n_users": report.n_users, "app": report.app,
                         "arp": report.arp, "pl": report.pl,
                         "pl_user_mean": report.pl_user_mean, "upd": report.upd})
    group_metrics = pd.DataFrame(rows)

    evaluated = int(np.isfinite(precision).sum())
    accuracy = {
        "algorithm": name,
        "precision": float(np.nanmean(precision)) if evaluated else None,
        "recall": float(np.nanmean(recall)) if evaluated else None,
        "ndcg": float(np.nanmean(ndcg)) if evaluated else None,
        "n_evaluated": evaluated,
        "n_excluded": int(n_users - evaluated),
    }
    return AlgorithmResult(name=name, spec=spec, recs=recs, rec_scores=scores,
                           user_metrics=user_metrics, group_metrics=group_metrics,
                           accuracy=accuracy, grid_log=grid_log)


def alpha_sweep(niche_users: np.ndarray, pl: np.ndarray, upd: np.ndarray,
                pi: np.ndarray, alphas) -> list:
    """Mean PL/UPD over the item-basis Niche users with PI <= alpha.

    Empty buckets yield rows with count 0 and null means.
    """
    rows = []
    for alpha in alphas:
        selected = niche_users[pi[niche_users] <= alpha]
        if len(selected) == 0:
            rows.append({"alpha": alpha, "n_users": 0,
                         "mean_pl": None, "mean_upd": None})
        else:
            rows.append({"alpha": alpha, "n_users": int(len(selected)),
                         "mean_pl": float(pl[selected].mean()),
                         "mean_upd": float(upd[selected].mean())})
    return rows


def correlation_analysis(diversity: np.ndarray, pl: np.ndarray,
                         upd: np.ndarray, algorithm: str) -> list:
    """Pearson (primary) and Spearman correlations of diversity vs PL/UPD."""
    rows = []
    for y, y_name in ((pl, "pl"), (upd, "upd")):
        for fn in (pearson, spearman):
            result = fn(diversity, y, "diversity", y_name)
            rows.append({"algorithm": algorithm, "x": "diversity", "y": y_name,
                         "method": result.method, "rho": result.rho,
                         "n": result.n, "note": result.note})
    return rows


def run_audit(config: AuditConfig) -> AuditReport:
    """Execute the full audit DAG; per-algorithm failures do not abort the run."""
    started = time.time()
    dataset = load_dataset(config.ratings_path, config.genres_path, config.format)
    source_stats = stats(dataset)
    sd = split(dataset, config.split_ratio, _sub_seed(config.seed, "split"))
    train, test = sd.train, sd.test

    table = item_popularity(train)
    ipart = partition_items(table, config.head_frac, config.tail_frac)
    gtable = genre_popularity(train)
    gpart = partition_genres(gtable, config.head_frac, config.tail_frac)
    shares = item_genre_group_shares(train, gpart)
    flags = inconsistency_flags(train, ipart, gpart)
    ratios_item = profile_ratios(train, ipart)
    ratios_genre = profile_ratios_genre(train, shares)
    assign_item = group_users(ratios_item, config.user_quantile, basis="item",
                              order=config.grouping_order)
    assign_genre = group_users(ratios_genre, config.user_quantile, basis="genre",
                               order=config.grouping_order)
    app = all_profile_popularity(train, table)
    gapp = all_genre_profile_popularity(train, gtable)
    pi = all_profile_inconsistency(train, flags)
    sizes = profile_sizes(train)
    diversity = np.array([entropy_bits(r) for r in ratios_item])
    diversity_genre = np.array([entropy_bits(r) for r in ratios_genre])
    overlap = group_overlap(assign_item, assign_genre)

    users_df = pd.DataFrame({
        "user_id": train.user_ids,
        "group_item": assign_item.label_names(),
        "group_genre": assign_genre.label_names(),
        "pi": pi,
        "profile_size": sizes,
    })
    artifacts = dict(table=table, ipart=ipart, app=app, ratios_item=ratios_item,
                     users_df=users_df, pi=pi, diversity=diversity, sizes=sizes,
                     assign_item=assign_item, assign_genre=assign_genre)
    test_sets = _test_sets(test)
    train_X = rating_matrix(train)

    algorithms, failures = {}, {}

    def run_one(name):
        return _evaluate_algorithm(name, config, train_X, artifacts, test_sets, train)

    workers = worker_count(config, len(config.algorithms))
    # a diverging model is recorded as failed; the others proceed
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {name: pool.submit(run_one, name) for name in config.algorithms}
            for name, fut in futures.items():
                try:
                    algorithms[name] = fut.result()
                except Exception as exc:
                    logger.error("algorithm %s failed: %s", name, exc)
                    failures[name] = f"{type(exc).__name__}: {exc}"
    else:
        for name in config.algorithms:
            try:
                algorithms[name] = run_one(name)
            except Exception as exc:
                logger.error("algorithm %s failed: %s", name, exc)
                failures[name] = f"{type(exc).__name__}: {exc}"

    niche_users = assign_item.members(NICHE)
    sweep_rows, corr_rows = [], []
    for name in config.algorithms:
        if name not in algorithms:
            continue
        result = algorithms[name]
        pl = result.user_metrics["pl"].to_numpy()
        upd = result.user_metrics["upd"].to_numpy()
        for row in alpha_sweep(niche_users, pl, upd, pi, config.alphas):
            sweep_rows.append({"algorithm": name, **row})
        corr_rows.extend(correlation_analysis(diversity, pl, upd, name))

    users_full = pd.DataFrame({
        "user_id": train.user_ids,
        "group_item": assign_item.label_names(),
        "group_genre": assign_genre.label_names(),
        "p_h_item": ratios_item[:, 0], "p_m_item": ratios_item[:, 1],
        "p_t_item": ratios_item[:, 2],
        "p_h_genre": ratios_genre[:, 0], "p_m_genre": ratios_genre[:, 1],
        "p_t_genre": ratios_genre[:, 2],
        "pi": pi, "diversity": diversity, "diversity_genre": diversity_genre,
        "app": app, "genre_app": gapp, "profile_size": sizes,
    })

    item_part_df = pd.DataFrame({
        "item_id": train.item_ids[table.ranked_items],
        "pop": table.ranked_pop,
        "group": np.array(["head", "mid", "tail"], dtype=object)[
            ipart.group_of[table.ranked_items]],
        "rank": np.arange(1, len(table.ranked_items) + 1),
    })
    genre_pos = {g: k for k, g in enumerate(gtable.genres)}
    genre_part_df = pd.DataFrame({
        "genre": list(gtable.ranked_genres),
        "mass": [gtable.mass[genre_pos[g]] for g in gtable.ranked_genres],
        "fraction": [gtable.fraction[genre_pos[g]] for g in gtable.ranked_genres],
        "group": [("head", "mid", "tail")[gpart.group_of[genre_pos[g]]]
                  for g in gtable.ranked_genres],
        "rank": np.arange(1, len(gtable.ranked_genres) + 1),
    })
    overlap_df = pd.DataFrame([
        {"item_group": GROUP_NAMES[a], "genre_group": GROUP_NAMES[b],
         "overlap_pct": overlap[a, b]}
        for a in range(3) for b in range(3)
    ])
    accuracy_df = pd.DataFrame([algorithms[n].accuracy for n in config.algorithms
                                if n in algorithms])

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "popaudit_version": __version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {"numpy": np.__version__, "pandas": pd.__version__},
        "dropped_users": [int(u) for u in sd.dropped_users],
        "train_interactions": int(train.n_interactions),
        "test_interactions": int(test.n_interactions if test is not None else 0),
        "failures": failures,
        "wall_time_s": round(time.time() - started, 3),
    }
    stats_dict = {
        "n_users": source_stats.n_users,
        "n_items": source_stats.n_items,
        "n_interactions": source_stats.n_interactions,
        "density": source_stats.density,
        "n_genres": len(dataset.genre_catalog),
        "n_train_users": train.n_users,
        "n_train_items": int(table.n_train_items),
    }
    return AuditReport(
        config=config, stats=stats_dict, users=users_full,
        item_partition=item_part_df, genre_partition=genre_part_df,
        overlap=overlap_df, algorithms=algorithms,
        alpha_sweep=pd.DataFrame(sweep_rows), correlations=pd.DataFrame(corr_rows),
        accuracy=accuracy_df, failures=failures, manifest=manifest,
        item_ids=train.item_ids,
    )


def _user_groups_long(report: AuditReport) -> pd.DataFrame:
    """Two rows per user (item and genre basis) as emitted to user_groups.csv."""
    users = report.users
    item_rows = pd.DataFrame({
        "user_id": users["user_id"], "basis": "item", "group": users["group_item"],
        "p_h": users["p_h_item"], "p_m": users["p_m_item"], "p_t": users["p_t_item"],
        "pi": users["pi"], "diversity": users["diversity"], "app": users["app"],
        "profile_size": users["profile_size"],
    })
    genre_rows = pd.DataFrame({
        "user_id": users["user_id"], "basis": "genre", "group": users["group_genre"],
        "p_h": users["p_h_genre"], "p_m": users["p_m_genre"], "p_t": users["p_t_genre"],
        "pi": users["pi"], "diversity": users["diversity_genre"],
        "app": users["genre_app"], "profile_size": users["profile_size"],
    })
    return pd.concat([item_rows, genre_rows], ignore_index=True)


def emit_reports(report: AuditReport, out_dir=None) -> list:
    """Write every CSV family, audit.json, and a text summary; returns paths."""
    from pathlib import Path

    out = Path(out_dir if out_dir is not None else report.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def save(df: pd.DataFrame, name: str):
        path = out / name
        df.to_csv(path, index=False)
        written.append(path)

    save(report.item_partition, "item_partition.csv")
    save(report.genre_partition, "genre_partition.csv")
    save(_user_groups_long(report), "user_groups.csv")
    save(report.overlap, "overlap_matrix.csv")
    if len(report.accuracy):
        save(report.accuracy, "accuracy.csv")
    if len(report.alpha_sweep):
        save(report.alpha_sweep, "alpha_sweep.csv")
    if len(report.correlations):
        save(report.correlations, "correlations.csv")

    group_frames = []
    for name, result in report.algorithms.items():
        user_ids = report.users["user_id"].to_numpy()
        n = result.recs.shape[1]
        recs_df = pd.DataFrame({
            "user_id": np.repeat(user_ids, n),
            "rank": np.tile(np.arange(1, n + 1), len(user_ids)),
            "item_id": report.item_ids[result.recs.ravel()],
            "score": result.rec_scores.ravel(),
        })
        save(recs_df, f"recs_{name}.csv")
        save(result.user_metrics, f"user_metrics_{name}.csv")
        save(result.group_metrics, f"group_metrics_{name}.csv")
        group_frames.append(result.group_metrics)

    audit = {
        "schema_version": SCHEMA_VERSION,
        "manifest": report.manifest,
        "stats": report.stats,
        "accuracy": report.accuracy.to_dict(orient="records"),
        "group_metrics": (pd.concat(group_frames, ignore_index=True)
                          .to_dict(orient="records") if group_frames else []),
        "overlap": report.overlap.to_dict(orient="records"),
        "alpha_sweep": report.alpha_sweep.to_dict(orient="records")
                       if len(report.alpha_sweep) else [],
        "correlations": report.correlations.to_dict(orient="records")
                        if len(report.correlations) else [],
        "partitions": {
            "n_head_items": int((report.item_partition["group"] == "head").sum()),
            "n_mid_items": int((report.item_partition["group"] == "mid").sum()),
            "n_tail_items": int((report.item_partition["group"] == "tail").sum()),
            "head_genres": report.genre_partition.loc[
                report.genre_partition["group"] == "head", "genre"].tolist(),
            "tail_genres": report.genre_partition.loc[
                report.genre_partition["group"] == "tail", "genre"].tolist(),
        },
        "failures": report.failures,
    }
    audit_path = out / "audit.json"
    audit_path.write_text(json.dumps(audit, indent=2, sort_keys=True))
    written.append(audit_path)

    summary_path = out / "summary.txt"
    summary_path.write_text(_text_summary(report))
    written.append(summary_path)
    return written


def _text_summary(report: AuditReport) -> str:
    lines = [
        f"popaudit {__version__} audit summary",
        f"dataset: {report.stats['n_users']} users, {report.stats['n_items']} items, "
        f"{report.stats['n_interactions']} interactions "
        f"({report.stats['n_genres']} genres)",
        f"split: ratio {report.config.split_ratio}, seed {report.config.seed}",
        "",
        "accuracy (@10):",
    ]
    for row in report.accuracy.to_dict(orient="records"):
        lines.append(f"  {row['algorithm']:10s} precision={row['precision']:.4f} "
                     f"recall={row['recall']:.4f} ndcg={row['ndcg']:.4f}")
    lines.append("")
    lines.append("group popularity lift / deviation (item basis):")
    for name, result in report.algorithms.items():
        gm = result.group_metrics
        gm = gm[gm["basis"] == "item"].set_index("group")
        lines.append(
            f"  {name:10s} PL N/D/B = "
            f"{gm.loc['Niche', 'pl']:.3f}/{gm.loc['Diverse', 'pl']:.3f}/"
            f"{gm.loc['Blockbuster', 'pl']:.3f}  UPD = "
            f"{gm.loc['Niche', 'upd']:.3f}/{gm.loc['Diverse', 'upd']:.3f}/"
            f"{gm.loc['Blockbuster', 'upd']:.3f}")
    if report.failures:
        lines.append("")
        lines.append(f"failed algorithms: {sorted(report.failures)}")
    lines.append("")
    return "\n".join(lines)
