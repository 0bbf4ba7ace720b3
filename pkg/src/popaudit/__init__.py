"""popaudit: user-centered popularity-bias audit for top-N recommenders."""

from .dataset import (
    Dataset,
    DatasetStats,
    DataFormatError,
    SplitDataset,
    attach_genres,
    load_dataset,
    load_genres,
    load_ratings,
    rating_matrix,
    split,
    stats,
    user_profiles,
)
from .metrics import (
    CorrelationResult,
    GroupReport,
    group_reports,
    jsd,
    ndcg_at_k,
    pearson,
    popularity_lift,
    precision_at_k,
    recall_at_k,
    recommendation_popularity,
    recommendation_ratios,
    spearman,
    upd,
)
from .popularity import (
    GROUP_NAMES,
    GenrePartition,
    GenrePopularityTable,
    ItemPartition,
    ItemPopularityTable,
    UserGroupAssignment,
    entropy_bits,
    genre_popularity,
    group_overlap,
    group_users,
    item_popularity,
    partition_genres,
    partition_items,
    popularity_diversity,
    profile_inconsistency,
    profile_popularity,
    profile_ratios,
    profile_ratios_genre,
)
from .recommenders import (
    ALGORITHMS,
    BPRRecommender,
    BiasedMFRecommender,
    ItemKNNRecommender,
    ModelSpec,
    PopularRecommender,
    RandomRecommender,
    TrainingDivergedError,
    UserKNNRecommender,
    grid_search,
)

__version__ = "0.1.0"


def __getattr__(name):
    # pipeline pulls in pandas; keep the base import light
    if name in ("AuditConfig", "AuditReport", "run_audit", "emit_reports"):
        from . import pipeline

        return getattr(pipeline, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
