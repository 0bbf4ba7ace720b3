"""Accuracy metrics and popularity-fairness metrics for top-N lists."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .popularity import (
    GROUP_NAMES,
    ItemPartition,
    ItemPopularityTable,
    UserGroupAssignment,
    group_ratio_vector,
)
from .validation import check_distribution


def precision_at_k(recommended: np.ndarray, test_items: set, k: int) -> float:
    """Fraction of the first k recommendations that hit the test set."""
    if k > len(recommended):
        raise ValueError(f"k={k} exceeds list length {len(recommended)}")
    hits = sum(1 for i in recommended[:k] if i in test_items)
    return hits / k


def recall_at_k(recommended: np.ndarray, test_items: set, k: int) -> float:
    """Fraction of the test set recovered in the first k recommendations."""
    if not test_items:
        raise ValueError("empty test set; exclude the user from averages instead")
    hits = sum(1 for i in recommended[:k] if i in test_items)
    return hits / len(test_items)


def ndcg_at_k(recommended: np.ndarray, test_items: set, k: int) -> float:
    """Binary-relevance nDCG: DCG over ranks 1..k, IDCG over min(|test|, k)."""
    if not test_items:
        raise ValueError("empty test set; exclude the user from averages instead")
    k = min(k, len(recommended))
    dcg = sum(
        1.0 / np.log2(r + 2)
        for r, item in enumerate(recommended[:k])
        if item in test_items
    )
    idcg = sum(1.0 / np.log2(r + 2) for r in range(min(len(test_items), k)))
    return float(dcg / idcg)


def recommendation_popularity(recommended: np.ndarray,
                              table: ItemPopularityTable) -> float:
    """Average recommendation popularity: mean pop(i) over the list."""
    if len(recommended) == 0:
        raise ValueError("empty recommendation list")
    pops = table.pop_of[np.asarray(recommended)]
    return float(pops.mean())


def popularity_lift(app: float, arp: float) -> float:
    """Relative popularity amplification of the list over the profile."""
    if app <= 0:
        raise ValueError("average profile popularity must be positive")
    return (arp - app) / app


def recommendation_ratios(recommended: np.ndarray,
                          partition: ItemPartition) -> np.ndarray:
    """H/M/T membership fractions of a recommendation list (sums to 1)."""
    return group_ratio_vector(np.asarray(recommended), partition)


def _kl_bits(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0
    return float((p[mask] * np.log2(p[mask] / m[mask])).sum())


def jsd(p, q) -> float:
    """Jensen-Shannon divergence with base-2 logs; bounded in [0, 1]."""
    p = check_distribution(p, "p")
    q = check_distribution(q, "q")
    m = 0.5 * (p + q)
    return 0.5 * _kl_bits(p, m) + 0.5 * _kl_bits(q, m)


def upd(profile_ratios, list_ratios) -> float:
    """User popularity deviation: JSD between profile and list group ratios."""
    return jsd(profile_ratios, list_ratios)


@dataclass(frozen=True)
class GroupReport:
    basis: str
    group: str
    n_users: int
    app: float
    arp: float
    pl: float            # ratio-of-means form: (ARP_G - APP_G) / APP_G
    pl_user_mean: float  # mean of per-user PL, emitted for comparison
    upd: float


def group_reports(assignment: UserGroupAssignment, app: np.ndarray,
                  arp: np.ndarray, pl: np.ndarray, upd_values: np.ndarray) -> list:
    """Aggregate per-user popularity metrics into per-group reports."""
    reports = []
    for code, name in enumerate(GROUP_NAMES):
        members = assignment.members(code)
        if len(members) == 0:
            raise ValueError(f"empty group {name}")
        app_g = float(app[members].mean())
        arp_g = float(arp[members].mean())
        reports.append(GroupReport(
            basis=assignment.basis,
            group=name,
            n_users=len(members),
            app=app_g,
            arp=arp_g,
            pl=(arp_g - app_g) / app_g,
            pl_user_mean=float(pl[members].mean()),
            upd=float(upd_values[members].mean()),
        ))
    return reports


@dataclass(frozen=True)
class CorrelationResult:
    x_name: str
    y_name: str
    method: str          # "pearson" or "spearman"
    rho: float | None
    n: int
    note: str = ""

    @property
    def is_null(self) -> bool:
        return self.rho is None


def pearson(x, y, x_name: str = "x", y_name: str = "y") -> CorrelationResult:
    """Pearson correlation; zero-variance input yields an explicit null result."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 samples")
    if np.std(x) == 0 or np.std(y) == 0:
        return CorrelationResult(x_name, y_name, "pearson", None, len(x),
                                 note="zero variance")
    xm = x - x.mean()
    ym = y - y.mean()
    rho = float((xm * ym).sum() / np.sqrt((xm ** 2).sum() * (ym ** 2).sum()))
    return CorrelationResult(x_name, y_name, "pearson", rho, len(x))


def _mid_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = np.arange(1, len(values) + 1)
    # average ranks within tied runs
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    return ranks


def spearman(x, y, x_name: str = "x", y_name: str = "y") -> CorrelationResult:
    """Spearman rank correlation (Pearson on mid-ranks)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    result = pearson(_mid_ranks(x), _mid_ranks(y), x_name, y_name)
    return CorrelationResult(x_name, y_name, "spearman", result.rho, result.n,
                             note=result.note)
