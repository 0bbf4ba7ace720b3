"""Item/genre popularity, Head/Mid/Tail partitions, user groups, profile stats.

All statistics here are computed on the train split only; group labels are
therefore free of test leakage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .validation import check_fraction

GROUP_NAMES = ("Blockbuster", "Diverse", "Niche")
HEAD, MID, TAIL = 0, 1, 2
PART_NAMES = ("head", "mid", "tail")
BLOCKBUSTER, DIVERSE, NICHE = 0, 1, 2


@dataclass(frozen=True)
class ItemPopularityTable:
    """Per-item interaction fractions with a tie-stable descending ranking."""

    ranked_items: np.ndarray   # item indices, most popular first
    ranked_pop: np.ndarray     # fractions aligned to ranked_items
    pop_of: np.ndarray         # full-universe lookup; 0.0 for train-absent items
    n_interactions: int

    @property
    def n_train_items(self) -> int:
        return len(self.ranked_items)


@dataclass(frozen=True)
class ItemPartition:
    head: np.ndarray
    mid: np.ndarray
    tail: np.ndarray
    group_of: np.ndarray       # int8 over item universe; -1 = not in train
    head_frac: float = 0.2
    tail_frac: float = 0.2

    def sets(self):
        return self.head, self.mid, self.tail


@dataclass(frozen=True)
class GenrePopularityTable:
    """Fractional interaction mass per genre (each interaction spreads weight
    1 equally over its item's genres)."""

    genres: tuple              # catalog order (sorted names)
    mass: np.ndarray           # aligned to catalog
    ranked_genres: tuple       # by mass desc, name asc on ties
    total: float

    @property
    def fraction(self) -> np.ndarray:
        return self.mass / self.total


@dataclass(frozen=True)
class GenrePartition:
    genres: tuple
    head: tuple
    mid: tuple
    tail: tuple
    group_of: np.ndarray       # int8 aligned to catalog order
    head_frac: float = 0.2
    tail_frac: float = 0.2


@dataclass(frozen=True)
class UserGroupAssignment:
    """Blockbuster/Diverse/Niche label per user for one grouping basis."""

    basis: str                 # "item" or "genre"
    labels: np.ndarray         # int8 codes into GROUP_NAMES
    ratios: np.ndarray         # (n_users, 3) group-ratio vectors used

    def members(self, code: int) -> np.ndarray:
        return np.flatnonzero(self.labels == code)

    def label_names(self) -> np.ndarray:
        return np.array(GROUP_NAMES, dtype=object)[self.labels]


def item_popularity(train: Dataset) -> ItemPopularityTable:
    """pop(i) = fraction of train interactions on i; ties rank by item id."""
    counts = np.bincount(train.i_idx, minlength=train.n_items).astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise ValueError("empty train split")
    pop = counts / total
    present = np.flatnonzero(counts > 0)
    order = np.lexsort((present, -pop[present]))
    ranked = present[order]
    return ItemPopularityTable(ranked_items=ranked, ranked_pop=pop[ranked],
                               pop_of=pop, n_interactions=int(total))


def _cut_ranking(n: int, head_frac: float, tail_frac: float):
    if n < 5:
        raise ValueError(f"cannot partition fewer than 5 entries (got {n})")
    n_head = math.ceil(head_frac * n)
    n_tail = math.ceil(tail_frac * n)
    if n_head + n_tail > n:
        raise ValueError("head and tail cuts overlap")
    return n_head, n_tail


def partition_items(table: ItemPopularityTable,
                    head_frac: float = 0.2, tail_frac: float = 0.2) -> ItemPartition:
    """20/60/20 Head/Mid/Tail split by item count over the popularity ranking."""
    check_fraction(head_frac, "head_frac")
    check_fraction(tail_frac, "tail_frac")
    n = table.n_train_items
    n_head, n_tail = _cut_ranking(n, head_frac, tail_frac)
    head = table.ranked_items[:n_head]
    mid = table.ranked_items[n_head:n - n_tail]
    tail = table.ranked_items[n - n_tail:]
    group_of = np.full(len(table.pop_of), -1, dtype=np.int8)
    group_of[head] = HEAD
    group_of[mid] = MID
    group_of[tail] = TAIL
    return ItemPartition(head=head, mid=mid, tail=tail, group_of=group_of,
                         head_frac=head_frac, tail_frac=tail_frac)


def genre_popularity(train: Dataset) -> GenrePopularityTable:
    """Each interaction contributes 1/|genres(item)| to each of its genres."""
    if train.genres is None:
        raise ValueError("dataset has no genre information")
    catalog = train.genre_catalog
    genre_pos = {g: k for k, g in enumerate(catalog)}
    # per-item share vector over the catalog, then weight by interaction counts
    counts = np.bincount(train.i_idx, minlength=train.n_items).astype(np.float64)
    mass = np.zeros(len(catalog))
    for item, genre_list in enumerate(train.genres):
        c = counts[item]
        if c == 0.0:
            continue
        w = c / len(genre_list)
        for g in genre_list:
            mass[genre_pos[g]] += w
    total = float(mass.sum())
    name_rank = np.arange(len(catalog))
    order = np.lexsort((name_rank, -mass))
    ranked = tuple(catalog[k] for k in order)
    return GenrePopularityTable(genres=catalog, mass=mass, ranked_genres=ranked,
                                total=total)


def partition_genres(table: GenrePopularityTable,
                     head_frac: float = 0.2, tail_frac: float = 0.2) -> GenrePartition:
    """Head/Mid/Tail genre split with the same 20/60/20 rule over genre mass."""
    n = len(table.genres)
    n_head, n_tail = _cut_ranking(n, head_frac, tail_frac)
    head = table.ranked_genres[:n_head]
    mid = table.ranked_genres[n_head:n - n_tail]
    tail = table.ranked_genres[n - n_tail:]
    genre_pos = {g: k for k, g in enumerate(table.genres)}
    group_of = np.empty(n, dtype=np.int8)
    for g in head:
        group_of[genre_pos[g]] = HEAD
    for g in mid:
        group_of[genre_pos[g]] = MID
    for g in tail:
        group_of[genre_pos[g]] = TAIL
    return GenrePartition(genres=table.genres, head=head, mid=mid, tail=tail,
                          group_of=group_of, head_frac=head_frac, tail_frac=tail_frac)


def group_ratio_vector(items: np.ndarray, partition: ItemPartition) -> np.ndarray:
    """Fraction of a profile falling in each of H/M/T (sums to 1)."""
    if len(items) == 0:
        raise ValueError("empty profile")
    groups = partition.group_of[items]
    counts = np.bincount(groups[groups >= 0], minlength=3).astype(np.float64)
    return counts / counts.sum()


def item_genre_group_shares(dataset: Dataset, gpart: GenrePartition) -> np.ndarray:
    """(n_items, 3) matrix: row i spreads weight 1 over the genre groups of i."""
    if dataset.genres is None:
        raise ValueError("dataset has no genre information")
    genre_pos = {g: k for k, g in enumerate(gpart.genres)}
    shares = np.zeros((dataset.n_items, 3))
    for item, genre_list in enumerate(dataset.genres):
        w = 1.0 / len(genre_list)
        for g in genre_list:
            shares[item, gpart.group_of[genre_pos[g]]] += w
    return shares


def genre_ratio_vector(items: np.ndarray, shares: np.ndarray) -> np.ndarray:
    """Genre-basis analogue of :func:`group_ratio_vector` using fractional credit."""
    if len(items) == 0:
        raise ValueError("empty profile")
    total = shares[items].sum(axis=0)
    return total / total.sum()


def _profile_boundaries(dataset: Dataset) -> np.ndarray:
    return np.searchsorted(dataset.u_idx, np.arange(dataset.n_users + 1))


def profile_ratios(train: Dataset, partition: ItemPartition) -> np.ndarray:
    """(n_users, 3) item-basis group-ratio vectors for every train profile."""
    groups = partition.group_of[train.i_idx].astype(np.int64)
    flat = train.u_idx.astype(np.int64) * 3 + groups
    counts = np.bincount(flat, minlength=train.n_users * 3).reshape(train.n_users, 3)
    totals = counts.sum(axis=1, keepdims=True).astype(np.float64)
    if np.any(totals == 0):
        raise ValueError("user with empty train profile")
    return counts / totals


def profile_ratios_genre(train: Dataset, shares: np.ndarray) -> np.ndarray:
    """(n_users, 3) genre-basis group-ratio vectors for every train profile."""
    sums = np.zeros((train.n_users, 3))
    np.add.at(sums, train.u_idx, shares[train.i_idx])
    totals = sums.sum(axis=1, keepdims=True)
    if np.any(totals == 0):
        raise ValueError("user with empty train profile")
    return sums / totals


def group_users(ratios: np.ndarray, quantile: float = 0.2,
                basis: str = "item", order: str = "niche_first") -> UserGroupAssignment:
    """Assign Blockbuster/Diverse/Niche labels from group-ratio vectors.

    With ``order="niche_first"`` (default) the top 20% of users by tail
    ratio form Niche, then the top 20% by head ratio among the remaining
    users form Blockbuster; the rest are Diverse. ``"blockbuster_first"``
    swaps the extraction order. Rank ties break by ascending user index.
    """
    n_users = len(ratios)
    if n_users < 5:
        raise ValueError(f"cannot group fewer than 5 users (got {n_users})")
    if order not in ("niche_first", "blockbuster_first"):
        raise ValueError(f"unknown grouping order {order!r}")
    quantile = check_fraction(quantile, "quantile")
    n_cut = math.ceil(quantile * n_users)
    idx = np.arange(n_users)
    labels = np.full(n_users, DIVERSE, dtype=np.int8)

    def take_top(column: int, candidates: np.ndarray) -> np.ndarray:
        order_ = candidates[np.lexsort((candidates, -ratios[candidates, column]))]
        return order_[:n_cut]

    if order == "niche_first":
        niche = take_top(TAIL, idx)
        labels[niche] = NICHE
        rest = np.flatnonzero(labels != NICHE)
        blockbuster = take_top(HEAD, rest)
        labels[blockbuster] = BLOCKBUSTER
    else:
        blockbuster = take_top(HEAD, idx)
        labels[blockbuster] = BLOCKBUSTER
        rest = np.flatnonzero(labels != BLOCKBUSTER)
        niche = take_top(TAIL, rest)
        labels[niche] = NICHE
    return UserGroupAssignment(basis=basis, labels=labels, ratios=ratios)


def inconsistency_flags(dataset: Dataset, ipart: ItemPartition,
                        gpart: GenrePartition) -> np.ndarray:
    """Per-item flag: 0 if every genre of the item sits in the genre group
    matching the item's popularity group, else 1."""
    if dataset.genres is None:
        raise ValueError("dataset has no genre information")
    genre_pos = {g: k for k, g in enumerate(gpart.genres)}
    flags = np.ones(dataset.n_items, dtype=np.int8)
    for item, genre_list in enumerate(dataset.genres):
        ig = ipart.group_of[item]
        if ig < 0:
            continue
        if all(gpart.group_of[genre_pos[g]] == ig for g in genre_list):
            flags[item] = 0
    return flags


def profile_inconsistency(items: np.ndarray, flags: np.ndarray) -> float:
    """Fraction of a profile's items whose item/genre popularity groups clash."""
    if len(items) == 0:
        raise ValueError("empty profile")
    return float(flags[items].mean())


def all_profile_inconsistency(train: Dataset, flags: np.ndarray) -> np.ndarray:
    sums = np.bincount(train.u_idx, weights=flags[train.i_idx].astype(np.float64),
                       minlength=train.n_users)
    counts = np.bincount(train.u_idx, minlength=train.n_users)
    return sums / counts


def entropy_bits(p: np.ndarray) -> float:
    """Shannon entropy (base 2) of a distribution, with 0*log(0) = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def popularity_diversity(items: np.ndarray, partition: ItemPartition) -> float:
    """Entropy in bits of the H/M/T label distribution over a profile."""
    return entropy_bits(group_ratio_vector(items, partition))


def profile_popularity(items: np.ndarray, table: ItemPopularityTable) -> float:
    """Average profile popularity: mean pop(i) over the profile."""
    if len(items) == 0:
        raise ValueError("empty profile")
    return float(table.pop_of[items].mean())


def all_profile_popularity(train: Dataset, table: ItemPopularityTable) -> np.ndarray:
    sums = np.bincount(train.u_idx, weights=table.pop_of[train.i_idx],
                       minlength=train.n_users)
    counts = np.bincount(train.u_idx, minlength=train.n_users)
    return sums / counts


def item_genre_popularity(dataset: Dataset, gtable: GenrePopularityTable) -> np.ndarray:
    """Per-item genre popularity: mean fractional mass of the item's genres."""
    if dataset.genres is None:
        raise ValueError("dataset has no genre information")
    genre_pos = {g: k for k, g in enumerate(gtable.genres)}
    frac = gtable.fraction
    return np.array([
        float(np.mean([frac[genre_pos[g]] for g in genre_list]))
        for genre_list in dataset.genres
    ])


def all_genre_profile_popularity(train: Dataset,
                                 gtable: GenrePopularityTable) -> np.ndarray:
    """Genre-basis analogue of APP: mean per-item genre popularity over profiles."""
    gpop = item_genre_popularity(train, gtable)
    sums = np.bincount(train.u_idx, weights=gpop[train.i_idx], minlength=train.n_users)
    counts = np.bincount(train.u_idx, minlength=train.n_users)
    return sums / counts


def profile_sizes(train: Dataset) -> np.ndarray:
    return np.bincount(train.u_idx, minlength=train.n_users)


def group_overlap(a: UserGroupAssignment, b: UserGroupAssignment) -> np.ndarray:
    """3x3 overlap matrix: entry (GA, GB) = |GA intersect GB| / |GA| * 100.

    Rows follow ``a``'s groups and columns ``b``'s, both in GROUP_NAMES order.
    """
    if len(a.labels) != len(b.labels):
        raise ValueError("assignments cover different user universes")
    matrix = np.zeros((3, 3))
    for ga in range(3):
        members_a = a.members(ga)
        if len(members_a) == 0:
            raise ValueError(f"empty group {GROUP_NAMES[ga]} in basis {a.basis}")
        for gb in range(3):
            inter = np.count_nonzero(b.labels[members_a] == gb)
            matrix[ga, gb] = 100.0 * inter / len(members_a)
    return matrix
