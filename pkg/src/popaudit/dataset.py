"""MovieLens-style rating/genre loading and deterministic per-user splits."""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .validation import ConfigError, check_fraction

logger = logging.getLogger(__name__)

RATING_FORMATS = ("ml1m", "ml100k", "csv")
GENRE_FORMATS = ("ml1m_movies", "ml100k_item", "csv")

# Canonical ML-100K u.item genre flag order; "unknown" is kept as a genre name.
ML100K_GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)


class DataFormatError(ValueError):
    """Raised for unreadable, malformed, or empty input files."""


@dataclass(frozen=True)
class Dataset:
    """Immutable interaction data with dense internal user/item indices.

    ``user_ids`` / ``item_ids`` map dense indices back to the original ids
    (sorted ascending, so dense index order equals original id order).
    Interactions are stored canonically sorted by (user index, item index).
    ``genres`` is None until genre data is attached; genre-dependent
    operations require it.
    """

    user_ids: np.ndarray
    item_ids: np.ndarray
    user_index: dict = field(repr=False)
    item_index: dict = field(repr=False)
    u_idx: np.ndarray = field(repr=False)
    i_idx: np.ndarray = field(repr=False)
    rating: np.ndarray = field(repr=False)
    timestamp: np.ndarray = field(repr=False)
    genres: tuple | None = None
    genre_catalog: tuple = ()

    def __post_init__(self):
        if len(self.u_idx) == 0:
            raise DataFormatError("empty dataset")
        if self.rating.size and (self.rating.min() < 1.0 or self.rating.max() > 5.0):
            bad = self.rating[(self.rating < 1.0) | (self.rating > 5.0)][0]
            raise DataFormatError(f"rating outside [1,5]: {bad}")
        if self.u_idx.min() < 0 or self.u_idx.max() >= len(self.user_ids):
            raise DataFormatError("interaction references unknown user")
        if self.i_idx.min() < 0 or self.i_idx.max() >= len(self.item_ids):
            raise DataFormatError("interaction references unknown item")
        key = self.u_idx.astype(np.int64) * len(self.item_ids) + self.i_idx
        if len(np.unique(key)) != len(key):
            raise DataFormatError("duplicate (user, item) interaction")
        if self.genres is not None:
            if len(self.genres) != len(self.item_ids):
                raise DataFormatError("genre list length mismatch")
            if any(len(g) == 0 for g in self.genres):
                raise DataFormatError("item with empty genre list")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_interactions(self) -> int:
        return len(self.u_idx)

    @property
    def users(self) -> set:
        return set(self.user_ids.tolist())

    @property
    def items(self) -> set:
        return set(self.item_ids.tolist())


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_interactions: int
    density: float


@dataclass(frozen=True)
class SplitDataset:
    """Per-user train/test split; train and test share the id universe."""

    train: Dataset
    test: Dataset | None
    split_ratio: float
    seed: int
    dropped_users: tuple = ()


def _canonical_order(u_idx, i_idx, *arrays):
    order = np.lexsort((i_idx, u_idx))
    return tuple(a[order] for a in (u_idx, i_idx) + arrays)


def _build_dataset(users, items, ratings, timestamps,
                   user_ids=None, item_ids=None) -> Dataset:
    """Map original ids to dense indices and canonicalize interaction order.

    ``user_ids`` / ``item_ids`` fix the id universe explicitly (used to keep
    train/test index spaces aligned); by default the universe is derived
    from the interactions.
    """
    user_ids = np.unique(users) if user_ids is None else np.asarray(user_ids)
    item_ids = np.unique(items) if item_ids is None else np.asarray(item_ids)
    user_index = {u: k for k, u in enumerate(user_ids.tolist())}
    item_index = {i: k for k, i in enumerate(item_ids.tolist())}
    u_idx = np.searchsorted(user_ids, users).astype(np.int32)
    i_idx = np.searchsorted(item_ids, items).astype(np.int32)
    rating = np.asarray(ratings, dtype=np.float64)
    ts = np.asarray(timestamps, dtype=np.int64)
    u_idx, i_idx, rating, ts = _canonical_order(u_idx, i_idx, rating, ts)
    return Dataset(user_ids, item_ids, user_index, item_index,
                   u_idx, i_idx, rating, ts)


def _dedup_keep_latest(users, items, ratings, timestamps):
    """Keep the latest interaction per (user, item); file order breaks ties."""
    users = np.asarray(users)
    items = np.asarray(items)
    ratings = np.asarray(ratings, dtype=np.float64)
    ts = np.asarray(timestamps, dtype=np.int64)
    pos = np.arange(len(users))
    order = np.lexsort((pos, ts, items, users))
    users, items, ratings, ts = users[order], items[order], ratings[order], ts[order]
    # after the sort the last row of each (user, item) run is the winner
    last = np.ones(len(users), dtype=bool)
    if len(users) > 1:
        same = (users[1:] == users[:-1]) & (items[1:] == items[:-1])
        last[:-1] = ~same
    n_dup = int((~last).sum())
    if n_dup:
        logger.warning("dropped %d duplicate (user, item) ratings (kept latest)", n_dup)
    return users[last], items[last], ratings[last], ts[last]


def _parse_rating_line(line: str, sep: str, lineno: int, path):
    parts = line.rstrip("\n").split(sep)
    if len(parts) < 4:
        raise DataFormatError(f"{path}: malformed line {lineno}: {line.strip()!r}")
    try:
        return int(parts[0]), int(parts[1]), float(parts[2]), int(float(parts[3]))
    except ValueError as exc:
        raise DataFormatError(f"{path}: malformed line {lineno}: {exc}") from exc


def load_ratings(path, format: str = "ml1m") -> Dataset:
    """Load a ratings file into a :class:`Dataset`.

    Formats: ``ml1m`` (``UserID::MovieID::Rating::Timestamp``, latin-1),
    ``ml100k`` (tab-separated), ``csv`` (header ``user,item,rating,timestamp``).
    Duplicate (user, item) pairs keep the latest timestamp.
    """
    if format not in RATING_FORMATS:
        raise ConfigError(f"unknown ratings format {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="latin-1")
    except OSError as exc:
        raise DataFormatError(f"unreadable file {path}: {exc}") from exc

    users, items, ratings, stamps = [], [], [], []
    if format == "csv":
        rows = list(csv.reader(text.splitlines()))
        if rows and [c.strip().lower() for c in rows[0][:4]] == ["user", "item", "rating", "timestamp"]:
            rows = rows[1:]
        for lineno, row in enumerate(rows, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 4:
                raise DataFormatError(f"{path}: malformed line {lineno}: {row!r}")
            try:
                users.append(int(row[0]))
                items.append(int(row[1]))
                ratings.append(float(row[2]))
                stamps.append(int(float(row[3])))
            except ValueError as exc:
                raise DataFormatError(f"{path}: malformed line {lineno}: {exc}") from exc
    else:
        sep = "::" if format == "ml1m" else "\t"
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            u, i, r, t = _parse_rating_line(line, sep, lineno, path)
            users.append(u)
            items.append(i)
            ratings.append(r)
            stamps.append(t)

    if not users:
        raise DataFormatError("empty dataset")
    users, items, ratings, stamps = _dedup_keep_latest(users, items, ratings, stamps)
    return _build_dataset(users, items, ratings, stamps)


def load_genres(path, format: str = "ml1m_movies") -> dict:
    """Load an item -> genre-list mapping.

    Formats: ``ml1m_movies`` (``MovieID::Title::Genre1|Genre2``, latin-1),
    ``ml100k_item`` (pipe-separated u.item with 19 binary genre flags; the
    "unknown" flag is treated as a genre name), ``csv``
    (pipe-separated rows ``item|Genre1|Genre2|...``).
    """
    if format not in GENRE_FORMATS:
        raise ConfigError(f"unknown genre format {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="latin-1")
    except OSError as exc:
        raise DataFormatError(f"unreadable file {path}: {exc}") from exc

    mapping: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if format == "ml1m_movies":
            parts = line.split("::")
            if len(parts) < 3:
                raise DataFormatError(f"{path}: malformed line {lineno}: {line.strip()!r}")
            item, genre_field = parts[0], parts[-1]
            genre_list = [g for g in genre_field.strip().split("|") if g]
        elif format == "ml100k_item":
            parts = line.split("|")
            if len(parts) < 5 + len(ML100K_GENRES):
                raise DataFormatError(f"{path}: malformed line {lineno}: expected 19 genre flags")
            item = parts[0]
            flags = parts[-len(ML100K_GENRES):]
            genre_list = [name for name, f in zip(ML100K_GENRES, flags) if f.strip() == "1"]
        else:
            parts = [p for p in line.strip().split("|")]
            if len(parts) < 2:
                raise DataFormatError(f"{path}: malformed line {lineno}: {line.strip()!r}")
            item = parts[0]
            genre_list = [g for g in parts[1:] if g]
        if not genre_list:
            raise DataFormatError(f"{path}: item {item} has empty genre field (line {lineno})")
        try:
            key = int(item)
        except ValueError as exc:
            raise DataFormatError(f"{path}: malformed line {lineno}: {exc}") from exc
        mapping[key] = genre_list
    if not mapping:
        raise DataFormatError("empty genre file")
    return mapping


def attach_genres(dataset: Dataset, mapping: dict) -> Dataset:
    """Attach genre lists to a dataset.

    Items present in the ratings but absent from ``mapping`` are removed
    (with their interactions) and the removal is logged.
    """
    missing = [i for i in dataset.item_ids.tolist() if i not in mapping]
    if missing:
        logger.warning("dropping %d items with no genre entry", len(missing))
        keep_items = np.array([i for i in dataset.item_ids.tolist() if i in mapping])
        keep_set = set(keep_items.tolist())
        mask = np.fromiter(
            (dataset.item_ids[k] in keep_set for k in dataset.i_idx),
            dtype=bool, count=len(dataset.i_idx),
        )
        if not mask.any():
            raise DataFormatError("empty dataset after dropping genre-less items")
        orig_users = dataset.user_ids[dataset.u_idx[mask]]
        orig_items = dataset.item_ids[dataset.i_idx[mask]]
        base = _build_dataset(orig_users, orig_items,
                              dataset.rating[mask], dataset.timestamp[mask])
    else:
        base = dataset
    genre_lists = tuple(tuple(mapping[i]) for i in base.item_ids.tolist())
    catalog = tuple(sorted({g for gl in genre_lists for g in gl}))
    return Dataset(base.user_ids, base.item_ids, base.user_index, base.item_index,
                   base.u_idx, base.i_idx, base.rating, base.timestamp,
                   genres=genre_lists, genre_catalog=catalog)


def load_dataset(ratings_path, genres_path, format: str = "ml1m") -> Dataset:
    """Load ratings and genres together; format names pair up by dataset."""
    genre_format = {"ml1m": "ml1m_movies", "ml100k": "ml100k_item", "csv": "csv"}[format]
    dataset = load_ratings(ratings_path, format)
    mapping = load_genres(genres_path, genre_format)
    return attach_genres(dataset, mapping)


def _user_entropy(seed: int, user_id) -> list:
    """Stable per-user seed material; string ids hash via sha256."""
    if isinstance(user_id, (int, np.integer)):
        return [int(seed), int(user_id)]
    digest = hashlib.sha256(str(user_id).encode("utf-8")).digest()
    return [int(seed), int.from_bytes(digest[:8], "little")]


def split(dataset: Dataset, ratio: float = 0.8, seed: int = 0) -> SplitDataset:
    """Split each user's profile uniformly at random into train/test.

    The permutation for a user depends only on (seed, original user id), so
    identical inputs reproduce identical splits. ``|train_u|`` is
    round(ratio * |profile_u|) with the remainder going to test. Users with
    fewer than 2 interactions, or whose rounded train share is 0, are
    dropped and logged.
    """
    ratio = check_fraction(ratio, "split ratio")
    train_rows, test_rows = [], []
    dropped = []
    boundaries = np.searchsorted(dataset.u_idx, np.arange(dataset.n_users + 1))
    for u in range(dataset.n_users):
        lo, hi = boundaries[u], boundaries[u + 1]
        n = hi - lo
        if n < 2:
            dropped.append(dataset.user_ids[u])
            continue
        n_train = int(round(ratio * n))
        if n_train < 1:
            dropped.append(dataset.user_ids[u])
            continue
        rng = np.random.default_rng(_user_entropy(seed, dataset.user_ids[u]))
        perm = rng.permutation(n)
        rows = np.arange(lo, hi)[perm]
        train_rows.append(rows[:n_train])
        test_rows.append(rows[n_train:])
    if dropped:
        logger.warning("dropped %d users with too-small profiles from the split", len(dropped))
    if not train_rows:
        raise DataFormatError("no users left after split")

    train_rows = np.concatenate(train_rows)
    test_rows = np.concatenate(test_rows) if test_rows else np.array([], dtype=int)
    dropped_set = set(np.asarray(dropped).tolist()) if dropped else set()
    kept_users = np.array([u for u in dataset.user_ids.tolist() if u not in dropped_set])

    def subset(rows) -> Dataset | None:
        # train and test share the same (retained users, all items) universe
        if len(rows) == 0:
            return None
        orig_users = dataset.user_ids[dataset.u_idx[rows]]
        orig_items = dataset.item_ids[dataset.i_idx[rows]]
        base = _build_dataset(orig_users, orig_items,
                              dataset.rating[rows], dataset.timestamp[rows],
                              user_ids=kept_users, item_ids=dataset.item_ids)
        if dataset.genres is None:
            return base
        return Dataset(base.user_ids, base.item_ids, base.user_index, base.item_index,
                       base.u_idx, base.i_idx, base.rating, base.timestamp,
                       genres=dataset.genres, genre_catalog=dataset.genre_catalog)

    return SplitDataset(train=subset(train_rows), test=subset(test_rows),
                        split_ratio=ratio, seed=seed, dropped_users=tuple(dropped))


def stats(dataset: Dataset) -> DatasetStats:
    """Exact user/item/interaction counts and matrix density."""
    return DatasetStats(
        n_users=dataset.n_users,
        n_items=dataset.n_items,
        n_interactions=dataset.n_interactions,
        density=dataset.n_interactions / (dataset.n_users * dataset.n_items),
    )


def rating_matrix(dataset: Dataset) -> sp.csr_matrix:
    """Users x items CSR matrix of explicit rating values."""
    return sp.csr_matrix(
        (dataset.rating, (dataset.u_idx, dataset.i_idx)),
        shape=(dataset.n_users, dataset.n_items),
    )


def user_profiles(dataset: Dataset) -> list:
    """Per-user arrays of interacted item indices, in canonical order."""
    boundaries = np.searchsorted(dataset.u_idx, np.arange(dataset.n_users + 1))
    return [dataset.i_idx[boundaries[u]:boundaries[u + 1]] for u in range(dataset.n_users)]
