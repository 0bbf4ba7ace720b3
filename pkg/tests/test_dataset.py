import logging

import numpy as np
import pytest

from popaudit.dataset import (
    DataFormatError,
    attach_genres,
    load_dataset,
    load_genres,
    load_ratings,
    rating_matrix,
    split,
    stats,
    user_profiles,
)
from popaudit.validation import ConfigError

from conftest import make_dataset, random_rows, write_ratings_csv


def test_load_ml1m_format(tmp_path):
    path = tmp_path / "ratings.dat"
    path.write_text("1::10::5::100\n1::20::3::200\n2::10::4::300\n")
    ds = load_ratings(path, format="ml1m")
    assert ds.n_users == 2
    assert ds.n_items == 2
    assert ds.n_interactions == 3


def test_load_ml100k_format(tmp_path):
    path = tmp_path / "u.data"
    path.write_text("1\t10\t5\t100\n2\t10\t4\t300\n")
    ds = load_ratings(path, format="ml100k")
    assert ds.n_users == 2 and ds.n_items == 1


def test_csv_dedup_keeps_latest(tmp_path):
    ds = make_dataset(tmp_path, [(1, 1, 5, 0), (1, 1, 4, 10)])
    assert ds.n_interactions == 1
    assert ds.rating[0] == 4.0


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "ratings.csv"
    path.write_text("user,item,rating,timestamp\n")
    with pytest.raises(DataFormatError, match="empty dataset"):
        load_ratings(path, format="csv")


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "ratings.dat"
    path.write_text("1::10::5::100\n1::20::bad\n")
    with pytest.raises(DataFormatError, match="line 2"):
        load_ratings(path, format="ml1m")


def test_rating_out_of_range_rejected(tmp_path):
    with pytest.raises(DataFormatError, match=r"outside \[1,5\]"):
        make_dataset(tmp_path, [(1, 1, 6, 0), (1, 2, 3, 0)])


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_ratings(tmp_path / "x", format="nope")


def test_missing_file_is_unreadable(tmp_path):
    with pytest.raises(DataFormatError, match="unreadable"):
        load_ratings(tmp_path / "missing.dat", format="ml1m")


def test_load_genres_pipe_rows(tmp_path):
    path = tmp_path / "genres.csv"
    path.write_text("7|Action|Drama\n8|Comedy\n")
    mapping = load_genres(path, format="csv")
    assert mapping[7] == ["Action", "Drama"]
    assert mapping[8] == ["Comedy"]


def test_load_genres_ml1m_movies(tmp_path):
    path = tmp_path / "movies.dat"
    path.write_text("1::Toy Story (1995)::Animation|Children's|Comedy\n"
                    "2::Jumanji (1995)::Adventure|Children's|Fantasy\n",
                    encoding="latin-1")
    mapping = load_genres(path, format="ml1m_movies")
    assert mapping[1] == ["Animation", "Children's", "Comedy"]


def test_load_genres_ml100k_flags(tmp_path):
    flags = ["0"] * 19
    flags[0] = "1"  # the "unknown" flag counts as a genre
    path = tmp_path / "u.item"
    line = "9|Some Movie (1995)|01-Jan-1995||http://x|" + "|".join(flags)
    path.write_text(line + "\n")
    mapping = load_genres(path, format="ml100k_item")
    assert mapping[9] == ["unknown"]


def test_empty_genre_field_rejected(tmp_path):
    path = tmp_path / "movies.dat"
    path.write_text("1::Title (1995)::\n")
    with pytest.raises(DataFormatError, match="empty genre"):
        load_genres(path, format="ml1m_movies")


def test_items_without_genres_are_dropped(tmp_path, caplog):
    rows = [(1, 1, 5, 0), (1, 9, 3, 0), (2, 1, 4, 0)]
    with caplog.at_level(logging.WARNING):
        ds = make_dataset(tmp_path, rows, genres={1: ["Action"]})
    assert ds.n_items == 1
    assert ds.n_interactions == 2
    assert any("no genre entry" in r.message for r in caplog.records)


def test_genre_catalog_is_sorted_union(tmp_path):
    ds = make_dataset(tmp_path, [(1, 1, 5, 0), (1, 2, 3, 0)],
                      genres={1: ["Drama", "Action"], 2: ["Comedy"]})
    assert ds.genre_catalog == ("Action", "Comedy", "Drama")


def test_load_dataset_pairs_formats(tmp_path):
    write_ratings_csv(tmp_path / "r.csv", [(1, 7, 5, 0), (2, 7, 4, 0)])
    (tmp_path / "g.csv").write_text("7|Action|Drama\n")
    ds = load_dataset(tmp_path / "r.csv", tmp_path / "g.csv", format="csv")
    assert ds.genres[0] == ("Action", "Drama")


def test_split_counts(tmp_path):
    # 10 interactions at ratio 0.8 -> 8 train / 2 test; 5 -> 4 / 1
    rows = [(1, i, 3, i) for i in range(1, 11)] + [(2, i, 3, i) for i in range(1, 6)]
    ds = make_dataset(tmp_path, rows)
    sd = split(ds, ratio=0.8, seed=42)
    train_sizes = np.bincount(sd.train.u_idx, minlength=2)
    test_sizes = np.bincount(sd.test.u_idx, minlength=2)
    assert list(train_sizes) == [8, 4]
    assert list(test_sizes) == [2, 1]


def test_split_is_deterministic(tmp_path, rng):
    ds = make_dataset(tmp_path, random_rows(rng, 20, 30, 200))
    a = split(ds, ratio=0.8, seed=42)
    b = split(ds, ratio=0.8, seed=42)
    assert np.array_equal(a.train.u_idx, b.train.u_idx)
    assert np.array_equal(a.train.i_idx, b.train.i_idx)
    assert np.array_equal(a.test.timestamp, b.test.timestamp)
    c = split(ds, ratio=0.8, seed=43)
    assert not (np.array_equal(a.train.i_idx, c.train.i_idx)
                and np.array_equal(a.train.u_idx, c.train.u_idx))


def test_split_partitions_each_profile(tmp_path, rng):
    ds = make_dataset(tmp_path, random_rows(rng, 15, 25, 150))
    sd = split(ds, ratio=0.7, seed=7)
    src = {(ds.user_ids[u], ds.item_ids[i]) for u, i in zip(ds.u_idx, ds.i_idx)}
    tr = {(sd.train.user_ids[u], sd.train.item_ids[i])
          for u, i in zip(sd.train.u_idx, sd.train.i_idx)}
    te = {(sd.test.user_ids[u], sd.test.item_ids[i])
          for u, i in zip(sd.test.u_idx, sd.test.i_idx)}
    dropped = set(sd.dropped_users)
    kept_src = {(u, i) for u, i in src if u not in dropped}
    assert tr | te == kept_src
    assert tr & te == set()


def test_split_drops_tiny_profiles(tmp_path, caplog):
    rows = [(1, 1, 3, 0)] + [(2, i, 3, 0) for i in range(1, 6)]
    ds = make_dataset(tmp_path, rows)
    with caplog.at_level(logging.WARNING):
        sd = split(ds, ratio=0.8, seed=0)
    assert sd.dropped_users == (1,)
    assert sd.train.n_users == 1


def test_split_ratio_out_of_range(tmp_path):
    ds = make_dataset(tmp_path, [(1, 1, 3, 0), (1, 2, 3, 0)])
    with pytest.raises(ConfigError):
        split(ds, ratio=1.0, seed=0)


def test_id_round_trip_is_injective(tmp_path):
    rows = [(10, 100, 5, 0), (10, 300, 4, 0), (20, 100, 2, 0)]
    ds = make_dataset(tmp_path, rows)
    assert ds.user_ids[ds.user_index[10]] == 10
    assert ds.item_ids[ds.item_index[300]] == 300
    assert len(set(ds.user_index.values())) == ds.n_users
    assert len(set(ds.item_index.values())) == ds.n_items


def test_stats_density(tmp_path):
    ds = make_dataset(tmp_path, [(1, 1, 3, 0)])
    assert stats(ds).density == 1.0
    rows = [(1, 1, 3, 0), (1, 2, 3, 0), (2, 3, 3, 0), (2, 4, 3, 0)]
    s = stats(make_dataset(tmp_path, rows, name="r2.csv"))
    assert s.n_users == 2 and s.n_items == 4
    assert s.density == pytest.approx(0.5)


def test_rating_matrix_and_profiles(tmp_path):
    rows = [(1, 1, 5, 0), (1, 2, 3, 0), (2, 2, 4, 0)]
    ds = make_dataset(tmp_path, rows)
    X = rating_matrix(ds)
    assert X.shape == (2, 2)
    assert X[0, 1] == 3.0
    profiles = user_profiles(ds)
    assert list(profiles[0]) == [0, 1]
    assert list(profiles[1]) == [1]
