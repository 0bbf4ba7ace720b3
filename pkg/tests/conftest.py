import numpy as np
import pytest

from popaudit.dataset import attach_genres, load_ratings


def write_ratings_csv(path, rows):
    lines = ["user,item,rating,timestamp"]
    lines += [f"{u},{i},{r},{t}" for u, i, r, t in rows]
    path.write_text("\n".join(lines) + "\n")


def make_dataset(tmp_path, rows, genres=None, name="ratings.csv"):
    """Build a Dataset from (user, item, rating, ts) rows via the public loaders."""
    path = tmp_path / name
    write_ratings_csv(path, rows)
    dataset = load_ratings(path, format="csv")
    if genres is not None:
        dataset = attach_genres(dataset, genres)
    return dataset


def random_rows(rng, n_users, n_items, n_interactions):
    """Unique random (user, item) pairs with ratings in 1..5."""
    pairs = set()
    while len(pairs) < n_interactions:
        pairs.add((int(rng.integers(1, n_users + 1)),
                   int(rng.integers(1, n_items + 1))))
    pairs = sorted(pairs)
    return [(u, i, int(rng.integers(1, 6)), int(rng.integers(0, 10 ** 6)))
            for u, i in pairs]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
