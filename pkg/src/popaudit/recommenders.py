"""Six top-N recommenders behind a common sklearn-style estimator API.

Every estimator implements ``fit(X)`` on a users x items CSR rating matrix,
``user_scores(u)`` returning finite scores over the item universe, and
``recommend_top_n`` / ``recommend_all`` for ranked lists. Hyperparameters
follow the sklearn convention (`get_params` / `set_params` work), which is
what the grid-search harness relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.model_selection import ParameterGrid

from . import metrics as _metrics
from .validation import check_fitted, check_positive_int, check_ratings_matrix


class TrainingDivergedError(RuntimeError):
    """Raised when SGD training produces non-finite parameters or loss."""


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class BaseRecommender(BaseEstimator):
    """Shared fit bookkeeping and top-N list generation."""

    def _store_train(self, X) -> sp.csr_matrix:
        X = check_ratings_matrix(X)
        self.X_ = X
        self.n_users_, self.n_items_ = X.shape
        item_counts = np.diff(X.tocsc().indptr)
        # only items observed in training are eligible for recommendation
        self.candidate_mask_ = item_counts > 0
        return X

    def user_scores(self, user: int) -> np.ndarray:
        raise NotImplementedError

    def recommend_top_n(self, user: int, n: int = 10, exclude=None):
        """Top-n candidate items for ``user`` by score, ties by ascending item id.

        ``exclude`` defaults to the user's train interactions; excluded and
        non-candidate items never appear.
        """
        check_fitted(self, "X_")
        check_positive_int(n, "n")
        scores = np.asarray(self.user_scores(user), dtype=np.float64)
        valid = self.candidate_mask_.copy()
        if exclude is None:
            exclude = self.X_.indices[self.X_.indptr[user]:self.X_.indptr[user + 1]]
        exclude = np.asarray(exclude, dtype=np.intp)
        if len(exclude):
            valid[exclude] = False
        n_valid = int(valid.sum())
        if n_valid < n:
            raise ValueError(f"only {n_valid} candidate items remain for user {user}, need {n}")
        masked = np.where(valid, scores, -np.inf)
        order = np.lexsort((np.arange(self.n_items_), -masked))
        top = order[:n]
        return top, scores[top]

    def recommend_all(self, n: int = 10):
        """(n_users, n) arrays of recommended item indices and their scores."""
        items = np.empty((self.n_users_, n), dtype=np.int64)
        scores = np.empty((self.n_users_, n), dtype=np.float64)
        for u in range(self.n_users_):
            items[u], scores[u] = self.recommend_top_n(u, n=n)
        return items, scores


def _row_normalized(X: sp.csr_matrix, similarity: str) -> sp.csr_matrix:
    """Unit-normalize rows; "pearson" mean-centers nonzero entries first."""
    X = X.tocsr().astype(np.float64).copy()
    if similarity == "pearson":
        counts = np.diff(X.indptr)
        sums = np.asarray(X.sum(axis=1)).ravel()
        means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        X.data = X.data - np.repeat(means, counts)
    elif similarity != "cosine":
        raise ValueError(f"unknown similarity {similarity!r}")
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.diags(inv) @ X


class UserKNNRecommender(BaseRecommender):
    """User-based neighborhood model.

    score(u, i) is the similarity-weighted mean rating of the k raters of i
    most similar to u; items none of whose raters have positive weight get 0.
    ``shrink`` is added to the normalizing similarity mass, discounting
    predictions supported by few or weak neighbors (0 = plain weighted mean).
    """

    def __init__(self, k: int = 50, similarity: str = "cosine",
                 shrink: float = 0.0):
        self.k = k
        self.similarity = similarity
        self.shrink = shrink

    def fit(self, X):
        check_positive_int(self.k, "k")
        X = self._store_train(X)
        Xn = _row_normalized(X, self.similarity).astype(np.float32)
        dense = Xn.toarray()
        sims = dense @ dense.T
        np.fill_diagonal(sims, 0.0)  # a user is never their own neighbor
        self.scores_ = self._score_all(X, sims)
        return self

    def _score_all(self, X: sp.csr_matrix, sims: np.ndarray) -> np.ndarray:
        n_users, n_items = X.shape
        Xc = X.tocsc()
        scores = np.zeros((n_users, n_items), dtype=np.float32)
        for i in range(n_items):
            lo, hi = Xc.indptr[i], Xc.indptr[i + 1]
            if lo == hi:
                continue
            raters = Xc.indices[lo:hi]
            r = Xc.data[lo:hi].astype(np.float32)
            s = sims[:, raters]
            if len(raters) > self.k:
                top = np.argpartition(-s, self.k - 1, axis=1)[:, :self.k]
                s = np.take_along_axis(s, top, axis=1)
                r_sel = r[top]
            else:
                r_sel = np.broadcast_to(r, s.shape)
            num = (s * r_sel).sum(axis=1)
            den = np.abs(s).sum(axis=1) + np.float32(self.shrink)
            np.divide(num, den, out=scores[:, i], where=den > 0)
        return scores

    def user_scores(self, user: int) -> np.ndarray:
        check_fitted(self, "scores_")
        return self.scores_[user]


class ItemKNNRecommender(BaseRecommender):
    """Item-based neighborhood model.

    Each item keeps its k most similar items; score(u, i) aggregates u's
    ratings over those neighbors, normalized by the matched |similarity| mass.
    ``shrink`` is added to that mass so items matched by few weak neighbors
    rank low (0 = plain weighted mean).
    """

    def __init__(self, k: int = 50, similarity: str = "cosine",
                 shrink: float = 0.0):
        self.k = k
        self.similarity = similarity
        self.shrink = shrink

    def fit(self, X):
        check_positive_int(self.k, "k")
        X = self._store_train(X)
        Xn = _row_normalized(X.T.tocsr(), self.similarity).astype(np.float32)
        dense = Xn.toarray()
        sims = dense @ dense.T
        np.fill_diagonal(sims, 0.0)
        n_items = sims.shape[0]
        k = min(self.k, n_items - 1)
        if k >= 1:
            top = np.argpartition(-sims, k - 1, axis=1)[:, :k]
            rows = np.repeat(np.arange(n_items), k)
            cols = top.ravel()
            vals = sims[rows, cols]
            keep = vals != 0
            W = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])),
                              shape=(n_items, n_items))
        else:
            W = sp.csr_matrix((n_items, n_items))
        X32 = self.X_.astype(np.float32)
        num = (X32 @ W.T.tocsc()).toarray()
        binary = X32.copy()
        binary.data = np.ones_like(binary.data)
        Wabs = W.copy()
        Wabs.data = np.abs(Wabs.data)
        den = (binary @ Wabs.T.tocsc()).toarray() + np.float32(self.shrink)
        self.scores_ = np.divide(num, den, out=np.zeros_like(num),
                                 where=den > 0)
        return self

    def user_scores(self, user: int) -> np.ndarray:
        check_fitted(self, "scores_")
        return self.scores_[user]


def mf_sample_objective(mu, bu, bi, p, q, r, reg) -> float:
    """Per-rating BiasedMF loss: half squared error plus half-L2 on the
    touched parameters (so the SGD step is the classic e*grad - reg*theta)."""
    e = r - (mu + bu + bi + float(np.dot(p, q)))
    penalty = bu ** 2 + bi ** 2 + float(np.dot(p, p)) + float(np.dot(q, q))
    return 0.5 * (e ** 2 + reg * penalty)


def mf_sample_grads(mu, bu, bi, p, q, r, reg):
    """Descent gradients of :func:`mf_sample_objective` w.r.t. bu, bi, p, q."""
    e = r - (mu + bu + bi + float(np.dot(p, q)))
    return {
        "bu": -(e - reg * bu),
        "bi": -(e - reg * bi),
        "p": -(e * q - reg * p),
        "q": -(e * p - reg * q),
    }


class BiasedMFRecommender(BaseRecommender):
    """Biased matrix factorization trained by mini-batched SGD.

    Prediction is mu + b_u + b_i + p_u . q_i; factors start from a seeded
    N(0, 0.1^2), biases from zero. Training aborts if the epoch loss goes
    non-finite.
    """

    def __init__(self, factors: int = 50, learn_rate: float = 0.01,
                 reg: float = 0.01, epochs: int = 30, seed: int = 0,
                 batch_size: int = 8192):
        self.factors = factors
        self.learn_rate = learn_rate
        self.reg = reg
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size

    def fit(self, X):
        check_positive_int(self.factors, "factors")
        check_positive_int(self.epochs, "epochs")
        X = self._store_train(X)
        coo = X.tocoo()
        uu_all = coo.row.astype(np.intp)
        ii_all = coo.col.astype(np.intp)
        rr_all = coo.data.astype(np.float64)
        rng = np.random.default_rng(self.seed)
        self.mu_ = float(rr_all.mean())
        P = rng.normal(0.0, 0.1, (self.n_users_, self.factors))
        Q = rng.normal(0.0, 0.1, (self.n_items_, self.factors))
        bu = np.zeros(self.n_users_)
        bi = np.zeros(self.n_items_)
        lr, reg = self.learn_rate, self.reg
        for _ in range(self.epochs):
            perm = rng.permutation(len(rr_all))
            for start in range(0, len(perm), self.batch_size):
                sel = perm[start:start + self.batch_size]
                uu, ii, rr = uu_all[sel], ii_all[sel], rr_all[sel]
                pred = self.mu_ + bu[uu] + bi[ii] + (P[uu] * Q[ii]).sum(axis=1)
                e = rr - pred
                gP = e[:, None] * Q[ii] - reg * P[uu]
                gQ = e[:, None] * P[uu] - reg * Q[ii]
                np.add.at(bu, uu, lr * (e - reg * bu[uu]))
                np.add.at(bi, ii, lr * (e - reg * bi[ii]))
                np.add.at(P, uu, lr * gP)
                np.add.at(Q, ii, lr * gQ)
            pred = self.mu_ + bu[uu_all] + bi[ii_all] + (P[uu_all] * Q[ii_all]).sum(axis=1)
            loss = 0.5 * float(((rr_all - pred) ** 2).mean())
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"BiasedMF training loss became non-finite (lr={lr}, reg={reg})")
        self.P_, self.Q_, self.bu_, self.bi_ = P, Q, bu, bi
        return self

    def user_scores(self, user: int) -> np.ndarray:
        check_fitted(self, "P_")
        return self.mu_ + self.bu_[user] + self.bi_ + self.Q_ @ self.P_[user]


def bpr_triple_objective(pu, qi, qj, bi, bj, reg) -> float:
    """Per-triple BPR objective: ln sigma(x_ui - x_uj) minus half-L2 on the
    touched parameters."""
    d = float(np.dot(pu, qi)) + bi - (float(np.dot(pu, qj)) + bj)
    penalty = float(np.dot(pu, pu)) + float(np.dot(qi, qi)) + float(np.dot(qj, qj))
    penalty += bi ** 2 + bj ** 2
    return float(np.log(_sigmoid(d))) - 0.5 * reg * penalty


def bpr_triple_grads(pu, qi, qj, bi, bj, reg):
    """Ascent gradients of :func:`bpr_triple_objective`; s = sigma(-(x_ui - x_uj))."""
    d = float(np.dot(pu, qi)) + bi - (float(np.dot(pu, qj)) + bj)
    s = float(_sigmoid(-d))
    return {
        "pu": s * (qi - qj) - reg * pu,
        "qi": s * pu - reg * qi,
        "qj": -s * pu - reg * qj,
        "bi": s - reg * bi,
        "bj": -s - reg * bj,
    }


class BPRRecommender(BaseRecommender):
    """Bayesian personalized ranking on binarized feedback.

    Per epoch, one (user, positive, negative) triple is drawn for every
    train interaction; negatives are sampled uniformly from candidate items
    outside the user's profile. Preference score is p_u . q_i + b_i.
    """

    def __init__(self, factors: int = 50, learn_rate: float = 0.05,
                 reg: float = 0.01, epochs: int = 30, seed: int = 0,
                 batch_size: int = 8192):
        self.factors = factors
        self.learn_rate = learn_rate
        self.reg = reg
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size

    def fit(self, X):
        check_positive_int(self.factors, "factors")
        check_positive_int(self.epochs, "epochs")
        X = self._store_train(X)
        coo = X.tocoo()
        uu_all = coo.row.astype(np.intp)
        ii_all = coo.col.astype(np.intp)
        # sorted (user, item) keys make the negative-membership test a searchsorted
        seen_keys = np.sort(uu_all.astype(np.int64) * self.n_items_ + ii_all)
        candidates = np.flatnonzero(self.candidate_mask_)
        rng = np.random.default_rng(self.seed)
        P = rng.normal(0.0, 0.1, (self.n_users_, self.factors))
        Q = rng.normal(0.0, 0.1, (self.n_items_, self.factors))
        bi = np.zeros(self.n_items_)
        lr, reg = self.learn_rate, self.reg
        for _ in range(self.epochs):
            perm = rng.permutation(len(uu_all))
            for start in range(0, len(perm), self.batch_size):
                sel = perm[start:start + self.batch_size]
                uu, ii = uu_all[sel], ii_all[sel]
                jj = self._sample_negatives(rng, seen_keys, self.n_items_, uu, candidates)
                d = (P[uu] * (Q[ii] - Q[jj])).sum(axis=1) + bi[ii] - bi[jj]
                s = _sigmoid(-d)
                gP = s[:, None] * (Q[ii] - Q[jj]) - reg * P[uu]
                gQi = s[:, None] * P[uu] - reg * Q[ii]
                gQj = -s[:, None] * P[uu] - reg * Q[jj]
                np.add.at(P, uu, lr * gP)
                np.add.at(Q, ii, lr * gQi)
                np.add.at(Q, jj, lr * gQj)
                np.add.at(bi, ii, lr * (s - reg * bi[ii]))
                np.add.at(bi, jj, lr * (-s - reg * bi[jj]))
            if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q)) and np.all(np.isfinite(bi))):
                raise TrainingDivergedError(
                    f"BPR parameters became non-finite (lr={lr}, reg={reg})")
        self.P_, self.Q_, self.bi_ = P, Q, bi
        return self

    @staticmethod
    def _sample_negatives(rng, seen_keys, n_items, uu, candidates) -> np.ndarray:
        jj = candidates[rng.integers(0, len(candidates), size=len(uu))]
        for _ in range(100):
            keys = uu.astype(np.int64) * n_items + jj
            pos = np.searchsorted(seen_keys, keys)
            pos = np.minimum(pos, len(seen_keys) - 1)
            seen = seen_keys[pos] == keys
            if not seen.any():
                return jj
            jj = jj.copy()
            jj[seen] = candidates[rng.integers(0, len(candidates), size=int(seen.sum()))]
        raise TrainingDivergedError("negative sampling failed; profiles cover the catalog")

    def user_scores(self, user: int) -> np.ndarray:
        check_fitted(self, "P_")
        return self.Q_ @ self.P_[user] + self.bi_


class PopularRecommender(BaseRecommender):
    """Non-personalized most-popular recommendation by train interaction count."""

    def fit(self, X):
        X = self._store_train(X)
        self.counts_ = np.diff(X.tocsc().indptr).astype(np.float64)
        return self

    def user_scores(self, user: int) -> np.ndarray:
        check_fitted(self, "counts_")
        return self.counts_


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


class RandomRecommender(BaseRecommender):
    """Non-personalized random recommendation.

    Scores are a stateless hash of (seed, user, item), so lists are
    reproducible across runs and platforms for a fixed seed.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, X):
        self._store_train(X)
        return self

    def user_scores(self, user: int) -> np.ndarray:
        check_fitted(self, "X_")
        items = np.arange(self.n_items_, dtype=np.uint64)
        base = _splitmix64(np.asarray([np.uint64(self.seed) ^ _splitmix64(
            np.asarray([user], dtype=np.uint64))[0]], dtype=np.uint64))[0]
        mixed = _splitmix64(items * np.uint64(0x9E3779B97F4A7C15) ^ base)
        return mixed.astype(np.float64) / float(2 ** 64)


ALGORITHMS = {
    "UserKNN": UserKNNRecommender,
    "ItemKNN": ItemKNNRecommender,
    "BiasedMF": BiasedMFRecommender,
    "BPR": BPRRecommender,
    "Popular": PopularRecommender,
    "Random": RandomRecommender,
}

SEEDED = ("BiasedMF", "BPR", "Random")

DEFAULT_GRIDS = {
    "UserKNN": {"k": [10, 30, 50, 100]},
    "ItemKNN": {"k": [10, 30, 50, 100]},
    "BiasedMF": {"factors": [10, 50, 100], "learn_rate": [0.005, 0.01, 0.05],
                 "reg": [0.001, 0.01, 0.1], "epochs": [30, 100]},
    "BPR": {"factors": [10, 50, 100], "learn_rate": [0.005, 0.01, 0.05],
            "reg": [0.001, 0.01, 0.1], "epochs": [30, 100]},
    "Popular": {},
    "Random": {},
}


@dataclass(frozen=True)
class ModelSpec:
    """Algorithm name, hyperparameters, and seed for one recommender fit."""

    algorithm: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; "
                             f"expected one of {sorted(ALGORITHMS)}")
        valid = ALGORITHMS[self.algorithm]().get_params()
        unknown = set(self.params) - set(valid)
        if unknown:
            raise ValueError(f"unknown {self.algorithm} parameters: {sorted(unknown)}")

    def build(self) -> BaseRecommender:
        kwargs = dict(self.params)
        if self.algorithm in SEEDED:
            kwargs.setdefault("seed", self.seed)
        return ALGORITHMS[self.algorithm](**kwargs)


def evaluate_lists(model: BaseRecommender, test_sets: dict, n: int,
                   metric: str) -> float:
    """Mean accuracy metric over users with non-empty test sets."""
    fns = {"precision": _metrics.precision_at_k,
           "recall": _metrics.recall_at_k,
           "ndcg": _metrics.ndcg_at_k}
    fn = fns[metric]
    values = []
    for u, test_items in test_sets.items():
        if not test_items:
            continue
        items, _ = model.recommend_top_n(u, n=n)
        values.append(fn(items, test_items, n))
    if not values:
        raise ValueError("no users with non-empty test sets")
    return float(np.mean(values))


def grid_search(algorithm: str, inner_train, validation_sets: dict,
                grid: dict | None = None, n: int = 10,
                target_metric: str = "ndcg", seed: int = 0):
    """Fit every grid point on the inner train split and keep the best spec.

    ``validation_sets`` maps user index -> held-out item set carved from the
    outer train split (never the test set). Returns (best ModelSpec, log of
    per-point results). Ties keep the earliest grid point.
    """
    if grid is None:
        grid = DEFAULT_GRIDS[algorithm]
    points = list(ParameterGrid(grid)) if grid else [{}]
    if not points:
        raise ValueError("empty hyperparameter grid")
    best_spec, best_value, log = None, -np.inf, []
    for params in points:
        spec = ModelSpec(algorithm=algorithm, params=params, seed=seed)
        model = spec.build().fit(inner_train)
        value = evaluate_lists(model, validation_sets, n, target_metric)
        log.append({"algorithm": algorithm, "params": dict(params),
                    target_metric: value})
        if value > best_value:
            best_spec, best_value = spec, value
    return best_spec, log
