"""Deterministic MovieLens-shaped synthetic data.

Real MovieLens archives cannot be redistributed with the package, so these
generators produce rating/genre files in the exact ML-1M / ML-100K / CSV
layouts with the structural properties the audit cares about: a long-tailed
item popularity distribution, a genre catalog dominated by two genres,
users with heterogeneous popularity propensity and genre taste, popularity
loosely coupled to genre popularity, and rating values that carry a
learnable taste signal. Profiles are sampled without replacement via the
Gumbel top-k trick, so everything is reproducible from one seed.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ML1M_GENRES = (
    "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
    "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)

# Target interaction share per genre; Comedy and Drama dominate.
GENRE_WEIGHTS = {
    "Drama": 0.215, "Comedy": 0.180, "Action": 0.095, "Thriller": 0.080,
    "Romance": 0.068, "Adventure": 0.050, "Sci-Fi": 0.048, "Crime": 0.042,
    "Horror": 0.048, "Children's": 0.040, "War": 0.036, "Animation": 0.032,
    "Documentary": 0.020, "Film-Noir": 0.017, "Musical": 0.009,
    "Mystery": 0.008, "Fantasy": 0.0075, "Western": 0.006,
}


@dataclass(frozen=True)
class SynthConfig:
    n_users: int
    n_items: int
    target_interactions: int
    seed: int = 7
    pop_sigma: float = 1.8          # lognormal spread of item selection weight
    genre_pop_coupling: float = 0.0  # popular items lean to popular genres
    multi_genre_probs: tuple = (0.68, 0.26, 0.06)
    devotee_fraction: float = 0.180  # single-genre devotees across all temperatures
    devotee_conc: float = 0.06      # Dirichlet concentration for devotees
    focus_sigma: float = 0.7        # taste concentration spread for casual users
    taste_gamma: float = 2.2        # taste weight in item selection
    tau_mean: float = 0.95          # mean popularity temperature
    tau_sigma: float = 0.45
    size_tau_link: float = 0.28     # higher profile size -> lower temperature
    min_profile: int = 18
    niche_band_tightness: float = 0.8 # variance squeeze for niche-genre items
    niche_fan_fraction: float = 0.012 # users devoted to the niche-genre cluster
    purist_fraction: float = 0.04   # deep-cut devotees of the big genres
    fan_cap: int = 30               # max profile size for corner fans
    fan_tau: float = -0.2           # popularity temperature of corner fans
    fan_alpha: float = 0.8          # fan taste concentration over the corner
    purist_tau: float = -0.35
    purist_alpha: float = 0.9
    multi_shift: float = 0.6        # extra multi-genre pressure on big items
    band_coherence: float = 0.15    # extra genres come from nearby bands
    corner_scale: float = 4.0       # multiplier on corner genres' catalog share
    banded_pool_scale: float = 0.45 # banded genres keep compact catalogs
    spread_pool_boost: float = 3.0  # rare spread genres still have real catalogs
    assign_skew: float = 1.75       # big genres get an outsized back-catalog
    devotee_bias: float = 0.5       # devotees' favorite genre ~ base**bias
    mainstream_blend: float = 0.24  # every taste keeps a mainstream component
    rating_quality: float = 0.50    # rating lift of popular items
    rating_taste: float = 0.65      # rating lift of taste-matched items
    rating_noise: float = 0.70


# The devoted-fan corner: a coherent co-rated cluster sitting in the middle
# of the popularity range, whose genres also rank mid by interaction mass, so
# fan profiles are genre-consistent without being extremely tail-heavy. The
# four lightest genres by mass spread over the whole popularity range instead.
FAN_GENRES = ("Documentary", "Film-Noir")

# Genres whose catalogs are compact and whose demand is steady: their items
# cluster inside the mid range of the popularity ranking.
BANDED_GENRES = ("Horror", "Children's", "War", "Animation",
                 "Documentary", "Film-Noir")

# The four lightest genres by interaction mass; their items spread across the
# whole popularity range.
SPREAD_GENRES = ("Musical", "Mystery", "Fantasy", "Western")


# Characteristic popularity band per genre (mean shift of log selection
# weight). Mainstream genres span the whole range; the fan corner sits in
# the mid range; the rare genres spread mildly downward.
GENRE_POP_SHIFT = {
    "Drama": 0.0, "Comedy": 0.0, "Action": 0.15, "Thriller": 0.1,
    "Romance": -0.1, "Adventure": -0.1, "Sci-Fi": -0.15, "Crime": -0.2,
    "Horror": -0.35, "Children's": -0.35, "War": -0.45, "Musical": -0.95,
    "Animation": -0.35, "Mystery": -0.95, "Fantasy": -0.95,
    "Documentary": -0.5, "Film-Noir": -0.5, "Western": -0.95,
}


def _assign_genres(rng, cfg, z_pop):
    """Genre lists per item; popular items lean mildly to the big genres.

    Extra genres come from bands adjacent to the primary genre's band, so
    multi-genre combinations are popularity-coherent (Action|Thriller,
    Horror|Mystery) rather than arbitrary."""
    names = np.array(ML1M_GENRES, dtype=object)
    base = np.array([GENRE_WEIGHTS[g] for g in names])
    # catalog share is skewed: the big genres carry a deep back-catalog that
    # far outsizes their interaction share, the fan corner is over-represented
    # in items relative to its taste share
    taste = base / base.sum()
    base = base ** cfg.assign_skew
    for g in FAN_GENRES:
        base[list(names).index(g)] *= cfg.corner_scale
    for g in BANDED_GENRES:
        base[list(names).index(g)] *= cfg.banded_pool_scale
    for g in SPREAD_GENRES:
        base[list(names).index(g)] *= cfg.spread_pool_boost
    base = base / base.sum()
    z_base = np.log(base)
    z_base = (z_base - z_base.mean()) / z_base.std()
    pop_score = np.where(z_base > 0, 0.25 * z_base, 0.0)
    # blockbusters tend to be multi-genre, obscure features single-genre
    multi = 1.0 / (1.0 + np.exp(-(z_pop - 0.8)))
    shifts = np.array([GENRE_POP_SHIFT[g] for g in names])
    genre_lists = []
    for item in range(cfg.n_items):
        logits = np.log(base) + cfg.genre_pop_coupling * z_pop[item] * pop_score
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        primary = rng.choice(len(names), p=probs)
        p1, p2, p3 = cfg.multi_genre_probs
        shift = cfg.multi_shift * multi[item]
        probs_n = np.array([max(p1 - shift, 0.05), p2 + 0.6 * shift,
                            p3 + 0.4 * shift])
        probs_n /= probs_n.sum()
        n_genres = rng.choice([1, 2, 3], p=probs_n)
        coherence = np.exp(-0.5 * ((shifts - shifts[primary]) / cfg.band_coherence) ** 2)
        extra_src = taste * coherence
        extra_src /= extra_src.sum()
        chosen = {int(primary)}
        while len(chosen) < n_genres:
            chosen.add(int(rng.choice(len(names), p=extra_src)))
        genre_lists.append(tuple(sorted(names[k] for k in chosen)))
    return genre_lists


def _genre_share_matrix(genre_lists, n_genres_catalog):
    positions = {g: k for k, g in enumerate(ML1M_GENRES[:n_genres_catalog])}
    shares = np.zeros((len(genre_lists), n_genres_catalog))
    for item, gl in enumerate(genre_lists):
        for g in gl:
            shares[item, positions[g]] += 1.0 / len(gl)
    return shares


def generate(cfg: SynthConfig):
    """Return (users, items, ratings, timestamps, genre_lists) arrays.

    Users and items are numbered from 1. Every item receives at least one
    interaction so the loaded dataset has exactly cfg.n_items items.
    """
    rng = np.random.default_rng(cfg.seed)
    eps = rng.normal(0.0, 1.0, cfg.n_items)
    genre_lists = _assign_genres(rng, cfg, eps)
    shares = _genre_share_matrix(genre_lists, len(ML1M_GENRES))
    base = np.array([GENRE_WEIGHTS[g] for g in ML1M_GENRES])
    base = base / base.sum()
    # each item's popularity sits in its genres' band; most fan-corner items
    # get a strong downward shift and a tighter band, but a crossover slice
    # stays in the normal range (popular documentaries exist)
    shift_vec = np.array([GENRE_POP_SHIFT[g] for g in ML1M_GENRES])
    niche_cols = [ML1M_GENRES.index(g) for g in FAN_GENRES]
    banded_cols = [ML1M_GENRES.index(g) for g in BANDED_GENRES]
    banded_share = shares[:, banded_cols].sum(axis=1)
    item_shift = shares @ shift_vec
    sigma_i = cfg.pop_sigma * (1.0 - cfg.niche_band_tightness * banded_share)
    ln_w = sigma_i * eps + cfg.pop_sigma * item_shift
    # the taste temperature acts within genre bands so that genre composition
    # stays taste-driven while popularity preference stays temperature-driven
    ln_w_within = sigma_i * eps

    # profile sizes scaled to the interaction budget, then temperature with a
    # negative size link: heavy users reach deeper into the tail
    raw = rng.lognormal(np.log(60.0), 0.85, cfg.n_users)
    sizes = raw * (cfg.target_interactions / raw.sum())
    sizes = np.clip(np.round(sizes), cfg.min_profile, int(0.35 * cfg.n_items))
    sizes = sizes.astype(int)
    niche_fan_flags = rng.random(cfg.n_users) < cfg.niche_fan_fraction
    sizes[niche_fan_flags] = np.minimum(sizes[niche_fan_flags], cfg.fan_cap)
    purist_flags = (~niche_fan_flags) & (rng.random(cfg.n_users) < cfg.purist_fraction)
    ln_sizes = np.log(sizes)
    tau = rng.normal(cfg.tau_mean, cfg.tau_sigma, cfg.n_users)
    tau = tau - cfg.size_tau_link * (ln_sizes - ln_sizes.mean())
    # corner fans and deep-cut mainstream devotees are anti-popularity
    tau[niche_fan_flags] = rng.normal(cfg.fan_tau, 0.2, int(niche_fan_flags.sum()))
    tau[purist_flags] = rng.normal(cfg.purist_tau, 0.3, int(purist_flags.sum()))
    tau = np.clip(tau, -0.6, 2.3)

    devotee = rng.random(cfg.n_users) < cfg.devotee_fraction
    focus = np.where(devotee, cfg.devotee_conc,
                     rng.lognormal(np.log(1.2), cfg.focus_sigma, cfg.n_users))
    devotee_base = base ** cfg.devotee_bias
    devotee_base = devotee_base / devotee_base.sum()
    niche_fan = niche_fan_flags
    # ratings reward quality (tied to popularity) and taste match
    z_sel = (ln_w - ln_w.mean()) / ln_w.std()
    item_quality = cfg.rating_quality * z_sel + rng.normal(0.0, 0.25, cfg.n_items)

    users_out, items_out, ratings_out, ts_out = [], [], [], []
    uncovered = np.ones(cfg.n_items, dtype=bool)
    niche_alpha = np.full(len(base), 0.01)
    for k in niche_cols:
        niche_alpha[k] = cfg.fan_alpha
    head4 = np.argsort(-base)[:4]
    purist_alpha = np.full(len(base), 0.01)
    purist_alpha[head4] = cfg.purist_alpha
    for u in range(cfg.n_users):
        if niche_fan[u]:
            taste = rng.dirichlet(niche_alpha)
        elif purist_flags[u]:
            taste = rng.dirichlet(purist_alpha)
        elif devotee[u]:
            taste = rng.dirichlet(focus[u] * devotee_base * len(base))
        else:
            taste = rng.dirichlet(focus[u] * base * len(base))
        # nobody escapes the hits entirely; this also builds co-rating bridges
        # between niche pools and the head of the catalog
        taste = (1.0 - cfg.mainstream_blend) * taste + cfg.mainstream_blend * base
        affinity = shares @ taste
        ln_aff = np.log(affinity + 1e-9)
        keys = tau[u] * ln_w_within + cfg.taste_gamma * ln_aff
        keys = keys + rng.gumbel(size=cfg.n_items)
        n_u = sizes[u]
        picked = np.argpartition(-keys, n_u - 1)[:n_u]
        z_aff = (ln_aff - ln_aff.mean()) / (ln_aff.std() + 1e-12)
        raw_r = (3.45 + item_quality[picked]
                 + cfg.rating_taste * z_aff[picked]
                 + rng.normal(0.0, cfg.rating_noise, n_u))
        ratings = np.clip(np.round(raw_r), 1, 5).astype(int)
        picked_sorted = np.sort(picked)
        users_out.append(np.full(n_u, u + 1))
        items_out.append(picked_sorted + 1)
        ratings_out.append(ratings[np.argsort(picked)])
        ts_out.append(956700000 + np.arange(n_u) + u * 2000)
        uncovered[picked_sorted] = False

    # guarantee full item coverage: hand leftover items to the heaviest users
    leftovers = np.flatnonzero(uncovered)
    if len(leftovers):
        heavy = np.argsort(-sizes)[:len(leftovers)]
        for item, u in zip(leftovers, heavy):
            users_out.append(np.array([u + 1]))
            items_out.append(np.array([item + 1]))
            ratings_out.append(np.array([3]))
            ts_out.append(np.array([956700000 + 1999]))

    users = np.concatenate(users_out)
    items = np.concatenate(items_out)
    ratings = np.concatenate(ratings_out)
    ts = np.concatenate(ts_out)
    latent = {"sizes": sizes, "tau": tau, "niche_fan": niche_fan,
              "devotee": devotee, "purist": purist_flags, "ln_w": ln_w}
    return users, items, ratings, ts, genre_lists, latent


def _dedup(users, items, ratings, ts):
    key = users.astype(np.int64) * (items.max() + 1) + items
    _, first = np.unique(key, return_index=True)
    first = np.sort(first)
    return users[first], items[first], ratings[first], ts[first]


def write_ml1m(outdir, seed: int = 7, n_users: int = 6040, n_items: int = 3706,
               target_interactions: int = 1000209, **overrides) -> dict:
    """Write ratings.dat / movies.dat in ML-1M layout; returns file paths."""
    cfg = SynthConfig(n_users=n_users, n_items=n_items,
                      target_interactions=target_interactions, seed=seed,
                      **overrides)
    users, items, ratings, ts, genre_lists, _ = generate(cfg)
    users, items, ratings, ts = _dedup(users, items, ratings, ts)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ratings_path = outdir / "ratings.dat"
    with ratings_path.open("w", encoding="latin-1") as fh:
        for u, i, r, t in zip(users, items, ratings, ts):
            fh.write(f"{u}::{i}::{r}::{t}\n")
    movies_path = outdir / "movies.dat"
    with movies_path.open("w", encoding="latin-1") as fh:
        for item in range(1, cfg.n_items + 1):
            genres = "|".join(genre_lists[item - 1])
            fh.write(f"{item}::Feature {item:05d} (1996)::{genres}\n")
    return {"ratings": ratings_path, "movies": movies_path,
            "n_interactions": len(users)}


def write_ml100k(outdir, seed: int = 7, n_users: int = 943, n_items: int = 1682,
                 target_interactions: int = 100000, **overrides) -> dict:
    """Write u.data / u.item in ML-100K layout (19 genre flags)."""
    cfg = SynthConfig(n_users=n_users, n_items=n_items,
                      target_interactions=target_interactions, seed=seed,
                      **overrides)
    users, items, ratings, ts, genre_lists, _ = generate(cfg)
    users, items, ratings, ts = _dedup(users, items, ratings, ts)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    data_path = outdir / "u.data"
    with data_path.open("w", encoding="latin-1") as fh:
        for u, i, r, t in zip(users, items, ratings, ts):
            fh.write(f"{u}\t{i}\t{r}\t{t}\n")
    from .dataset import ML100K_GENRES
    item_path = outdir / "u.item"
    with item_path.open("w", encoding="latin-1") as fh:
        for item in range(1, cfg.n_items + 1):
            flags = ["0"] * len(ML100K_GENRES)
            for g in genre_lists[item - 1]:
                flags[ML100K_GENRES.index(g)] = "1"
            head = f"{item}|Feature {item:05d} (1996)|01-Jan-1996||http://example.invalid/{item}"
            fh.write(head + "|" + "|".join(flags) + "\n")
    return {"ratings": data_path, "movies": item_path, "n_interactions": len(users)}


def write_miniature(outdir, seed: int = 7, n_users: int = 100, n_items: int = 160,
                    target_interactions: int = 6000, **overrides) -> dict:
    """Write a small CSV-format dataset for demos and fast tests."""
    cfg = SynthConfig(n_users=n_users, n_items=n_items,
                      target_interactions=target_interactions, seed=seed,
                      **overrides)
    users, items, ratings, ts, genre_lists, _ = generate(cfg)
    users, items, ratings, ts = _dedup(users, items, ratings, ts)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ratings_path = outdir / "ratings.csv"
    with ratings_path.open("w") as fh:
        fh.write("user,item,rating,timestamp\n")
        for u, i, r, t in zip(users, items, ratings, ts):
            fh.write(f"{u},{i},{r},{t}\n")
    genres_path = outdir / "genres.csv"
    with genres_path.open("w") as fh:
        for item in range(1, cfg.n_items + 1):
            fh.write(f"{item}|" + "|".join(genre_lists[item - 1]) + "\n")
    return {"ratings": ratings_path, "movies": genres_path, "n_interactions": len(users)}


FLAVORS = {"ml1m": write_ml1m, "ml100k": write_ml100k, "mini": write_miniature}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Generate MovieLens-shaped synthetic rating data")
    parser.add_argument("flavor", choices=sorted(FLAVORS))
    parser.add_argument("outdir")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    result = FLAVORS[args.flavor](args.outdir, seed=args.seed)
    print(f"wrote {result['ratings']} and {result['movies']} "
          f"({result['n_interactions']} interactions)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
