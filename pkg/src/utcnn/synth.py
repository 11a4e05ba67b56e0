"""Seeded synthetic social corpora with stance-correlated users.

Every user holds a latent stance.  A post of stance ``p`` is written by a
user of stance ``p``; users of stance ``a`` like it at a rate proportional
to ``like_matrix[a][p]``; each comment agrees with the post with
probability ``comment_alignment`` and is written by a user holding the
comment's stance.  Text mixes class-indicative tokens (with probability
``content_signal``) into a shared noise vocabulary.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .corpus import Comment, Corpus, Post
from .embeddings import Vocab, WordTable

# Rows: liker stance, columns: post stance (Sup, Neu, Uns).  Rates are
# per user of the liker's stance, normalised within each post stance.
DEFAULT_LIKE_MATRIX = (
    (0.585, 0.513, 0.294),
    (0.339, 0.435, 0.093),
    (0.076, 0.052, 0.613),
)


@dataclass
class SynthConfig:
    n_posts: int = 500
    class_prior: tuple = (0.1, 0.8, 0.1)
    label_names: tuple = ("Sup", "Neu", "Uns")
    n_users: int = 100
    user_prior: Optional[tuple] = None  # defaults to class_prior
    class_pool_size: int = 30
    noise_pool_size: int = 300
    content_signal: float = 0.05
    tokens_per_post: tuple = (10, 30)
    likers_per_post: tuple = (5, 20)
    like_matrix: tuple = DEFAULT_LIKE_MATRIX
    comments_per_post: tuple = (0, 4)
    tokens_per_comment: tuple = (3, 10)
    comment_alignment: float = 0.8
    n_topics: int = 5
    topics_per_post: tuple = (1, 3)
    seed: int = 0

    def __post_init__(self):
        for name in ("class_prior", "label_names", "tokens_per_post", "likers_per_post",
                     "comments_per_post", "tokens_per_comment", "topics_per_post"):
            setattr(self, name, tuple(getattr(self, name)))
        self.like_matrix = tuple(tuple(float(x) for x in row) for row in self.like_matrix)
        if self.user_prior is not None:
            self.user_prior = tuple(self.user_prior)
        C = len(self.class_prior)
        if C < 2 or len(self.label_names) != C:
            raise ValueError("class_prior and label_names must describe the same >= 2 classes")
        for prior in (self.class_prior, self.user_prior):
            if prior is not None and (len(prior) != C or min(prior) < 0 or abs(sum(prior) - 1) > 1e-9):
                raise ValueError(f"prior {prior} must be a distribution over {C} classes")
        L = np.array(self.like_matrix)
        if L.shape != (C, C) or L.min() < 0 or L.max() > 1:
            raise ValueError("like_matrix must be C x C with entries in [0, 1]")
        if self.class_pool_size < 1 or self.noise_pool_size < 1:
            raise ValueError("vocabulary pools must be non-empty")
        if self.n_users < C:
            raise ValueError("need at least one user per class")
        if not 0 <= self.content_signal <= 1 or not 0 <= self.comment_alignment <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        for name in ("tokens_per_post", "likers_per_post", "comments_per_post",
                     "tokens_per_comment", "topics_per_post"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a range (lo, hi) with 0 <= lo <= hi")

    @property
    def n_classes(self):
        return len(self.class_prior)

    def to_dict(self):
        return asdict(self)


def class_tokens(config: SynthConfig, cls: int) -> list[str]:
    return [f"c{cls}_{i}" for i in range(config.class_pool_size)]


def noise_tokens(config: SynthConfig) -> list[str]:
    return [f"n_{i}" for i in range(config.noise_pool_size)]


def _text(rng, n, pool, noise, signal):
    from_pool = rng.random(n) < signal
    a = rng.integers(len(pool), size=n)
    b = rng.integers(len(noise), size=n)
    return [pool[i] if f else noise[j] for f, i, j in zip(from_pool, a, b)]


def _rint(rng, bounds):
    lo, hi = bounds
    return int(rng.integers(lo, hi + 1))


def generate(config: SynthConfig) -> Corpus:
    """Draw a corpus; identical configs (including ``seed``) give identical corpora."""
    rng = np.random.default_rng(config.seed)
    C = config.n_classes
    L = np.array(config.like_matrix)
    user_prior = np.array(config.user_prior or config.class_prior)
    stances = np.concatenate([np.arange(C), rng.choice(C, size=config.n_users - C, p=user_prior)])
    stances = rng.permutation(stances)
    user_ids = [f"u{i}" for i in range(config.n_users)]
    by_stance = [np.flatnonzero(stances == c) for c in range(C)]
    pools = [class_tokens(config, c) for c in range(C)]
    noise = noise_tokens(config)
    topics = [f"t{i}" for i in range(config.n_topics)]

    posts = []
    labels = rng.choice(C, size=config.n_posts, p=np.array(config.class_prior))
    for n, label in enumerate(labels):
        author = int(rng.choice(by_stance[label]))
        tokens = _text(rng, _rint(rng, config.tokens_per_post), pools[label], noise, config.content_signal)

        weights = L[stances, label].copy()
        weights[author] = 0.0
        target = _rint(rng, config.likers_per_post)
        total = weights.sum()
        draws = rng.random(config.n_users)
        likers = []
        if total > 0 and target > 0:
            p_like = np.minimum(1.0, weights * (target / total))
            likers = [user_ids[i] for i in np.flatnonzero(draws < p_like)]

        comments = []
        for _ in range(_rint(rng, config.comments_per_post)):
            stance = label
            if rng.random() >= config.comment_alignment:
                stance = int(rng.choice([c for c in range(C) if c != label]))
            commenter = user_ids[int(rng.choice(by_stance[stance]))]
            text = _text(rng, _rint(rng, config.tokens_per_comment), pools[stance], noise,
                         config.content_signal)
            comments.append(Comment(commenter, text))

        post_topics = []
        if topics:
            k = min(_rint(rng, config.topics_per_post), len(topics))
            post_topics = [topics[i] for i in sorted(rng.choice(len(topics), size=k, replace=False))]
        posts.append(Post(f"p{n}", tokens, user_ids[author], likers, comments, post_topics, int(label)))

    meta = {
        "user_stances": {u: int(s) for u, s in zip(user_ids, stances)},
        "generator": config.to_dict(),
    }
    return Corpus(posts, list(config.label_names), meta)


def word_table(config: SynthConfig, dim: int = 50, spread: float = 0.5, seed: Optional[int] = None) -> WordTable:
    """Word vectors for a synthetic vocabulary.

    Class-indicative tokens cluster around a per-class centroid (``spread``
    sets the within-class scatter); noise tokens are isotropic.  All
    vectors have norm close to one.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    scale = 1.0 / np.sqrt(dim)
    rows, tokens = [], []
    for c in range(config.n_classes):
        centroid = rng.normal(0, scale, dim)
        for tok in class_tokens(config, c):
            v = centroid + spread * rng.normal(0, scale, dim)
            rows.append(v / np.linalg.norm(v))
            tokens.append(tok)
    for tok in noise_tokens(config):
        v = rng.normal(0, scale, dim)
        rows.append(v / np.linalg.norm(v))
        tokens.append(tok)
    return WordTable(Vocab(tokens), np.vstack([np.zeros(dim), *rows]))


def empirical_like_matrix(corpus: Corpus, user_stances: dict, n_classes: int) -> np.ndarray:
    """Like rates by (liker stance, post stance), normalised as the generator's matrix.

    Counts are divided by the number of users holding each stance, then
    each post-stance column is scaled to sum to one.
    """
    counts = np.zeros((n_classes, n_classes))
    for p in corpus.posts:
        if p.label is None:
            continue
        for u in p.likers:
            if u in user_stances:
                counts[user_stances[u], p.label] += 1
    n_users = np.bincount(np.array(list(user_stances.values()), dtype=int), minlength=n_classes)
    rates = np.divide(counts, n_users[:, None], out=np.zeros_like(counts), where=n_users[:, None] > 0)
    col = rates.sum(axis=0, keepdims=True)
    return np.divide(rates, col, out=np.zeros_like(rates), where=col > 0)


def _dist(values):
    if not values:
        return {"mean": 0.0, "min": 0, "max": 0}
    return {"mean": float(np.mean(values)), "min": int(min(values)), "max": int(max(values))}


def describe(corpus: Corpus) -> dict:
    """Class counts, engagement distributions and (when known) the like matrix."""
    C = corpus.n_classes
    counts = np.zeros(C, dtype=int)
    for p in corpus.posts:
        if p.label is not None:
            counts[p.label] += 1
    stats = {
        "n_posts": len(corpus),
        "n_users": len(corpus.user_ids()) if corpus.posts else 0,
        "class_counts": {name: int(n) for name, n in zip(corpus.label_names, counts)},
        "likers_per_post": _dist([len(p.likers) for p in corpus.posts]),
        # author plus likers, the figure reported as users involved per post
        "users_per_post": _dist([len(set(p.users)) for p in corpus.posts]),
        "comments_per_post": _dist([len(p.comments) for p in corpus.posts]),
        "tokens_per_post": _dist([len(p.tokens) for p in corpus.posts]),
        "total_likes": int(sum(len(p.likers) for p in corpus.posts)),
    }
    stances = corpus.meta.get("user_stances")
    if stances and C:
        stats["like_matrix"] = empirical_like_matrix(corpus, stances, C).tolist()
    return stats
