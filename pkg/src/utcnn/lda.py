"""Latent Dirichlet allocation by collapsed Gibbs sampling.

Used to give posts in a single-topic corpus their top latent topics.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import Corpus


@dataclass
class LdaConfig:
    n_topics: int = 100
    alpha: Optional[float] = None  # None means 50 / n_topics
    beta: float = 0.01
    iterations: int = 500
    burn_in: int = 100
    seed: int = 0
    top_m: int = 3
    fold_in_iterations: int = 50

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError("n_topics must be at least 1")
        if self.alpha is None:
            self.alpha = 50.0 / self.n_topics
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.top_m < 1:
            raise ValueError("top_m must be at least 1")
        self.top_m = min(self.top_m, self.n_topics)
        if self.iterations < 1 or self.burn_in < 0:
            raise ValueError("iterations must be positive and burn_in non-negative")

    def to_dict(self):
        return asdict(self)


@dataclass
class LdaModel:
    config: LdaConfig
    vocab: list[str]
    word_topic: np.ndarray  # [V, K] counts
    doc_topic: np.ndarray  # [D, K] counts from the final sweep
    topic_totals: np.ndarray  # [K]
    assignments: list[np.ndarray]
    docs: list[np.ndarray]  # word indices per document
    doc_topic_mean: np.ndarray = None  # [D, K] counts averaged over post-burn-in sweeps
    word_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.word_index:
            self.word_index = {w: i for i, w in enumerate(self.vocab)}

    @property
    def n_topics(self) -> int:
        return self.config.n_topics

    def doc_proportions(self, d: int) -> np.ndarray:
        """Smoothed topic proportions ``(n_dk + alpha) / (n_d + K alpha)`` of training document ``d``."""
        counts = self.doc_topic_mean[d] if self.doc_topic_mean is not None else self.doc_topic[d]
        a = self.config.alpha
        return (counts + a) / (counts.sum() + self.n_topics * a)

    def doc_topics(self, d: int, top_m: Optional[int] = None) -> list[int]:
        if len(self.docs[d]) == 0:
            return global_topics(self, top_m or self.config.top_m)
        return _rank(self.doc_proportions(d), top_m or self.config.top_m)

    def topic_word(self) -> np.ndarray:
        """``phi[k, w] = (n_wk + beta) / (n_k + V beta)``."""
        V = len(self.vocab)
        b = self.config.beta
        return ((self.word_topic + b) / (self.topic_totals + V * b)).T


def _rank(scores: np.ndarray, m: int) -> list[int]:
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))
    return order[:m]


def global_topics(model: LdaModel, m: int) -> list[int]:
    """The ``m`` topics holding the most tokens overall."""
    return _rank(model.topic_totals.astype(float), m)


def check_counts(model: LdaModel) -> bool:
    """Recount every matrix from the assignments; True when all agree."""
    K = model.n_topics
    wt = np.zeros_like(model.word_topic)
    dt = np.zeros_like(model.doc_topic)
    for d, (words, zs) in enumerate(zip(model.docs, model.assignments)):
        np.add.at(wt, (words, zs), 1)
        dt[d] = np.bincount(zs, minlength=K)
    return (
        np.array_equal(wt, model.word_topic)
        and np.array_equal(dt, model.doc_topic)
        and np.array_equal(wt.sum(axis=0), model.topic_totals)
        and int(model.topic_totals.sum()) == sum(len(w) for w in model.docs)
    )


def _sample(p_cum_target, cum):
    k = int(np.searchsorted(cum, p_cum_target, side="right"))
    return min(k, len(cum) - 1)


def fit(docs: Sequence[Sequence[str]], config: LdaConfig,
        callback: Optional[Callable[[int, LdaModel], None]] = None) -> LdaModel:
    """Run the seeded sampler over tokenised documents.

    ``callback(sweep, model)`` is invoked after every sweep.
    """
    vocab = list(dict.fromkeys(t for doc in docs for t in doc))
    if not vocab:
        raise ValueError("LDA needs a non-empty vocabulary")
    index = {w: i for i, w in enumerate(vocab)}
    K, V = config.n_topics, len(vocab)
    alpha, beta = config.alpha, config.beta
    rng = np.random.default_rng(config.seed)

    words = [np.array([index[t] for t in doc], dtype=np.intp) for doc in docs]
    zs = [rng.integers(K, size=len(w)).astype(np.intp) for w in words]
    nwk = np.zeros((V, K), dtype=np.int64)
    ndk = np.zeros((len(docs), K), dtype=np.int64)
    for d, (w, z) in enumerate(zip(words, zs)):
        np.add.at(nwk, (w, z), 1)
        ndk[d] = np.bincount(z, minlength=K)
    nk = nwk.sum(axis=0)
    model = LdaModel(config, vocab, nwk, ndk, nk, zs, words, None, index)

    mean = np.zeros((len(docs), K))
    kept = 0
    v_beta = V * beta
    for sweep in range(config.iterations):
        for d in range(len(words)):
            w_d, z_d, n_d = words[d], zs[d], ndk[d]
            u = rng.random(len(w_d))
            for i in range(len(w_d)):
                w, k = w_d[i], z_d[i]
                n_d[k] -= 1
                nwk[w, k] -= 1
                nk[k] -= 1
                cum = np.cumsum((nwk[w] + beta) / (nk + v_beta) * (n_d + alpha))
                k = _sample(u[i] * cum[-1], cum)
                z_d[i] = k
                n_d[k] += 1
                nwk[w, k] += 1
                nk[k] += 1
        if sweep >= config.burn_in:
            mean += ndk
            kept += 1
        if callback is not None:
            callback(sweep, model)
    model.doc_topic_mean = mean / kept if kept else ndk.astype(float)
    return model


def _fold_in_seed(config: LdaConfig, words: np.ndarray) -> list[int]:
    digest = hashlib.blake2b(words.astype(np.int64).tobytes(), digest_size=8).digest()
    return [config.seed, int.from_bytes(digest, "little")]


def infer_proportions(model: LdaModel, tokens: Sequence[str]) -> Optional[np.ndarray]:
    """Topic proportions for unseen text, holding the topic-word counts fixed.

    Returns None when no token is in the model's vocabulary.
    """
    cfg = model.config
    words = np.array([model.word_index[t] for t in tokens if t in model.word_index], dtype=np.intp)
    if words.size == 0:
        return None
    K, V = cfg.n_topics, len(model.vocab)
    rng = np.random.default_rng(_fold_in_seed(cfg, words))
    phi = (model.word_topic[words] + cfg.beta) / (model.topic_totals + V * cfg.beta)  # [n, K]
    z = rng.integers(K, size=words.size)
    n_d = np.bincount(z, minlength=K).astype(float)
    mean = np.zeros(K)
    sweeps = max(cfg.fold_in_iterations, 2)
    kept = 0
    for sweep in range(sweeps):
        u = rng.random(words.size)
        for i in range(words.size):
            n_d[z[i]] -= 1
            cum = np.cumsum(phi[i] * (n_d + cfg.alpha))
            z[i] = _sample(u[i] * cum[-1], cum)
            n_d[z[i]] += 1
        if sweep >= sweeps // 2:
            mean += n_d
            kept += 1
    mean /= kept
    return (mean + cfg.alpha) / (words.size + K * cfg.alpha)


def assign_topics(model: LdaModel, tokens: Sequence[str], top_m: Optional[int] = None) -> list[int]:
    """Top ``top_m`` topics for a text, ranked by proportion, ties to the lower index.

    Text with no known token falls back to the globally most frequent topics.
    """
    m = top_m or model.config.top_m
    props = infer_proportions(model, tokens)
    if props is None:
        return global_topics(model, m)
    return _rank(props, m)


def assign_corpus_topics(corpus: Corpus, config: LdaConfig) -> tuple[Corpus, LdaModel]:
    """Fit on post text (comments excluded) and fill each post's ``topics``."""
    model = fit([p.tokens for p in corpus.posts], config)
    posts = [
        replace(p, topics=[str(k) for k in model.doc_topics(d)])
        for d, p in enumerate(corpus.posts)
    ]
    return Corpus(posts, list(corpus.label_names), dict(corpus.meta)), model


def topic_report(model: LdaModel, n_words: int = 10) -> dict:
    phi = model.topic_word()
    out = {}
    for k in range(model.n_topics):
        top = _rank(phi[k], min(n_words, len(model.vocab)))
        out[str(k)] = [{"word": model.vocab[i], "p": float(phi[k, i])} for i in top]
    return {"n_topics": model.n_topics, "config": model.config.to_dict(), "topics": out}
