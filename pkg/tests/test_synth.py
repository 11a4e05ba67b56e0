import numpy as np
import pytest

from utcnn import synth
from utcnn.corpus import Corpus
from utcnn.synth import DEFAULT_LIKE_MATRIX, SynthConfig


def test_same_seed_same_corpus():
    cfg = SynthConfig(n_posts=60, seed=3)
    a, b = synth.generate(cfg), synth.generate(cfg)
    assert a.posts == b.posts and a.meta == b.meta


def test_different_seeds_differ():
    a = synth.generate(SynthConfig(n_posts=60, seed=1))
    b = synth.generate(SynthConfig(n_posts=60, seed=2))
    assert a.posts != b.posts


def test_every_class_has_a_user():
    corpus = synth.generate(SynthConfig(n_posts=5, n_users=3, seed=0))
    assert sorted(corpus.meta["user_stances"].values()) == [0, 1, 2]


def test_diagonal_likes_and_aligned_comments_follow_label():
    cfg = SynthConfig(n_posts=200, like_matrix=np.eye(3), comment_alignment=1.0, seed=5)
    corpus = synth.generate(cfg)
    stance = corpus.meta["user_stances"]
    for p in corpus.posts:
        assert stance[p.author] == p.label
        assert all(stance[u] == p.label for u in p.likers)
        assert all(stance[c.commenter] == p.label for c in p.comments)


def test_empirical_like_matrix_matches_generator():
    cfg = SynthConfig(n_posts=1500, n_users=3000, class_prior=(1 / 3, 1 / 3, 1 / 3), comments_per_post=(0, 0),
                      seed=9)
    corpus = synth.generate(cfg)
    stats = synth.describe(corpus)
    assert stats["total_likes"] >= 10_000
    L = np.array(stats["like_matrix"])
    assert np.abs(L - np.array(DEFAULT_LIKE_MATRIX)).max() <= 0.03


def test_describe_counts_within_binomial_noise():
    prior = (0.1, 0.8, 0.1)
    n = 2000
    stats = synth.describe(synth.generate(SynthConfig(n_posts=n, class_prior=prior, seed=4)))
    for (name, count), p in zip(stats["class_counts"].items(), prior):
        assert abs(count - n * p) <= 4 * np.sqrt(n * p * (1 - p)), name
    assert stats["n_posts"] == n


def test_describe_empty_corpus():
    stats = synth.describe(Corpus([], ["a", "b"]))
    assert stats["n_posts"] == 0 and stats["class_counts"] == {"a": 0, "b": 0}
    assert stats["total_likes"] == 0


def test_text_uses_class_pool_at_signal_rate():
    cfg = SynthConfig(n_posts=300, content_signal=0.5, seed=2)
    corpus = synth.generate(cfg)
    own = total = 0
    for p in corpus.posts:
        pool = set(synth.class_tokens(cfg, p.label))
        own += sum(t in pool for t in p.tokens)
        total += len(p.tokens)
    assert abs(own / total - 0.5) < 0.03


def test_word_table_covers_vocabulary():
    cfg = SynthConfig(n_posts=30)
    table = synth.word_table(cfg, dim=8)
    assert table.matrix.shape == (1 + 3 * cfg.class_pool_size + cfg.noise_pool_size, 8)
    norms = np.linalg.norm(table.matrix[1:], axis=1)
    assert np.allclose(norms, 1.0)
    corpus = synth.generate(cfg)
    vocab = table.vocab
    assert all(t in vocab for p in corpus.posts for t in p.tokens)


@pytest.mark.parametrize("kw", [
    dict(class_prior=(0.5, 0.6, 0.1)),
    dict(label_names=("a", "b")),
    dict(like_matrix=((1.0, 0.0), (0.0, 1.0))),
    dict(n_users=2),
    dict(content_signal=1.5),
    dict(tokens_per_post=(5, 2)),
])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)
