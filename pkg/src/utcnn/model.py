"""The user-topic-comment CNN.

A document (post text or comment text) is composed in three stages:

1. every word vector ``x`` becomes ``[U @ x; T @ x]`` where ``U`` is the
   pooled user matrix and ``T`` the pooled topic matrix;
2. windows of 1, 2 and 3 transformed words go through ``tanh(W_l c + b_l)``
   and are max-pooled over positions;
3. the three pooled vectors are averaged.

A post's user matrix is the elementwise max over its author and likers; a
comment uses its commenter's matrix (from the commenter role) together
with the post's pooled topic matrix.  The classifier sees
``[pooled comments; u; t; document]`` where ``u`` and ``t`` are the pooled
user and topic vectors and each comment contributes
``[comment document; r; t]``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as tn
from .corpus import Comment, Post
from .embeddings import TopicStore, UserStore, WordTable
from .exceptions import ModelInputError
from .tensor import Parameter, Tensor

WINDOW_SIZES = (1, 2, 3)
GLOBAL_USER = "<all-users>"
GLOBAL_TOPIC = "<all-topics>"


@dataclass
class ModelConfig:
    word_dim: int = 50
    user_dim: int = 5
    topic_dim: int = 5
    vector_dim: int = 10
    conv_len: int = 50
    n_classes: int = 3
    fc_hidden: Optional[int] = None
    use_user: bool = True
    use_topic: bool = True
    use_comment: bool = True
    shared_user_roles: bool = False
    window_sizes: tuple = WINDOW_SIZES
    seed: int = 0

    def __post_init__(self):
        self.window_sizes = tuple(self.window_sizes)
        if self.window_sizes != WINDOW_SIZES:
            raise ValueError(f"window sizes are fixed at {WINDOW_SIZES}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        for name in ("word_dim", "user_dim", "topic_dim", "vector_dim", "conv_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.fc_hidden is not None and self.fc_hidden <= 0:
            raise ValueError("fc_hidden must be positive or None")

    @property
    def comment_dim(self) -> int:
        return self.conv_len + 2 * self.vector_dim

    @property
    def feature_dim(self) -> int:
        return self.comment_dim + 2 * self.vector_dim + self.conv_len

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window_sizes"] = list(self.window_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def _glorot(rng, rows, cols):
    r = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-r, r, size=(rows, cols))


class ParameterSet:
    """All model state: frozen words, user/topic stores, conv and classifier weights."""

    def __init__(self, config: ModelConfig, words: WordTable, users: UserStore = None,
                 topics: TopicStore = None, dense: dict = None):
        if words.dim != config.word_dim:
            raise ValueError(f"word table has dim {words.dim}, config expects {config.word_dim}")
        self.config = config
        self.words = words
        c = config
        self.users = users if users is not None else UserStore(
            c.user_dim, c.word_dim, c.vector_dim, c.seed, c.shared_user_roles)
        self.topics = topics if topics is not None else TopicStore(
            c.topic_dim, c.word_dim, c.vector_dim, c.seed)
        self.dense = dense if dense is not None else self._init_dense()

    def _init_dense(self) -> dict[str, Parameter]:
        c = self.config
        rng = np.random.default_rng([c.seed, 7])
        k = c.user_dim + c.topic_dim
        dense = {}
        for l in c.window_sizes:
            dense[f"conv{l}.weight"] = Parameter(_glorot(rng, c.conv_len, k * l))
            dense[f"conv{l}.bias"] = Parameter(np.zeros(c.conv_len))
        width = c.feature_dim
        if c.fc_hidden:
            dense["hidden.weight"] = Parameter(_glorot(rng, c.fc_hidden, width))
            dense["hidden.bias"] = Parameter(np.zeros(c.fc_hidden))
            width = c.fc_hidden
        dense["out.weight"] = Parameter(_glorot(rng, c.n_classes, width))
        dense["out.bias"] = Parameter(np.zeros(c.n_classes))
        return dense

    def conv(self, width):
        return self.dense[f"conv{width}.weight"], self.dense[f"conv{width}.bias"]

    def named_parameters(self):
        """Yield ``(name, Parameter)`` for every trainable tensor."""
        yield from self.dense.items()
        for role, table in self.users.distinct_tables():
            for uid, m, v in table.parameters():
                yield f"user/{role}/{uid}/matrix", m
                yield f"user/{role}/{uid}/vector", v
        for tid, m, v in self.topics.parameters():
            yield f"topic/{tid}/matrix", m
            yield f"topic/{tid}/vector", v

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def copy(self) -> "ParameterSet":
        """Deep copy of the trainable state; the frozen word table is shared."""
        c = self.config
        users = UserStore(c.user_dim, c.word_dim, c.vector_dim, c.seed, c.shared_user_roles)
        for role, table in self.users.distinct_tables():
            users.tables[role].entries = {
                k: (Parameter(m.data), Parameter(v.data)) for k, (m, v) in table.entries.items()
            }
        topics = TopicStore(c.topic_dim, c.word_dim, c.vector_dim, c.seed)
        topics.entries = {k: (Parameter(m.data), Parameter(v.data)) for k, (m, v) in self.topics.entries.items()}
        dense = {k: Parameter(p.data) for k, p in self.dense.items()}
        return ParameterSet(c, self.words, users, topics, dense)

    def register_corpus(self, posts: Sequence[Post]) -> None:
        """Create embeddings for every user and topic engaged in ``posts``."""
        for p in posts:
            for u in p.users:
                self.users.lookup(self._user_key(u), "author_liker")
            for cm in p.comments:
                self.users.lookup(self._user_key(cm.commenter), "commenter")
            for t in p.topics:
                self.topics.get(self._topic_key(t))

    def _user_key(self, user_id):
        return str(user_id) if self.config.use_user else GLOBAL_USER

    def _topic_key(self, topic_id):
        return str(topic_id) if self.config.use_topic else GLOBAL_TOPIC


# ---------------------------------------------------------------------------
# document composition
# ---------------------------------------------------------------------------


def transform_words(word_vectors, U, T) -> Tensor:
    """Rows ``[U @ x; T @ x]`` for every word vector ``x`` (rows of ``word_vectors``)."""
    X = tn.as_tensor(word_vectors)
    return tn.hstack(tn.rowwise_matvec(X, U), tn.rowwise_matvec(X, T))


def compose_document(transformed, params: ParameterSet) -> Tensor:
    """Convolve, max-pool and average a transformed word sequence.

    An empty sequence gives the zero vector.
    """
    transformed = tn.as_tensor(transformed)
    if transformed.shape[0] == 0:
        return Tensor(np.zeros(params.config.conv_len))
    pooled = []
    for l in params.config.window_sizes:
        W, b = params.conv(l)
        windows = tn.unfold(transformed, l)
        pooled.append(tn.max_rows(tn.affine_tanh(W, windows, b)))
    return tn.elem_avg(pooled)


def _document(tokens, U, T, params):
    X = params.words.vectors(tokens)
    if X.shape[0] == 0:
        return Tensor(np.zeros(params.config.conv_len))
    return compose_document(transform_words(X, U, T), params)


def moderator_pool(author, likers, params: ParameterSet, role="author_liker", register=True):
    """Elementwise max over the author's and likers' matrix and vector embeddings."""
    if not params.config.use_user:
        return params.users.lookup(GLOBAL_USER, role, register)
    entries = [params.users.lookup(u, role, register) for u in dict.fromkeys([str(author), *map(str, likers)])]
    return tn.elem_max([m for m, _ in entries]), tn.elem_max([v for _, v in entries])


def topic_pool(topics, params: ParameterSet, register=True):
    """Elementwise max over the topics' matrix and vector embeddings."""
    if not params.config.use_topic:
        return params.topics.get(GLOBAL_TOPIC, register)
    if not topics:
        raise ModelInputError("a post needs at least one topic")
    entries = [params.topics.get(t, register) for t in dict.fromkeys(map(str, topics))]
    return tn.elem_max([m for m, _ in entries]), tn.elem_max([v for _, v in entries])


def compose_comment(comment: Comment, T, t, params: ParameterSet, register=True) -> Tensor:
    """``[comment document; commenter vector; topic vector]``."""
    R, r = params.users.lookup(params._user_key(comment.commenter), "commenter", register)
    return tn.concat(_document(comment.tokens, R, T, params), r, t)


def post_features(post: Post, params: ParameterSet, register=True) -> Tensor:
    """The vector fed to the classifier: ``[comments; u; t; document]``."""
    cfg = params.config
    U, u = moderator_pool(post.author, post.likers, params, register=register)
    T, t = topic_pool(post.topics, params, register=register)
    doc = _document(post.tokens, U, T, params)
    if cfg.use_comment and post.comments:
        comments = tn.elem_max([compose_comment(c, T, t, params, register) for c in post.comments])
    else:
        comments = Tensor(np.zeros(cfg.comment_dim))
    return tn.concat(comments, u, t, doc)


def classify(features: Tensor, params: ParameterSet) -> Tensor:
    h = features
    if params.config.fc_hidden:
        h = tn.affine_tanh(params.dense["hidden.weight"], h, params.dense["hidden.bias"])
    return tn.affine(params.dense["out.weight"], h, params.dense["out.bias"])


def forward(post: Post, params: ParameterSet, register=True):
    """Return ``(logits, probs)`` for one post."""
    logits = classify(post_features(post, params, register), params)
    return logits, tn.softmax(logits)


def loss(post: Post, params: ParameterSet, label: Optional[int] = None, register=True):
    """Cross-entropy of ``post`` against ``label`` (default: its own label)."""
    label = post.label if label is None else label
    if label is None:
        raise ModelInputError(f"post {post.id} has no label")
    logits = classify(post_features(post, params, register), params)
    probs, xent = tn.softmax_xent(logits, int(label))
    return xent, probs


def predict(post: Post, params: ParameterSet) -> int:
    """Most probable class; ties go to the lowest index."""
    logits, _ = forward(post, params, register=False)
    return int(np.argmax(logits.data))
