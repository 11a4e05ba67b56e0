"""Word, user and topic embedding stores."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DataFormatError
from .tensor import Parameter

logger = logging.getLogger(__name__)

UNK = "<unk>"
ROLES = ("author_liker", "commenter")
INIT_RANGE = 0.1


class Vocab:
    """Token to row-index map.  Index 0 is reserved for ``<unk>``."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._itos = [UNK]
        self._stoi = {UNK: 0}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token in self._stoi:
            return self._stoi[token]
        self._stoi[token] = len(self._itos)
        self._itos.append(token)
        return self._stoi[token]

    def index(self, token: str) -> int:
        return self._stoi.get(token, 0)

    def indices(self, tokens: Sequence[str]) -> np.ndarray:
        get = self._stoi.get
        return np.fromiter((get(t, 0) for t in tokens), dtype=np.intp, count=len(tokens))

    def token(self, index: int) -> str:
        return self._itos[index]

    @property
    def tokens(self) -> list[str]:
        return list(self._itos)

    def __contains__(self, token):
        return token in self._stoi

    def __len__(self):
        return len(self._itos)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._itos == other._itos


@dataclass
class WordTable:
    """Pretrained word vectors, one row per vocab entry.

    The matrix is made read-only when ``frozen`` is set; training never
    produces gradients for it.
    """

    vocab: Vocab
    matrix: np.ndarray
    frozen: bool = True
    n_duplicates: int = 0

    def __post_init__(self):
        self.matrix = np.array(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"word matrix shape {self.matrix.shape} does not match vocab size {len(self.vocab)}"
            )
        if self.frozen:
            self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def lookup(self, token: str) -> np.ndarray:
        return self.matrix[self.vocab.index(token)]

    def vectors(self, tokens: Sequence[str]) -> np.ndarray:
        """Stack the rows for ``tokens``; unknown tokens map to the zero row."""
        return self.matrix[self.vocab.indices(tokens)]


def load_word_embeddings(path, dim: int = 50) -> WordTable:
    """Read a whitespace-separated ``token f1 ... fd`` text file.

    Row 0 is ``<unk>`` and is all zeros.  When a token repeats, the first
    occurrence wins and the repeat is counted in ``n_duplicates``.
    """
    path = Path(path)
    vocab = Vocab()
    rows = [np.zeros(dim)]
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise DataFormatError(
                    f"expected {dim} floats after the token, found {len(values)}", path, lineno
                )
            try:
                vec = np.array([float(v) for v in values])
            except ValueError as exc:
                raise DataFormatError(f"bad float: {exc}", path, lineno) from None
            if not np.all(np.isfinite(vec)):
                raise DataFormatError("non-finite value", path, lineno)
            if token in vocab:
                duplicates += 1
                continue
            vocab.add(token)
            rows.append(vec)
    if len(vocab) == 1:
        raise DataFormatError("no embeddings found", path)
    if duplicates:
        logger.warning("%s: %d duplicate tokens ignored", path, duplicates)
    return WordTable(vocab, np.vstack(rows), frozen=True, n_duplicates=duplicates)


def save_word_embeddings(table: WordTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, tok in enumerate(table.vocab.tokens):
            if i == 0:
                continue
            fh.write(tok + " " + " ".join(repr(float(x)) for x in table.matrix[i]) + "\n")


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class EmbeddingTable:
    """Per-id pairs of (matrix, vector) parameters.

    Entries are created lazily.  A fresh entry is drawn uniformly from
    ``[-init_range, init_range]`` by a generator seeded from
    ``(seed, salt, id)``, so an id always gets the same initial values no
    matter when or in what order it is first seen.
    """

    def __init__(self, matrix_shape, vector_dim, seed=0, salt="", init_range=INIT_RANGE):
        rows, cols = matrix_shape
        if rows <= 0 or cols <= 0 or vector_dim <= 0:
            raise ValueError("embedding dimensions must be positive")
        self.matrix_shape = (int(rows), int(cols))
        self.vector_dim = int(vector_dim)
        self.seed = int(seed)
        self.salt = salt
        self.init_range = init_range
        self.entries: dict[str, tuple[Parameter, Parameter]] = {}

    def fresh(self, key: str) -> tuple[Parameter, Parameter]:
        rng = np.random.default_rng([self.seed, _stable_hash(self.salt), _stable_hash(key)])
        r = self.init_range
        return (
            Parameter(rng.uniform(-r, r, size=self.matrix_shape)),
            Parameter(rng.uniform(-r, r, size=self.vector_dim)),
        )

    def get(self, key, register: bool = True) -> tuple[Parameter, Parameter]:
        key = str(key)
        entry = self.entries.get(key)
        if entry is None:
            entry = self.fresh(key)
            if register:
                self.entries[key] = entry
        return entry

    def register(self, keys: Iterable) -> None:
        for k in keys:
            self.get(k)

    def ids(self) -> list[str]:
        return list(self.entries)

    def __contains__(self, key):
        return str(key) in self.entries

    def __len__(self):
        return len(self.entries)

    def parameters(self):
        for key, (m, v) in self.entries.items():
            yield key, m, v


class TopicStore(EmbeddingTable):
    """Topic embeddings: a ``[topic_dim x word_dim]`` matrix and a vector per topic."""

    def __init__(self, topic_dim, word_dim, vector_dim, seed=0, init_range=INIT_RANGE):
        super().__init__((topic_dim, word_dim), vector_dim, seed, salt="topic", init_range=init_range)


class UserStore:
    """User embeddings, one :class:`EmbeddingTable` per role.

    With ``shared_roles`` both roles point at the same table, so an
    update through one role is visible through the other.
    """

    def __init__(self, user_dim, word_dim, vector_dim, seed=0, shared_roles=False):
        shape = (user_dim, word_dim)
        main = EmbeddingTable(shape, vector_dim, seed, salt="user/author_liker")
        if shared_roles:
            self.tables = {"author_liker": main, "commenter": main}
        else:
            self.tables = {
                "author_liker": main,
                "commenter": EmbeddingTable(shape, vector_dim, seed, salt="user/commenter"),
            }
        self.shared_roles = shared_roles

    def lookup(self, user_id, role="author_liker", register=True):
        if role not in self.tables:
            raise KeyError(f"unknown role {role!r}; expected one of {ROLES}")
        return self.tables[role].get(user_id, register)

    def register(self, user_ids):
        user_ids = list(user_ids)
        for _, table in self.distinct_tables():
            table.register(user_ids)

    def distinct_tables(self):
        seen = []
        for role in ROLES:
            if not any(self.tables[role] is t for _, t in seen):
                seen.append((role, self.tables[role]))
        return seen

    def __len__(self):
        return len(self.tables["author_liker"])


def init_stores(
    user_ids: Sequence,
    topic_ids,
    user_dim: int = 5,
    topic_dim: int = 5,
    word_dim: int = 50,
    vector_dim: int = 10,
    seed: int = 0,
    shared_roles: bool = False,
) -> tuple[UserStore, TopicStore]:
    """Build and populate user and topic stores.

    ``topic_ids`` may be an int, meaning topics ``"0" .. "n-1"``.
    """
    if isinstance(topic_ids, int):
        topic_ids = [str(i) for i in range(topic_ids)]
    user_ids, topic_ids = list(user_ids), list(topic_ids)
    if not user_ids:
        raise ValueError("at least one user is required")
    if not topic_ids:
        raise ValueError("at least one topic is required")
    users = UserStore(user_dim, word_dim, vector_dim, seed, shared_roles)
    users.register(user_ids)
    topics = TopicStore(topic_dim, word_dim, vector_dim, seed)
    topics.register(topic_ids)
    return users, topics


def random_word_table(tokens: Iterable[str], dim: int = 50, seed: int = 0, scale: float = 1.0) -> WordTable:
    """Gaussian word vectors of norm ~``scale``, for experiments without pretrained vectors."""
    vocab = Vocab(tokens)
    rng = np.random.default_rng(seed)
    mat = rng.normal(0.0, scale / np.sqrt(dim), size=(len(vocab), dim))
    mat[0] = 0.0
    return WordTable(vocab, mat)
