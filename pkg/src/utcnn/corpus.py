"""Posts, comments, JSONL corpora and train/dev/test or k-fold splits.

A corpus file holds one JSON object per line::

    {"id": "p1", "tokens": ["a", "b"], "author": "u1", "likers": ["u2"],
     "comments": [{"commenter": "u3", "tokens": ["c"]}],
     "topics": ["abortion"], "label": "Sup"}

An optional first line ``{"label_names": [...], "meta": {...}}`` declares
the class names; labels may then be given by name or by index.
"""
from __future__ import annotations

import json
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import DataFormatError

logger = logging.getLogger(__name__)


@dataclass
class Comment:
    commenter: str
    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.commenter = str(self.commenter)
        if not self.commenter:
            raise ValueError("comment needs a commenter")
        self.tokens = list(self.tokens)


@dataclass
class Post:
    id: str
    tokens: list[str]
    author: str
    likers: list[str] = field(default_factory=list)
    comments: list[Comment] = field(default_factory=list)
    topics: list[str] = field(default_factory=list)
    label: Optional[int] = None

    def __post_init__(self):
        self.id = str(self.id)
        self.author = str(self.author)
        if not self.author:
            raise ValueError(f"post {self.id} needs an author")
        self.tokens = list(self.tokens)
        self.likers = [str(u) for u in self.likers]
        self.topics = [str(t) for t in self.topics]
        self.comments = [c if isinstance(c, Comment) else Comment(**c) for c in self.comments]

    @property
    def users(self) -> list[str]:
        """Author and likers: the users pooled into the moderator."""
        return [self.author, *self.likers]

    def to_dict(self, label_names=None) -> dict:
        label = self.label
        if label is not None and label_names is not None:
            label = label_names[label]
        return {
            "id": self.id,
            "tokens": list(self.tokens),
            "author": self.author,
            "likers": list(self.likers),
            "comments": [{"commenter": c.commenter, "tokens": list(c.tokens)} for c in self.comments],
            "topics": list(self.topics),
            "label": label,
        }


@dataclass
class Corpus:
    posts: list[Post]
    label_names: list[str]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        C = len(self.label_names)
        for p in self.posts:
            if p.label is not None and not 0 <= p.label < C:
                raise ValueError(f"post {p.id}: label {p.label} outside {C} classes")

    def __len__(self):
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @property
    def labels(self) -> np.ndarray:
        return np.array([-1 if p.label is None else p.label for p in self.posts], dtype=int)

    def labeled(self) -> "Corpus":
        return self.subset([i for i, p in enumerate(self.posts) if p.label is not None])

    def subset(self, indices: Iterable[int]) -> "Corpus":
        return Corpus([self.posts[i] for i in indices], list(self.label_names), dict(self.meta))

    def user_ids(self) -> list[str]:
        seen = dict.fromkeys(u for p in self.posts for u in p.users)
        seen.update(dict.fromkeys(c.commenter for p in self.posts for c in p.comments))
        return list(seen)

    def topic_ids(self) -> list[str]:
        return list(dict.fromkeys(t for p in self.posts for t in p.topics))

    def vocabulary(self) -> list[str]:
        toks = dict.fromkeys(t for p in self.posts for t in p.tokens)
        toks.update(dict.fromkeys(t for p in self.posts for c in p.comments for t in c.tokens))
        return list(toks)


# ---------------------------------------------------------------------------
# JSONL I/O
# ---------------------------------------------------------------------------

_POST_KEYS = {"id", "tokens", "author", "likers", "comments", "topics", "label"}


def _parse_post(obj, label_names, path, lineno):
    if not isinstance(obj, dict):
        raise DataFormatError("expected a JSON object", path, lineno)
    for key in ("author", "tokens"):
        if key not in obj:
            raise DataFormatError(f"missing required field {key!r}", path, lineno)
    if not isinstance(obj["tokens"], list):
        raise DataFormatError("'tokens' must be a list", path, lineno)
    label = obj.get("label")
    if label is not None:
        if isinstance(label, bool):
            raise DataFormatError(f"bad label {label!r}", path, lineno)
        if isinstance(label, int):
            if label_names is not None and not 0 <= label < len(label_names):
                raise DataFormatError(f"label index {label} out of range", path, lineno)
        elif isinstance(label, str):
            if label_names is None or label not in label_names:
                raise DataFormatError(f"unknown label name {label!r}", path, lineno)
            label = label_names.index(label)
        else:
            raise DataFormatError(f"bad label {label!r}", path, lineno)
    try:
        comments = [Comment(c["commenter"], c.get("tokens", [])) for c in obj.get("comments") or []]
        return Post(
            id=obj.get("id", f"line{lineno}"),
            tokens=obj["tokens"],
            author=obj["author"],
            likers=obj.get("likers") or [],
            comments=comments,
            topics=obj.get("topics") or [],
            label=label,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid post: {exc}", path, lineno) from None


def read_corpus(path, label_names: Optional[Sequence[str]] = None) -> Corpus:
    """Parse a JSONL corpus.

    Class names come from ``label_names`` if given, else from a header
    line, else from the labels themselves (integer labels give names
    ``"0" .. "C-1"``; string labels are taken in sorted order).
    """
    path = Path(path)
    names = list(label_names) if label_names is not None else None
    meta: dict = {}
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"malformed JSON: {exc.msg}", path, lineno) from None
            if not raw and isinstance(obj, dict) and "label_names" in obj and not (_POST_KEYS & obj.keys()):
                if names is None:
                    names = [str(n) for n in obj["label_names"]]
                meta = obj.get("meta") or {}
                continue
            raw.append((lineno, obj))
    if names is None:
        names = _infer_label_names([obj.get("label") for _, obj in raw if isinstance(obj, dict)])
    posts = [_parse_post(obj, names, path, lineno) for lineno, obj in raw]
    return Corpus(posts, names, meta)


def _infer_label_names(labels):
    labels = [l for l in labels if l is not None]
    if not labels:
        return []
    if all(isinstance(l, int) and not isinstance(l, bool) for l in labels):
        return [str(i) for i in range(max(labels) + 1)]
    return sorted({str(l) for l in labels})


def write_corpus(corpus: Corpus, path) -> None:
    """Write ``corpus`` as JSONL with a header line naming the classes."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"label_names": list(corpus.label_names)}
        if corpus.meta:
            header["meta"] = corpus.meta
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for p in corpus.posts:
            fh.write(json.dumps(p.to_dict(corpus.label_names), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def stratified_kfold(labels: Sequence[int], k: int, seed: int = 0) -> list[np.ndarray]:
    """Partition indices into ``k`` label-stratified folds.

    Each class is shuffled and dealt round-robin, continuing the dealer
    position across classes, so per-class counts differ by at most one
    between folds and so do fold sizes.
    """
    if k < 2:
        raise ValueError("k-fold splitting needs k >= 2")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if len(members) < k:
            warnings.warn(f"class {cls} has {len(members)} members, fewer than k={k}", stacklevel=2)
        for i in rng.permutation(members):
            folds[pos % k].append(int(i))
            pos += 1
    return [np.array(sorted(f), dtype=int) for f in folds]


def kfold_splits(labels, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(train, test)`` index pairs for stratified k-fold cross-validation."""
    folds = stratified_kfold(labels, k, seed)
    n = len(labels)
    out = []
    for f in folds:
        mask = np.ones(n, dtype=bool)
        mask[f] = False
        out.append((np.flatnonzero(mask), f))
    return out


def ratio_split(labels: Sequence[int], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> list[np.ndarray]:
    """Stratified split into parts whose sizes follow ``ratios``.

    Items are ordered so that every class is spread evenly along the
    sequence, then the sequence is cut at the rounded cumulative ratios.
    """
    ratios = np.asarray(ratios, dtype=float)
    if np.any(ratios < 0) or ratios.sum() <= 0:
        raise ValueError(f"invalid ratios {ratios.tolist()}")
    ratios = ratios / ratios.sum()
    labels = np.asarray(labels)
    n = len(labels)
    rng = np.random.default_rng(seed)
    keys = np.empty(n)
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        keys[members] = (np.arange(len(members)) + rng.random()) / len(members)
    order = np.lexsort((rng.random(n), keys))
    cuts = np.rint(np.cumsum(ratios) * n).astype(int)
    cuts[-1] = n
    parts = np.split(order, cuts[:-1])
    return [np.sort(p) for p in parts]


def make_splits(corpus: Corpus, k: Optional[int] = None, ratios=None, seed: int = 0, by_topic=False):
    """Dispatch to k-fold or ratio splitting over the labeled posts.

    With ``by_topic`` the result is a dict from topic id to k-fold pairs
    computed within that topic's posts (indices refer to ``corpus``).
    """
    labels = corpus.labels
    if by_topic:
        if k is None:
            raise ValueError("per-topic splitting needs k")
        groups = defaultdict(list)
        for i, p in enumerate(corpus.posts):
            if p.label is not None:
                groups[p.topics[0] if p.topics else ""].append(i)
        out = {}
        for topic, idx in groups.items():
            idx = np.array(idx)
            out[topic] = [(idx[tr], idx[te]) for tr, te in kfold_splits(labels[idx], k, seed)]
        return out
    idx = np.flatnonzero(labels >= 0)
    if k is not None:
        return [(idx[tr], idx[te]) for tr, te in kfold_splits(labels[idx], k, seed)]
    parts = ratio_split(labels[idx], ratios if ratios is not None else (0.8, 0.1, 0.1), seed)
    return [idx[p] for p in parts]
