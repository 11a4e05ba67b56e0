"""Input checks shared by the estimator and the command line."""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Corpus, Post


def check_posts(X) -> list[Post]:
    """Coerce ``X`` (a Corpus, Posts, or post dicts) into a list of :class:`Post`."""
    if isinstance(X, Corpus):
        return list(X.posts)
    if isinstance(X, (Post, dict)):
        raise TypeError("expected a sequence of posts, got a single post")
    posts = []
    for i, item in enumerate(X):
        if isinstance(item, Post):
            posts.append(item)
        elif isinstance(item, dict):
            try:
                posts.append(Post(**{k: item[k] for k in item if k in Post.__dataclass_fields__}))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"post {i}: {exc}") from None
        else:
            raise TypeError(f"post {i}: expected Post or dict, got {type(item).__name__}")
    return posts


def check_labels(posts: Sequence[Post], y=None, n_classes: Optional[int] = None) -> np.ndarray:
    """Integer class labels for ``posts``, from ``y`` or the posts themselves."""
    if y is None:
        missing = [p.id for p in posts if p.label is None]
        if missing:
            raise ValueError(f"{len(missing)} posts have no label (first: {missing[0]!r})")
        y = [p.label for p in posts]
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(posts):
        raise ValueError(f"got {len(y)} labels for {len(posts)} posts")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if np.all(np.mod(y, 1) == 0):
            y = y.astype(int)
        else:
            raise ValueError("labels must be integer class indices")
    y = y.astype(int)
    if y.size and y.min() < 0:
        raise ValueError("labels must be non-negative")
    if n_classes is not None and y.size and y.max() >= n_classes:
        raise ValueError(f"label {y.max()} out of range for {n_classes} classes")
    return y


def with_labels(posts: Sequence[Post], y: Iterable[int]) -> list[Post]:
    """Copies of ``posts`` carrying the labels ``y``."""
    out = []
    for p, label in zip(posts, y):
        out.append(p if p.label == int(label) else Post(
            p.id, p.tokens, p.author, p.likers, p.comments, p.topics, int(label)))
    return out
