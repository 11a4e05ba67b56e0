"""Per-example AdaGrad training with dev-based early stopping, plus ablations."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import model as M
from . import tensor as tn
from .corpus import Corpus, Post, ratio_split
from .embeddings import WordTable
from .exceptions import NumericError
from .metrics import MetricsReport, aggregate_cv, evaluate
from .tensor import Parameter

logger = logging.getLogger(__name__)

# Row name, model-config overrides.  Row names follow the usual ablation table.
VARIANTS = {
    "full": {},
    "no-user": {"use_user": False},
    "no-topic": {"use_topic": False},
    "no-comment": {"use_comment": False},
    "shared-user": {"shared_user_roles": True},
}
VARIANT_TITLES = {
    "full": "UTCNN (full)",
    "no-user": "UTCNN without user",
    "no-topic": "UTCNN without topic",
    "no-comment": "UTCNN without comment",
    "shared-user": "UTCNN shared user embedding",
}


@dataclass
class TrainConfig:
    learning_rate: float = 0.03
    eps: float = 1e-8
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")

    def to_dict(self):
        return asdict(self)


def adagrad_step(param: Parameter, accumulator: np.ndarray, lr: float, eps: float = 1e-8) -> None:
    """In place: ``G += g**2``, then ``theta -= lr * g / (sqrt(G) + eps)``."""
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradient; step aborted")
    accumulator += g * g
    param.data -= lr * g / (np.sqrt(accumulator) + eps)


class AdaGrad:
    """AdaGrad with accumulators created lazily, only for parameters that get updated."""

    def __init__(self, learning_rate=0.03, eps=1e-8):
        self.learning_rate = learning_rate
        self.eps = eps
        self._state: dict[int, tuple[Parameter, np.ndarray]] = {}

    def accumulator(self, param: Parameter) -> np.ndarray:
        entry = self._state.get(id(param))
        if entry is None or entry[0] is not param:
            entry = (param, np.zeros_like(param.data))
            self._state[id(param)] = entry
        return entry[1]

    def step(self, params) -> None:
        params = list(params)
        for p in params:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError("non-finite gradient; step aborted")
        for p in params:
            adagrad_step(p, self.accumulator(p), self.learning_rate, self.eps)

    def __len__(self):
        return len(self._state)


def predict_posts(posts: Sequence[Post], params: M.ParameterSet):
    """Predicted classes and probability rows for ``posts``."""
    probs = np.array([M.forward(p, params, register=False)[1] for p in posts])
    if probs.size == 0:
        return np.zeros(0, dtype=int), np.zeros((0, params.config.n_classes))
    return probs.argmax(axis=1), probs


def _dev_score(report: MetricsReport, n_classes: int) -> float:
    return report.accuracy if n_classes == 2 else report.f1_snu


def train_step(post: Post, params: M.ParameterSet, optimizer: AdaGrad) -> float:
    """One forward/backward/update on a single post; returns its loss."""
    xent, _ = M.loss(post, params)
    value = xent.item()
    if not np.isfinite(value):
        raise NumericError(f"non-finite loss on post {post.id}")
    touched = tn.backward(xent)
    optimizer.step(touched)
    for p in touched:
        p.zero_grad()
    return value


def train(train_posts: Sequence[Post], dev_posts: Sequence[Post], params: M.ParameterSet,
          config: TrainConfig, on_epoch: Optional[Callable[[dict], None]] = None):
    """Train ``params`` in place and return ``(best_params, history)``.

    Each epoch visits the training posts in a seeded random order with one
    AdaGrad update per post.  After each epoch the dev set is scored
    (accuracy for two classes, ``f1_snu`` otherwise); the best-scoring
    snapshot is kept and training stops after ``patience`` epochs without
    strict improvement.  Without dev posts the negative mean training loss
    is the selection score.
    """
    train_posts = list(train_posts)
    dev_posts = list(dev_posts or [])
    if not train_posts:
        raise ValueError("training set is empty")
    C = params.config.n_classes
    for p in [*train_posts, *dev_posts]:
        if p.label is None or not 0 <= p.label < C:
            raise ValueError(f"post {p.id} has label {p.label!r}, expected 0..{C - 1}")

    params.register_corpus(train_posts)
    optimizer = AdaGrad(config.learning_rate, config.eps)
    rng = np.random.default_rng(config.seed)
    best, best_score, stale = params.copy(), -np.inf, 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        for step, i in enumerate(rng.permutation(len(train_posts))):
            try:
                total += train_step(train_posts[i], params, optimizer)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, step {step}: {exc}") from exc
        record = {"epoch": epoch, "train_loss": total / len(train_posts)}
        if dev_posts:
            pred, _ = predict_posts(dev_posts, params)
            report = evaluate([p.label for p in dev_posts], pred, C)
            score = _dev_score(report, C)
            record.update(dev_metric=score, dev_accuracy=report.accuracy, dev_f1_snu=report.f1_snu)
        else:
            score = -record["train_loss"]
            record["dev_metric"] = None
        record["seconds"] = round(time.perf_counter() - t0, 3)
        history.append(record)
        logger.info("epoch %d loss %.4f dev %s", epoch, record["train_loss"], record["dev_metric"])
        if on_epoch is not None:
            on_epoch(record)
        if score > best_score:
            best, best_score, stale = params.copy(), score, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history


def write_history(history: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in history:
            fh.write(json.dumps(rec) + "\n")


def _normalise_splits(corpus: Corpus, splits, seed):
    """Accept ``(train, dev, test)`` or a list of ``(train, test)`` / ``(train, dev, test)``."""
    if isinstance(splits, tuple) or all(isinstance(s, np.ndarray) for s in splits):
        splits = [tuple(splits)]
    out = []
    labels = corpus.labels
    for split in splits:
        if len(split) == 3:
            out.append(tuple(np.asarray(s, dtype=int) for s in split))
        else:
            tr, te = (np.asarray(s, dtype=int) for s in split)
            keep, dev = ratio_split(labels[tr], (0.9, 0.1), seed)
            out.append((tr[keep], tr[dev], te))
    return out


def run_variant(corpus: Corpus, splits, model_config: M.ModelConfig, train_config: TrainConfig,
                words: WordTable) -> dict:
    """Train and test one model configuration over every split."""
    folds = []
    for tr, dev, te in _normalise_splits(corpus, splits, train_config.seed):
        params = M.ParameterSet(model_config, words)
        posts = corpus.posts
        best, history = train([posts[i] for i in tr], [posts[i] for i in dev], params, train_config)
        pred, _ = predict_posts([posts[i] for i in te], best)
        report = evaluate([posts[i].label for i in te], pred, model_config.n_classes, corpus.label_names)
        folds.append({"metrics": report.to_dict(), "epochs": len(history)})
    summary = aggregate_cv([f["metrics"] for f in folds])
    return {"folds": folds, **summary}


def run_ablation_suite(corpus: Corpus, splits, base_config: M.ModelConfig, train_config: TrainConfig,
                       words: WordTable, variants: Optional[Sequence[str]] = None) -> dict:
    """Train every variant on identical data and seeds; collect a results table.

    A variant that fails is reported with an ``error`` entry and the
    remaining variants still run.
    """
    names = list(variants) if variants is not None else list(VARIANTS)
    rows = {}
    for name in names:
        cfg = replace(base_config, **VARIANTS[name])
        t0 = time.perf_counter()
        try:
            result = run_variant(corpus, splits, cfg, train_config, words)
        except Exception as exc:  # noqa: BLE001 - one variant must not sink the table
            logger.exception("variant %s failed", name)
            rows[name] = {"title": VARIANT_TITLES[name], "error": f"{type(exc).__name__}: {exc}"}
            continue
        per_class = _mean_per_class_f1(result["folds"], corpus.label_names)
        rows[name] = {
            "title": VARIANT_TITLES[name],
            "features": {
                "content": True,
                "user": cfg.use_user,
                "topic": cfg.use_topic,
                "comment": cfg.use_comment,
                "shared_user_roles": cfg.shared_user_roles,
            },
            "f_score": per_class,
            "f1_snu": result["f1_snu"],
            "accuracy": result["accuracy"],
            "folds": result["folds"],
            "seconds": round(time.perf_counter() - t0, 2),
        }
    return {
        "label_names": list(corpus.label_names),
        "model_config": base_config.to_dict(),
        "train_config": train_config.to_dict(),
        "variants": rows,
    }


def _mean_per_class_f1(folds, label_names):
    out = {}
    for name in label_names:
        out[name] = float(np.mean([f["metrics"]["per_class"][name]["f1"] for f in folds]))
    return out
