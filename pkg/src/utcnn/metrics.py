"""Classification metrics for imbalanced stance data.

The headline score ``f1_snu`` is the harmonic mean of the class-averaged
precision and the class-averaged recall.  It is *not* the mean of the
per-class F-scores; that number is reported separately as ``macro_f1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _harmonic(p, r):
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


@dataclass
class MetricsReport:
    confusion: np.ndarray  # rows are gold classes, columns predictions
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_p: float
    macro_r: float
    f1_snu: float
    macro_f1: float
    accuracy: float
    n: int
    label_names: list = field(default_factory=list)

    def to_dict(self) -> dict:
        names = self.label_names or [str(i) for i in range(len(self.precision))]
        return {
            "confusion": self.confusion.tolist(),
            "per_class": {
                name: {"precision": float(p), "recall": float(r), "f1": float(f)}
                for name, p, r, f in zip(names, self.precision, self.recall, self.f1)
            },
            "macro_p": self.macro_p,
            "macro_r": self.macro_r,
            "f1_snu": self.f1_snu,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "n": self.n,
        }


def confusion_matrix(gold, pred, n_classes: int) -> np.ndarray:
    gold = np.asarray(gold, dtype=int)
    pred = np.asarray(pred, dtype=int)
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (gold, pred), 1)
    return cm


def evaluate(gold: Sequence[int], pred: Sequence[int], n_classes: int,
             label_names: Optional[Sequence[str]] = None) -> MetricsReport:
    """Score predictions against gold labels.

    Undefined precision or recall (0/0) counts as 0.
    """
    gold = np.asarray(gold, dtype=int)
    pred = np.asarray(pred, dtype=int)
    if gold.shape != pred.shape:
        raise ValueError(f"gold has {gold.size} labels but pred has {pred.size}")
    if gold.size == 0:
        raise ValueError("cannot evaluate an empty label sequence")
    for name, arr in (("gold", gold), ("pred", pred)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"{name} labels must lie in [0, {n_classes})")
    cm = confusion_matrix(gold, pred, n_classes)
    tp = np.diag(cm)
    precision = _safe_div(tp, cm.sum(axis=0))
    recall = _safe_div(tp, cm.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    macro_p = float(precision.mean())
    macro_r = float(recall.mean())
    return MetricsReport(
        confusion=cm,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_p=macro_p,
        macro_r=macro_r,
        f1_snu=_harmonic(macro_p, macro_r),
        macro_f1=float(f1.mean()),
        accuracy=float(tp.sum() / gold.size),
        n=int(gold.size),
        label_names=list(label_names) if label_names is not None else [],
    )


def aggregate_cv(folds) -> dict:
    """Average fold scores without weighting.

    ``folds`` is a list of :class:`MetricsReport` (or dicts with
    ``accuracy`` and ``f1_snu``), or a mapping from topic to such a list.
    For a mapping, each topic is averaged over its folds first and the
    ``AVG`` entry is the unweighted mean over topics.
    """
    if isinstance(folds, Mapping):
        per_topic = {topic: aggregate_cv(reports) for topic, reports in folds.items()}
        if not per_topic:
            raise ValueError("no topics to aggregate")
        avg = {
            key: float(np.mean([s[key] for s in per_topic.values()]))
            for key in ("accuracy", "f1_snu")
        }
        return {"topics": per_topic, "AVG": avg}
    rows = [r.to_dict() if isinstance(r, MetricsReport) else r for r in folds]
    if not rows:
        raise ValueError("no folds to aggregate")
    return {
        "accuracy": float(np.mean([r["accuracy"] for r in rows])),
        "f1_snu": float(np.mean([r["f1_snu"] for r in rows])),
        "n_folds": len(rows),
    }
