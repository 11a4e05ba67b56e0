"""Self-describing JSON checkpoints.

Floats are written with ``repr`` semantics (Python's ``json`` does this),
which round-trips every fp64 value exactly, so a reloaded model predicts
bit-for-bit like the saved one.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .embeddings import EmbeddingTable, TopicStore, UserStore, Vocab, WordTable
from .exceptions import CheckpointError, CheckpointVersionError
from .model import ModelConfig, ParameterSet
from .tensor import Parameter

FORMAT_VERSION = 1


def _arr(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _unarr(obj) -> np.ndarray:
    data = np.array(obj["data"], dtype=np.float64)
    return data.reshape(obj["shape"])


def _table_to_json(table: EmbeddingTable) -> dict:
    return {key: {"matrix": _arr(m.data), "vector": _arr(v.data)} for key, m, v in table.parameters()}


def _table_from_json(table: EmbeddingTable, obj: dict) -> None:
    table.entries = {
        key: (Parameter(_unarr(e["matrix"])), Parameter(_unarr(e["vector"]))) for key, e in obj.items()
    }


def checkpoint_dict(params: ParameterSet, label_names=None, extra: Optional[dict] = None) -> dict:
    return {
        "version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "label_names": list(label_names) if label_names is not None else None,
        "vocab": params.words.vocab.tokens,
        "params": {
            "words": _arr(params.words.matrix),
            "dense": {name: _arr(p.data) for name, p in params.dense.items()},
            "users": {role: _table_to_json(t) for role, t in params.users.distinct_tables()},
            "topics": _table_to_json(params.topics),
        },
        "extra": extra or {},
    }


def save_checkpoint(path, params: ParameterSet, label_names=None, extra: Optional[dict] = None) -> None:
    """Write atomically: the target is replaced only once the file is complete."""
    path = Path(path)
    doc = checkpoint_dict(params, label_names, extra)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def params_from_dict(doc: dict) -> ParameterSet:
    if not isinstance(doc, dict) or "version" not in doc:
        raise CheckpointError("not a checkpoint: missing 'version'")
    if doc["version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {doc['version']!r} is not supported (expected {FORMAT_VERSION})"
        )
    try:
        config = ModelConfig.from_dict(doc["config"])
        raw = doc["params"]
        vocab = Vocab(doc["vocab"][1:])
        if vocab.tokens != doc["vocab"]:
            raise CheckpointError("vocab does not start with the <unk> entry")
        words = WordTable(vocab, _unarr(raw["words"]))
        users = UserStore(config.user_dim, config.word_dim, config.vector_dim, config.seed,
                          config.shared_user_roles)
        for role, entries in raw["users"].items():
            _table_from_json(users.tables[role], entries)
        topics = TopicStore(config.topic_dim, config.word_dim, config.vector_dim, config.seed)
        _table_from_json(topics, raw["topics"])
        dense = {name: Parameter(_unarr(a)) for name, a in raw["dense"].items()}
        params = ParameterSet(config, words, users, topics, dense)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid checkpoint: {exc}") from None
    expected = ParameterSet(config, words)._init_dense()
    for name, p in expected.items():
        if name not in params.dense or params.dense[name].shape != p.shape:
            raise CheckpointError(f"dense parameter {name!r} missing or misshapen")
    return params


def load_checkpoint(path) -> tuple[ParameterSet, dict]:
    """Return the restored parameters and the raw document (for metadata)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc.msg})") from None
    return params_from_dict(doc), doc
