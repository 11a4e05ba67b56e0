"""Stance classification of social-media posts from text, users, topics and comments."""
from .corpus import Comment, Corpus, Post, make_splits, read_corpus, write_corpus
from .embeddings import WordTable, load_word_embeddings
from .estimator import UTCNNClassifier
from .exceptions import (
    BackwardStateError,
    CheckpointError,
    CheckpointVersionError,
    DataFormatError,
    DimensionError,
    EmptyPoolError,
    ModelInputError,
    NumericError,
    UTCNNError,
)
from .metrics import MetricsReport, aggregate_cv, evaluate
from .model import ModelConfig, ParameterSet
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Comment", "Corpus", "Post", "make_splits", "read_corpus", "write_corpus",
    "WordTable", "load_word_embeddings", "UTCNNClassifier",
    "BackwardStateError", "CheckpointError", "CheckpointVersionError", "DataFormatError",
    "DimensionError", "EmptyPoolError", "ModelInputError", "NumericError", "UTCNNError",
    "MetricsReport", "aggregate_cv", "evaluate", "ModelConfig", "ParameterSet",
    "TrainConfig", "train",
]
