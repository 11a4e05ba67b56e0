"""scikit-learn compatible wrapper around the UTCNN model and its trainer."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import model as M
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import ratio_split
from .embeddings import WordTable, load_word_embeddings
from .metrics import MetricsReport, evaluate
from .training import TrainConfig, predict_posts, train
from .validation import check_labels, check_posts, with_labels


class UTCNNClassifier(ClassifierMixin, BaseEstimator):
    """Stance classifier over posts with authors, likers, comments and topics.

    ``X`` is a sequence of :class:`~utcnn.corpus.Post` (or dicts in the
    corpus schema, or a :class:`~utcnn.corpus.Corpus`); ``y`` holds class
    indices and defaults to the posts' own labels.

    Parameters
    ----------
    word_table : WordTable or path
        Pretrained word vectors; a path is read as a text embedding file.
        The vectors stay frozen during training.
    n_classes : int, optional
        Number of classes.  Inferred from ``y`` when omitted.
    word_dim, user_dim, topic_dim, vector_dim, conv_len : int
        Word vector size, rows of user and topic matrices, length of user
        and topic vectors, and convolution output width.
    fc_hidden : int, optional
        Width of one tanh hidden layer before the output layer.
    use_user, use_topic, use_comment, shared_user_roles : bool
        Ablation switches.
    learning_rate, adagrad_eps, max_epochs, patience :
        Optimiser and early-stopping settings.
    dev_fraction : float
        Share of the training posts held out for early stopping when no
        explicit dev set is passed to :meth:`fit`.
    random_state : int
        Seeds initialisation, the dev split and the example order.
    """

    def __init__(self, word_table=None, n_classes=None, word_dim=50, user_dim=5, topic_dim=5,
                 vector_dim=10, conv_len=50, fc_hidden=None, use_user=True, use_topic=True,
                 use_comment=True, shared_user_roles=False, learning_rate=0.03, adagrad_eps=1e-8,
                 max_epochs=30, patience=5, dev_fraction=0.1, random_state=0):
        self.word_table = word_table
        self.n_classes = n_classes
        self.word_dim = word_dim
        self.user_dim = user_dim
        self.topic_dim = topic_dim
        self.vector_dim = vector_dim
        self.conv_len = conv_len
        self.fc_hidden = fc_hidden
        self.use_user = use_user
        self.use_topic = use_topic
        self.use_comment = use_comment
        self.shared_user_roles = shared_user_roles
        self.learning_rate = learning_rate
        self.adagrad_eps = adagrad_eps
        self.max_epochs = max_epochs
        self.patience = patience
        self.dev_fraction = dev_fraction
        self.random_state = random_state

    def _words(self) -> WordTable:
        if isinstance(self.word_table, WordTable):
            return self.word_table
        if isinstance(self.word_table, (str, Path)):
            return load_word_embeddings(self.word_table, self.word_dim)
        raise ValueError("word_table must be a WordTable or a path to an embedding file")

    def model_config(self, n_classes: int, word_dim: int) -> M.ModelConfig:
        return M.ModelConfig(
            word_dim=word_dim, user_dim=self.user_dim, topic_dim=self.topic_dim,
            vector_dim=self.vector_dim, conv_len=self.conv_len, n_classes=n_classes,
            fc_hidden=self.fc_hidden, use_user=self.use_user, use_topic=self.use_topic,
            use_comment=self.use_comment, shared_user_roles=self.shared_user_roles,
            seed=self.random_state,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, eps=self.adagrad_eps,
                           max_epochs=self.max_epochs, patience=self.patience,
                           seed=self.random_state)

    def fit(self, X, y=None, X_dev=None, y_dev=None):
        posts = check_posts(X)
        if not posts:
            raise ValueError("cannot fit on zero posts")
        y = check_labels(posts, y, self.n_classes)
        n_classes = self.n_classes or int(y.max()) + 1
        posts = with_labels(posts, y)
        if X_dev is not None:
            dev = check_posts(X_dev)
            dev = with_labels(dev, check_labels(dev, y_dev, n_classes))
            train_posts = posts
        elif self.dev_fraction and len(posts) >= 10:
            keep, held = ratio_split(y, (1.0 - self.dev_fraction, self.dev_fraction), self.random_state)
            train_posts = [posts[i] for i in keep]
            dev = [posts[i] for i in held]
        else:
            train_posts, dev = posts, []
        words = self._words()
        params = M.ParameterSet(self.model_config(n_classes, words.dim), words)
        self.params_, self.history_ = train(train_posts, dev, params, self.train_config())
        self.classes_ = np.arange(n_classes)
        self.n_classes_ = n_classes
        return self

    def decision_function(self, X) -> np.ndarray:
        """Logits, one row per post."""
        check_is_fitted(self, "params_")
        posts = check_posts(X)
        rows = [M.forward(p, self.params_, register=False)[0].data for p in posts]
        return np.array(rows).reshape(len(posts), self.n_classes_)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        return predict_posts(check_posts(X), self.params_)[1]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def transform(self, X) -> np.ndarray:
        """The post representation fed to the output layer."""
        check_is_fitted(self, "params_")
        return np.array([M.post_features(p, self.params_, register=False).data for p in check_posts(X)])

    def report(self, X, y=None, label_names=None) -> MetricsReport:
        posts = check_posts(X)
        y = check_labels(posts, y, self.n_classes_)
        return evaluate(y, self.predict(posts), self.n_classes_, label_names)

    def save(self, path, label_names=None) -> None:
        check_is_fitted(self, "params_")
        save_checkpoint(path, self.params_, label_names, extra={"history": self.history_})

    @classmethod
    def load(cls, path) -> "UTCNNClassifier":
        params, doc = load_checkpoint(path)
        c = params.config
        est = cls(word_table=params.words, n_classes=c.n_classes, word_dim=c.word_dim,
                  user_dim=c.user_dim, topic_dim=c.topic_dim, vector_dim=c.vector_dim,
                  conv_len=c.conv_len, fc_hidden=c.fc_hidden, use_user=c.use_user,
                  use_topic=c.use_topic, use_comment=c.use_comment,
                  shared_user_roles=c.shared_user_roles, random_state=c.seed)
        est.params_ = params
        est.history_ = doc.get("extra", {}).get("history", [])
        est.classes_ = np.arange(c.n_classes)
        est.n_classes_ = c.n_classes
        return est
