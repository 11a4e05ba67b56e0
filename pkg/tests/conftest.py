import numpy as np
import pytest

from utcnn.corpus import Comment, Post
from utcnn.embeddings import random_word_table
from utcnn.model import ModelConfig, ParameterSet

TOKENS = [f"w{i}" for i in range(12)]


def tiny_params(seed=0, **overrides):
    """A small model whose every tensor is cheap to finite-difference."""
    words = random_word_table(TOKENS, dim=6, seed=seed)
    settings = dict(word_dim=6, user_dim=2, topic_dim=2, vector_dim=3, conv_len=4, n_classes=3, seed=seed)
    settings.update(overrides)
    return ParameterSet(ModelConfig(**settings), words)


def random_post(rng, n_users=20, n_topics=5, label=None, pid="p"):
    pick = lambda n: [TOKENS[i] for i in rng.integers(len(TOKENS), size=n)]
    users = [f"u{i}" for i in rng.permutation(n_users)]
    n_likers = int(rng.integers(0, 5))
    comments = [Comment(f"u{int(rng.integers(n_users))}", pick(int(rng.integers(0, 5))))
                for _ in range(int(rng.integers(0, 4)))]
    k = int(rng.integers(1, 4))
    topics = [f"t{i}" for i in rng.choice(n_topics, size=k, replace=False)]
    if label is None:
        label = int(rng.integers(3))
    return Post(pid, pick(int(rng.integers(0, 9))), users[0], users[1:1 + n_likers], comments, topics, label)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting ---------------------------------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")
    config._criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        item.config._criteria.append((marker.args[0], marker.args[1], status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = sorted(getattr(config, "_criteria", []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in rows:
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}" + (f": {detail}" if detail else ""))
