import logging

import numpy as np
import pytest

from utcnn.embeddings import (
    UNK,
    EmbeddingTable,
    UserStore,
    Vocab,
    init_stores,
    load_word_embeddings,
    random_word_table,
    save_word_embeddings,
)
from utcnn.exceptions import DataFormatError


@pytest.fixture
def emb_file(tmp_path):
    def write(text):
        path = tmp_path / "emb.txt"
        path.write_text(text, encoding="utf-8")
        return path
    return write


class TestVocab:
    def test_unk_is_index_zero(self):
        v = Vocab(["a", "b"])
        assert v.token(0) == UNK
        assert v.index("zzz") == 0
        assert v.indices(["b", "q", "a"]).tolist() == [2, 0, 1]

    def test_bijective_over_known_tokens(self):
        v = Vocab(["x", "y", "z"])
        for tok in ["x", "y", "z"]:
            assert v.token(v.index(tok)) == tok


class TestLoadWordEmbeddings:
    def test_example(self, emb_file):
        table = load_word_embeddings(emb_file("a 1 0\nb 0 1\n"), 2)
        assert len(table.vocab) == 3
        np.testing.assert_array_equal(table.lookup("a"), [1, 0])
        np.testing.assert_array_equal(table.lookup("zzz"), [0, 0])

    def test_wrong_float_count_reports_line(self, emb_file):
        with pytest.raises(DataFormatError) as err:
            load_word_embeddings(emb_file("a 1\n"), 2)
        assert err.value.lineno == 1

    def test_bad_float_on_later_line(self, emb_file):
        with pytest.raises(DataFormatError) as err:
            load_word_embeddings(emb_file("a 1 0\nb 0 x\n"), 2)
        assert err.value.lineno == 2

    def test_empty_file(self, emb_file):
        with pytest.raises(DataFormatError):
            load_word_embeddings(emb_file(""), 2)

    def test_duplicates_first_wins(self, emb_file, caplog):
        with caplog.at_level(logging.WARNING):
            table = load_word_embeddings(emb_file("a 1 0\na 5 5\nb 0 1\n"), 2)
        np.testing.assert_array_equal(table.lookup("a"), [1, 0])
        assert table.n_duplicates == 1
        assert "duplicate" in caplog.text

    def test_frozen_table_is_read_only(self, emb_file):
        table = load_word_embeddings(emb_file("a 1 0\n"), 2)
        assert table.frozen
        with pytest.raises(ValueError):
            table.matrix[1, 0] = 3.0

    def test_save_load_round_trip(self, tmp_path):
        table = random_word_table(["p", "q", "r"], dim=4, seed=3)
        save_word_embeddings(table, tmp_path / "w.txt")
        again = load_word_embeddings(tmp_path / "w.txt", 4)
        assert again.vocab.tokens == table.vocab.tokens
        assert again.matrix.tobytes() == table.matrix.tobytes()


class TestStores:
    def test_same_seed_is_bitwise_identical(self):
        a_users, a_topics = init_stores(["u1", "u2", "u3"], 2, seed=5)
        b_users, b_topics = init_stores(["u1", "u2", "u3"], 2, seed=5)
        for (ka, ma, va), (kb, mb, vb) in zip(a_users.tables["author_liker"].parameters(),
                                               b_users.tables["author_liker"].parameters()):
            assert ka == kb and ma.data.tobytes() == mb.data.tobytes() and va.data.tobytes() == vb.data.tobytes()
        for (_, ma, _), (_, mb, _) in zip(a_topics.parameters(), b_topics.parameters()):
            assert ma.data.tobytes() == mb.data.tobytes()

    def test_entries_in_init_range(self):
        users, topics = init_stores([f"u{i}" for i in range(50)], 10, seed=1)
        values = [p.data for t in (users.tables["author_liker"], users.tables["commenter"], topics)
                  for _, m, v in t.parameters() for p in (m, v)]
        flat = np.concatenate([v.ravel() for v in values])
        assert flat.min() >= -0.1 and flat.max() <= 0.1

    def test_user_matrix_holds_250_values(self):
        users, _ = init_stores(["a", "b", "c"], 1)
        for uid in ["a", "b", "c"]:
            m, v = users.lookup(uid)
            assert m.data.size == 250 and m.shape == (5, 50) and v.shape == (10,)

    def test_zero_users_or_topics(self):
        with pytest.raises(ValueError):
            init_stores([], 2)
        with pytest.raises(ValueError):
            init_stores(["u"], 0)

    def test_roles_distinct_unless_shared(self):
        full = UserStore(2, 4, 3, seed=0)
        assert full.lookup("u", "author_liker")[0] is not full.lookup("u", "commenter")[0]
        shared = UserStore(2, 4, 3, seed=0, shared_roles=True)
        assert shared.lookup("u", "author_liker")[0] is shared.lookup("u", "commenter")[0]

    def test_unseen_user_registers_fresh_entry(self):
        store = UserStore(2, 4, 3, seed=0)
        m, v = store.lookup("new")
        assert "new" in store.tables["author_liker"]
        assert np.abs(m.data).max() <= 0.1 and np.abs(v.data).max() <= 0.1

    def test_initialisation_ignores_registration_order(self):
        a = EmbeddingTable((2, 3), 4, seed=9, salt="x")
        b = EmbeddingTable((2, 3), 4, seed=9, salt="x")
        a.register(["p", "q", "r"])
        b.register(["r", "p", "q"])
        for key in "pqr":
            assert a.get(key)[0].data.tobytes() == b.get(key)[0].data.tobytes()

    def test_lookup_without_register_leaves_store_unchanged(self):
        table = EmbeddingTable((2, 3), 4, seed=0)
        m1, _ = table.get("ghost", register=False)
        m2, _ = table.get("ghost", register=False)
        assert len(table) == 0
        assert m1.data.tobytes() == m2.data.tobytes()
