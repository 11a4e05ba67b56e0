import numpy as np
import pytest
from conftest import random_post, tiny_params

from utcnn import model as M
from utcnn import tensor as tn
from utcnn.corpus import Comment, Post
from utcnn.embeddings import random_word_table
from utcnn.exceptions import ModelInputError
from utcnn.tensor import Parameter, Tensor


def _post(**kw):
    base = dict(id="p", tokens=["w1", "w2", "w3"], author="a", likers=["b", "c"],
                comments=[Comment("d", ["w4"]), Comment("e", ["w5", "w6"])], topics=["t1", "t2"], label=1)
    base.update(kw)
    return Post(**base)


class TestConfig:
    def test_window_sizes_fixed(self):
        with pytest.raises(ValueError):
            M.ModelConfig(window_sizes=(1, 2))

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            M.ModelConfig(n_classes=1)

    def test_conv_filters_take_transformed_width(self):
        params = tiny_params()
        for l in (1, 2, 3):
            W, b = params.conv(l)
            assert W.shape == (4, (2 + 2) * l) and b.shape == (4,)

    def test_feature_dim(self):
        cfg = M.ModelConfig()
        assert cfg.feature_dim == 2 * 50 + 4 * 10
        assert tiny_params().dense["out.weight"].shape == (3, 2 * 4 + 4 * 3)


class TestTransformWords:
    def test_unit_selectors(self):
        out = M.transform_words(np.array([[3.0, 4.0]]), Tensor([[1.0, 0.0]]), Tensor([[0.0, 1.0]]))
        np.testing.assert_array_equal(out.data, [[3, 4]])

    def test_zero_matrices(self, rng):
        out = M.transform_words(rng.normal(size=(5, 2)), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))))
        np.testing.assert_array_equal(out.data, np.zeros((5, 2)))

    def test_unknown_word_maps_to_zero(self, rng):
        params = tiny_params()
        X = params.words.vectors(["never-seen"])
        out = M.transform_words(X, Tensor(rng.normal(size=(2, 6))), Tensor(rng.normal(size=(2, 6))))
        np.testing.assert_array_equal(out.data, np.zeros((1, 4)))


class TestComposeDocument:
    def test_empty_document_is_zero(self):
        params = tiny_params()
        out = M.compose_document(np.zeros((0, 4)), params)
        np.testing.assert_array_equal(out.data, np.zeros(4))

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 7])
    def test_output_length_is_conv_len(self, rng, n):
        params = tiny_params()
        out = M.compose_document(rng.normal(size=(n, 4)), params)
        assert out.shape == (4,) and np.all(np.isfinite(out.data))

    def test_zero_filters_give_zero(self, rng):
        params = tiny_params()
        for p in params.dense.values():
            p.data[...] = 0.0
        np.testing.assert_array_equal(M.compose_document(rng.normal(size=(5, 4)), params).data, np.zeros(4))

    def test_matches_direct_computation(self, rng):
        # oracle: explicit loops over windows with zero padding
        params = tiny_params(seed=3)
        X = rng.normal(size=(2, 4))
        pooled = []
        for l in (1, 2, 3):
            W, b = params.conv(l)
            padded = np.vstack([X, np.zeros((max(0, l - len(X)), 4))])
            outs = [np.tanh(W.data @ padded[m:m + l].ravel() + b.data) for m in range(len(padded) - l + 1)]
            pooled.append(np.max(outs, axis=0))
        want = np.mean(pooled, axis=0)
        np.testing.assert_allclose(M.compose_document(X, params).data, want, rtol=0, atol=1e-15)


class TestPooling:
    def test_no_likers_is_author(self):
        params = tiny_params()
        U, u = M.moderator_pool("a", [], params)
        m, v = params.users.lookup("a")
        assert U.data.tobytes() == m.data.tobytes() and u.data.tobytes() == v.data.tobytes()

    def test_max_of_two_users(self):
        words = random_word_table(["w"], dim=2)
        params = M.ParameterSet(M.ModelConfig(word_dim=2, user_dim=1, topic_dim=1, vector_dim=3, conv_len=2), words)
        table = params.users.tables["author_liker"]
        table.entries["x"] = (Parameter([[1.0, 2.0]]), Parameter(np.zeros(3)))
        table.entries["y"] = (Parameter([[2.0, 1.0]]), Parameter(np.zeros(3)))
        U, _ = M.moderator_pool("x", ["y"], params)
        np.testing.assert_array_equal(U.data, [[2, 2]])

    def test_liker_order_is_irrelevant(self):
        params = tiny_params()
        a, _ = M.moderator_pool("a", ["b", "c", "d"], params)
        b, _ = M.moderator_pool("a", ["d", "b", "c"], params)
        assert a.data.tobytes() == b.data.tobytes()

    def test_no_user_uses_one_shared_entry(self):
        params = tiny_params(use_user=False)
        a = M.moderator_pool("a", ["b"], params)
        b = M.moderator_pool("z", [], params)
        assert a[0] is b[0] and a[1] is b[1]

    def test_topics(self):
        params = tiny_params()
        T, t = M.topic_pool(["t1"], params)
        assert T is params.topics.get("t1")[0]
        x = M.topic_pool(["t1", "t2", "t3"], params)[0].data
        y = M.topic_pool(["t3", "t1", "t2"], params)[0].data
        assert x.tobytes() == y.tobytes()

    def test_empty_topics_raise(self):
        with pytest.raises(ModelInputError):
            M.topic_pool([], tiny_params())
        # without topic information any post is fine
        M.topic_pool([], tiny_params(use_topic=False))


class TestComment:
    def test_empty_comment_text(self):
        params = tiny_params()
        T, t = M.topic_pool(["t1"], params)
        feat = M.compose_comment(Comment("d", []), T, t, params)
        _, r = params.users.lookup("d", "commenter")
        np.testing.assert_array_equal(feat.data, np.concatenate([np.zeros(4), r.data, t.data]))

    def test_same_word_transforms_differently_per_user(self):
        params = tiny_params()
        X = params.words.vectors(["w1"])
        T, _ = M.topic_pool(["t1"], params)
        post_side = M.transform_words(X, M.moderator_pool("a", [], params)[0], T).data
        comment_side = M.transform_words(X, params.users.lookup("d", "commenter")[0], T).data
        assert not np.allclose(post_side, comment_side)

    def test_shared_roles_use_one_storage(self):
        params = tiny_params(shared_user_roles=True)
        assert params.users.lookup("a", "commenter")[0] is params.users.lookup("a", "author_liker")[0]


class TestForward:
    def test_zero_comments(self):
        params = tiny_params()
        feats = M.post_features(_post(comments=[]), params).data
        np.testing.assert_array_equal(feats[:4 + 3 + 3], 0.0)
        _, probs = M.forward(_post(comments=[]), params)
        assert abs(probs.sum() - 1.0) <= 1e-12

    def test_no_comment_ablation_zeroes_slot(self):
        feats = M.post_features(_post(), tiny_params(use_comment=False)).data
        np.testing.assert_array_equal(feats[:10], 0.0)

    def test_engagement_permutations(self, rng):
        params = tiny_params(seed=1)
        for i in range(30):
            post = random_post(rng, pid=f"p{i}")
            logits = M.forward(post, params)[0].data
            perm = Post(post.id, post.tokens, post.author, list(rng.permutation(post.likers)),
                        [post.comments[j] for j in rng.permutation(len(post.comments))],
                        list(rng.permutation(post.topics)), post.label)
            assert M.forward(perm, params)[0].data.tobytes() == logits.tobytes()

    def test_content_only_when_all_sources_off(self):
        params = tiny_params(use_user=False, use_topic=False, use_comment=False)
        a = _post(author="x", likers=["y"], topics=["t1"], comments=[Comment("c", ["w9"])])
        b = _post(author="q", likers=[], topics=["t4", "t2"], comments=[])
        assert M.forward(a, params)[0].data.tobytes() == M.forward(b, params)[0].data.tobytes()

    def test_predict_tie_and_argmax(self):
        params = tiny_params()
        params.dense["out.weight"].data[...] = 0.0
        params.dense["out.bias"].data[...] = [0.5, 0.5, 0.1]
        assert M.predict(_post(), params) == 0
        params.dense["out.bias"].data[...] = [0.1, 0.9, 0.2]
        assert M.predict(_post(), params) == 1
        params.dense["out.bias"].data[...] += 7.0
        assert M.predict(_post(), params) == 1

    def test_predict_does_not_register_users(self):
        params = tiny_params()
        M.predict(_post(author="stranger", likers=["x"], topics=["tz"]), params)
        assert "stranger" not in params.users.tables["author_liker"]
        assert "tz" not in params.topics

    def test_hidden_layer(self):
        params = tiny_params(fc_hidden=5)
        _, probs = M.forward(_post(), params)
        assert params.dense["hidden.weight"].shape == (5, 20)
        assert abs(probs.sum() - 1) <= 1e-12


class TestGradients:
    def test_flow_only_to_engaged_rows(self):
        params = tiny_params()
        params.register_corpus([_post(), _post(author="z", likers=["y"], topics=["t9"],
                                              comments=[Comment("x", ["w1"])])])
        xent, _ = M.loss(_post(), params)
        reached = {id(p) for p in tn.backward(xent)}
        engaged = {("author_liker", u) for u in "abc"} | {("commenter", u) for u in "de"}
        for name, p in params.named_parameters():
            parts = name.split("/")
            if parts[0] == "user":
                expect = (parts[1], parts[2]) in engaged
            elif parts[0] == "topic":
                expect = parts[1] in ("t1", "t2")
            else:
                expect = True
            assert (id(p) in reached) == expect, name
            if not expect:
                assert not p.grad.any()

    def test_shared_roles_update_visible_through_both(self):
        params = tiny_params(shared_user_roles=True)
        post = _post(author="a", likers=[], comments=[Comment("a", ["w1", "w2"])])
        before = params.users.lookup("a", "commenter")[0].data.copy()
        xent, _ = M.loss(post, params)
        for p in tn.backward(xent):
            p.data -= 0.1 * p.grad
        after = params.users.lookup("a", "commenter")[0].data
        assert not np.array_equal(before, after)
        assert params.users.lookup("a", "author_liker")[0].data is after

    def test_tiny_model_gradcheck(self):
        params = tiny_params(seed=2)
        post = _post()
        params.register_corpus([post])
        err = tn.gradcheck(lambda: M.loss(post, params)[0], params.parameters())
        assert err <= 1e-4
