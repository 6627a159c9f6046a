import numpy as np
import pytest

from pronlearn.gbdt import (
    GbdtError,
    build_features,
    load_gbdt,
    predict,
    save_gbdt,
    train_gbdt,
)


def toy_separable(n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 6))
    y = (x[:, 0] + 0.5 * x[:, 3] > 0).astype(float)
    # nudge points off the boundary so the set is cleanly separable
    x[:, 0] += np.where(y > 0, 0.5, -0.5)
    return x, y


class TestBuildFeatures:
    def test_k1_is_plain_mean(self):
        rng = np.random.default_rng(1)
        u, t = rng.standard_normal((5, 3)), rng.standard_normal((7, 3))
        f = build_features(u, t, k=1)
        np.testing.assert_allclose(f[:3], u.mean(axis=0))
        np.testing.assert_allclose(f[3:], t.mean(axis=0))

    def test_identical_matrices_symmetric_halves(self):
        m = np.random.default_rng(2).standard_normal((6, 4))
        f = build_features(m, m, k=4)
        np.testing.assert_array_equal(f[:16], f[16:])

    def test_short_sequence_zero_padded_segments(self):
        m = np.arange(6, dtype=float).reshape(2, 3)
        f = build_features(m, m, k=4)
        # segments 3 and 4 pool only padding rows
        np.testing.assert_array_equal(f[:3], m[0])
        np.testing.assert_array_equal(f[3:6], m[1])
        np.testing.assert_array_equal(f[6:12], 0.0)

    def test_fixed_length(self):
        rng = np.random.default_rng(3)
        for n, m in [(1, 9), (4, 4), (12, 2)]:
            f = build_features(rng.standard_normal((n, 5)), rng.standard_normal((m, 5)), k=4)
            assert f.shape == (2 * 5 * 4,)

    def test_width_mismatch(self):
        with pytest.raises(GbdtError):
            build_features(np.zeros((3, 4)), np.zeros((3, 5)))


class TestTrainGbdt:
    def test_zero_trees_predicts_prior(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=0)
        probs = predict(model, x)
        np.testing.assert_allclose(probs, y.mean(), atol=1e-12)

    def test_separable_reaches_perfect_training_accuracy(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=50, max_depth=3)
        preds = predict(model, x) > 0.5
        assert (preds == y.astype(bool)).mean() == 1.0

    def test_loss_non_increasing(self):
        x, y = toy_separable(n=60, seed=4)
        model = train_gbdt(x, y, n_trees=40, max_depth=3)
        log = np.array(model.train_log)
        assert np.all(np.diff(log) <= 1e-12)

    def test_single_class_rejected(self):
        x = np.random.default_rng(0).standard_normal((10, 3))
        with pytest.raises(GbdtError):
            train_gbdt(x, np.zeros(10))

    def test_too_few_examples_rejected(self):
        with pytest.raises(GbdtError):
            train_gbdt(np.zeros((1, 3)), np.array([1.0]))

    def test_zero_shrinkage_stays_at_prior(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=20, shrinkage=0.0)
        np.testing.assert_allclose(predict(model, x), y.mean(), atol=1e-12)

    def test_splits_within_feature_range(self):
        x, y = toy_separable(n=50, seed=5)
        model = train_gbdt(x, y, n_trees=30, max_depth=4)
        for tree in model.trees:
            for node in tree.nodes:
                if not node.is_leaf:
                    assert 0 <= node.feature < x.shape[1]

    def test_deterministic(self):
        x, y = toy_separable(n=50, seed=6)
        m1 = train_gbdt(x, y, n_trees=20)
        m2 = train_gbdt(x, y, n_trees=20)
        np.testing.assert_array_equal(predict(m1, x), predict(m2, x))


class TestPredict:
    def test_output_in_unit_interval(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=30)
        probs = predict(model, x)
        assert np.all((probs > 0) & (probs < 1))

    def test_deterministic_repeated_calls(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=10)
        np.testing.assert_array_equal(predict(model, x), predict(model, x))

    def test_memorized_point_on_correct_side(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=50, max_depth=3)
        for i in (0, 7, 23):
            p = predict(model, x[i])
            assert (p > 0.5) == bool(y[i])

    def test_order_invariance(self):
        x, y = toy_separable(n=30, seed=7)
        model = train_gbdt(x, y, n_trees=15)
        probs = predict(model, x)
        perm = np.random.default_rng(8).permutation(30)
        np.testing.assert_array_equal(predict(model, x[perm]), probs[perm])

    def test_feature_length_mismatch(self):
        x, y = toy_separable()
        model = train_gbdt(x, y, n_trees=5)
        with pytest.raises(GbdtError):
            predict(model, np.zeros(7))


class TestSerialization:
    def test_roundtrip_preserves_predictions(self, tmp_path):
        x, y = toy_separable(n=50, seed=9)
        model = train_gbdt(x, y, n_trees=25, max_depth=4)
        path = tmp_path / "model.gbdt"
        save_gbdt(model, path)
        loaded = load_gbdt(path)
        np.testing.assert_array_equal(predict(loaded, x), predict(model, x))

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.gbdt"
        p.write_text("nonsense\n")
        with pytest.raises(GbdtError):
            load_gbdt(p)
