"""Loss models: hand-evaluated examples, finite-difference oracles, and
convexity/regularizer consistency."""

import numpy as np
import pytest

from robustgd.models import (
    Dataset,
    LinearModel,
    LogisticModel,
    empirical_risk,
    loss_and_grad_rows,
    misclassification_rate,
    predict,
)

from oracles import finite_difference_gradient


def random_logistic(seed=0, classes=3, features=2, n=20, reg=0.0):
    rng = np.random.default_rng(seed)
    w = rng.normal(scale=0.5, size=(classes - 1) * features)
    model = LogisticModel(classes, features, w, reg_strength=reg)
    ds = Dataset(rng.normal(size=(n, features)),
                 rng.integers(classes, size=n))
    return model, ds


class TestLinearModel:
    def test_zero_loss_at_truth(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=4)
        X = rng.normal(size=(9, 4))
        ds = Dataset(X, X @ w)
        losses, G = loss_and_grad_rows(LinearModel(w), ds)
        assert np.allclose(losses, 0.0, atol=1e-20)
        assert np.allclose(G, 0.0, atol=1e-10)

    def test_hand_evaluated_single_row(self):
        ds = Dataset(np.array([[1.0, 0.0]]), np.array([0.0]))
        losses, G = loss_and_grad_rows(LinearModel(np.array([1.0, 0.0])), ds)
        assert losses[0] == pytest.approx(0.5)
        assert np.allclose(G[0], [1.0, 0.0])

    def test_row_mean_is_empirical_gradient(self):
        rng = np.random.default_rng(2)
        w = rng.normal(size=3)
        ds = Dataset(rng.normal(size=(30, 3)), rng.normal(size=30))
        _, G = loss_and_grad_rows(LinearModel(w), ds)
        fd = finite_difference_gradient(
            lambda v: empirical_risk(LinearModel(v), ds), w)
        assert np.allclose(G.mean(axis=0), fd, rtol=1e-6, atol=1e-8)

    def test_dimension_mismatch(self):
        ds = Dataset(np.ones((3, 2)), np.ones(3))
        with pytest.raises(ValueError):
            loss_and_grad_rows(LinearModel(np.ones(4)), ds)


class TestLogisticModel:
    def test_row_gradients_match_finite_differences(self):
        model, ds = random_logistic(seed=3)
        _, G = loss_and_grad_rows(model, ds)
        for i in [0, 7, 19]:
            row = ds.subset([i])

            def row_loss(w):
                return loss_and_grad_rows(model.with_weights(w), row)[0][0]

            fd = finite_difference_gradient(row_loss, model.weights)
            denom = np.maximum(np.abs(fd), 1e-8)
            assert np.max(np.abs(G[i] - fd) / denom) < 1e-5

    @pytest.mark.parametrize("model_seed", range(5))
    def test_mean_gradient_matches_finite_differences(self, model_seed):
        model, ds = random_logistic(seed=model_seed, reg=0.01)
        _, G = loss_and_grad_rows(model, ds)
        fd = finite_difference_gradient(
            lambda w: empirical_risk(model.with_weights(w), ds), model.weights)
        assert np.max(np.abs(G.mean(axis=0) - fd)) < 1e-6 * (1 + np.abs(fd).max())

    def test_regularizer_adds_two_a_w_to_every_row(self):
        model, ds = random_logistic(seed=4)
        reg = LogisticModel(model.classes, model.features, model.weights,
                            reg_strength=0.7)
        _, G0 = loss_and_grad_rows(model, ds)
        _, G1 = loss_and_grad_rows(reg, ds)
        assert np.allclose(G1 - G0, 2 * 0.7 * model.weights, atol=1e-12)

    def test_convexity_midpoint_inequality(self):
        model, ds = random_logistic(seed=5, reg=0.001)
        rng = np.random.default_rng(6)
        for _ in range(5):
            w1 = rng.normal(size=model.dim)
            w2 = rng.normal(size=model.dim)
            mid = empirical_risk(model.with_weights(0.5 * (w1 + w2)), ds)
            avg = 0.5 * (empirical_risk(model.with_weights(w1), ds)
                         + empirical_risk(model.with_weights(w2), ds))
            assert mid <= avg + 1e-12

    def test_linear_convexity_midpoint_inequality(self):
        rng = np.random.default_rng(7)
        ds = Dataset(rng.normal(size=(25, 3)), rng.normal(size=25))
        for _ in range(5):
            w1 = rng.normal(size=3)
            w2 = rng.normal(size=3)
            mid = empirical_risk(LinearModel(0.5 * (w1 + w2)), ds)
            avg = 0.5 * (empirical_risk(LinearModel(w1), ds)
                         + empirical_risk(LinearModel(w2), ds))
            assert mid <= avg + 1e-12

    def test_weight_shape_validation(self):
        with pytest.raises(ValueError):
            LogisticModel(3, 2, np.zeros(5))
        with pytest.raises(ValueError):
            LogisticModel(3, 2, np.zeros(4), reg_strength=-1.0)

    def test_label_range_validation(self):
        model, _ = random_logistic()
        ds = Dataset(np.ones((2, 2)), np.array([0, 3]))
        with pytest.raises(ValueError):
            loss_and_grad_rows(model, ds)


class TestPrediction:
    def test_zero_weights_tie_break_picks_lowest_class(self):
        # all scores are zero; argmax resolves ties to class 0
        model = LogisticModel(2, 3, np.zeros(3))
        ds = Dataset(np.ones((10, 3)), np.array([0] * 5 + [1] * 5))
        preds = predict(model, ds)
        assert np.all(preds == 0)
        assert misclassification_rate(model, ds) == pytest.approx(0.5)

    def test_separable_two_points(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([0, 1])
        model = LogisticModel(2, 1, np.array([4.0]))
        assert misclassification_rate(model, Dataset(X, y)) == 0.0

    def test_hand_enumerated_rates(self):
        # three classes, two features, fixed weights; scores enumerated by hand
        w = np.array([[1.0, 0.0],   # class 0
                      [0.0, 1.0]])  # class 1; class 2 scores 0
        model = LogisticModel(3, 2, w.ravel())
        X = np.array([[2.0, 0.0],    # scores (2, 0, 0)  -> class 0
                      [0.0, 3.0],    # scores (0, 3, 0)  -> class 1
                      [-1.0, -1.0],  # scores (-1, -1, 0) -> class 2
                      [1.0, 1.0]])   # scores (1, 1, 0)  -> tie -> class 0
        ds = Dataset(X, np.array([0, 1, 2, 1]))
        assert np.array_equal(predict(model, ds), [0, 1, 2, 0])
        assert misclassification_rate(model, ds) == pytest.approx(0.25)

    def test_regression_predict(self):
        ds = Dataset(np.array([[1.0, 2.0]]), np.array([0.0]))
        assert predict(LinearModel(np.array([3.0, -1.0])), ds)[0] == pytest.approx(1.0)
