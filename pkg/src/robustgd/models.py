"""Differentiable loss models producing per-observation gradient rows.

Two models: linear regression under squared loss, and multiclass logistic
regression with a fixed zero reference class and squared-l2 regularization.
Every model exposes the per-row losses and gradients so the robust gradient
estimator can summarize them column-wise; the row mean always equals the
(regularized) empirical risk gradient.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp


@dataclass
class Dataset:
    """Observations: (n, F) inputs and n targets (real or class index)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be an (n, F) matrix")
        if self.inputs.shape[0] < 1:
            raise ValueError("need at least one observation")
        if len(self.targets) != self.inputs.shape[0]:
            raise ValueError("inputs and targets disagree on n")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("inputs contain non-finite entries")

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def n_features(self):
        return self.inputs.shape[1]

    def subset(self, idx):
        return Dataset(self.inputs[idx], self.targets[idx])


@dataclass
class LinearModel:
    """Linear predictor scored by squared error / 2."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be a finite 1-D vector")

    @property
    def dim(self):
        return self.weights.shape[0]

    def with_weights(self, w):
        return replace(self, weights=np.asarray(w, dtype=float))


@dataclass
class LogisticModel:
    """Multiclass logistic regression with class C-1 as the zero-scored
    reference, so d = (classes - 1) * features free parameters.

    ``reg_strength`` a adds a * ||w||^2 to every observation's loss (and
    2 a w to every gradient row), keeping each row an unbiased sample of the
    regularized risk gradient.
    """

    classes: int
    features: int
    weights: np.ndarray
    reg_strength: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.classes < 2:
            raise ValueError("need at least two classes")
        if self.weights.shape[0] != (self.classes - 1) * self.features:
            raise ValueError("weights must have length (classes - 1) * features")
        if self.reg_strength < 0:
            raise ValueError("reg_strength must be non-negative")

    @property
    def dim(self):
        return self.weights.shape[0]

    @property
    def weight_matrix(self):
        return self.weights.reshape(self.classes - 1, self.features)

    def with_weights(self, w):
        return replace(self, weights=np.asarray(w, dtype=float))

    def scores(self, inputs):
        """(n, classes) decision scores; the reference class scores zero."""
        z = inputs @ self.weight_matrix.T
        return np.hstack([z, np.zeros((inputs.shape[0], 1))])


def loss_and_grad_rows(model, dataset):
    """Per-observation losses and gradient rows at the model's weights.

    Returns (losses, G) with losses (n,) and G (n, d); the mean of G over
    rows is the gradient of the (regularized) empirical risk.
    """
    if isinstance(model, LinearModel):
        X, y = dataset.inputs, np.asarray(dataset.targets, dtype=float)
        if X.shape[1] != model.dim:
            raise ValueError("feature count does not match model dimension")
        r = X @ model.weights - y
        return 0.5 * r * r, r[:, None] * X
    if isinstance(model, LogisticModel):
        X = dataset.inputs
        y = np.asarray(dataset.targets)
        if X.shape[1] != model.features:
            raise ValueError("feature count does not match model features")
        if y.dtype.kind not in "iu":
            raise ValueError("classification targets must be integer class indices")
        if y.min() < 0 or y.max() >= model.classes:
            raise ValueError("class index out of range")
        n = X.shape[0]
        full = model.scores(X)
        lse = logsumexp(full, axis=1)
        losses = lse - full[np.arange(n), y]
        p = np.exp(full - lse[:, None])[:, : model.classes - 1]  # (n, C-1)
        ind = np.zeros_like(p)
        rows = y < model.classes - 1
        ind[np.flatnonzero(rows), y[rows]] = 1.0
        G = (p - ind)[:, :, None] * X[:, None, :]  # (n, C-1, F)
        G = G.reshape(n, model.dim)
        a = model.reg_strength
        if a > 0:
            losses = losses + a * model.weights @ model.weights
            G = G + 2.0 * a * model.weights
        return losses, G
    raise TypeError(f"unsupported model type: {type(model).__name__}")


def predict(model, dataset):
    """Predicted targets: real values for regression, argmax class (lowest
    index wins ties) for classification."""
    if isinstance(model, LinearModel):
        return dataset.inputs @ model.weights
    if isinstance(model, LogisticModel):
        return np.argmax(model.scores(dataset.inputs), axis=1)
    raise TypeError(f"unsupported model type: {type(model).__name__}")


def misclassification_rate(model, dataset):
    """Fraction of observations whose argmax class disagrees with the label."""
    preds = predict(model, dataset)
    return float(np.mean(preds != np.asarray(dataset.targets)))


def empirical_risk(model, dataset):
    """Mean per-observation loss at the model's weights."""
    losses, _ = loss_and_grad_rows(model, dataset)
    return float(losses.mean())
