"""From-scratch classifiers: Euclidean k-nearest neighbours and a
one-hidden-layer ReLU/softmax perceptron trained on cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NotFittedError, TrainingError


class KnnModel:
    """Majority vote among the ``k`` nearest stored points.

    Distance ties go to the lower training index, vote ties to the smaller
    class index.
    """

    def __init__(self, k_neighbors=3):
        if k_neighbors < 1:
            raise ConfigurationError("k_neighbors must be positive")
        self.k_neighbors = k_neighbors
        self.X = None
        self.y = None
        self.n_classes = None

    def fit(self, X, y, n_classes=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.k_neighbors > len(X):
            raise ConfigurationError(
                f"k_neighbors={self.k_neighbors} exceeds training size {len(X)}")
        self.X, self.y = X, y
        self.n_classes = int(n_classes or y.max() + 1)
        return self

    def predict(self, X) -> np.ndarray:
        if self.X is None:
            raise NotFittedError("kNN model used before fit")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        diff = X[:, None, :] - self.X[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k_neighbors]
        votes = self.y[nearest]
        return np.array([np.bincount(v, minlength=self.n_classes).argmax() for v in votes])


def knn_predict(model: KnnModel, x) -> int:
    return int(model.predict(np.asarray(x)[None, :])[0])


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 16
    learning_rate: float = 0.05
    epochs: int = 500
    batch_size: int | None = None  # None: full batch
    seed: int = 0
    l2: float = 1e-4


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def init_params(d, hidden, n_classes, rng) -> dict[str, np.ndarray]:
    return {
        "W1": rng.standard_normal((d, hidden)) * np.sqrt(2.0 / d),
        "b1": np.zeros(hidden),
        "W2": rng.standard_normal((hidden, n_classes)) * np.sqrt(1.0 / hidden),
        "b2": np.zeros(n_classes),
    }


def forward(params, X):
    pre = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    return pre, hidden, softmax(hidden @ params["W2"] + params["b2"])


def loss_and_grad(params, X, y, l2=0.0):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its exact gradient."""
    n = len(X)
    pre, hidden, prob = forward(params, X)
    loss = -np.log(np.clip(prob[np.arange(n), y], 1e-300, None)).mean()
    loss += 0.5 * l2 * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))
    delta = prob.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = {"W2": hidden.T @ delta + l2 * params["W2"], "b2": delta.sum(axis=0)}
    dh = (delta @ params["W2"].T) * (pre > 0)
    grads["W1"] = X.T @ dh + l2 * params["W1"]
    grads["b1"] = dh.sum(axis=0)
    return float(loss), grads


@dataclass(eq=False)
class MlpModel:
    params: dict
    config: MlpConfig
    n_classes: int
    losses: list = field(default_factory=list)

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else None

    def predict_proba(self, X):
        return forward(self.params, np.atleast_2d(np.asarray(X, dtype=np.float64)))[2]

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)


def mlp_train(X, y, cfg: MlpConfig | None = None, n_classes=None) -> MlpModel:
    """Mini-batch gradient descent with a seeded shuffle schedule.

    ``losses[e]`` is the full-data objective before epoch ``e``'s updates, with
    one extra entry after the last epoch.
    """
    cfg = cfg or MlpConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    L = int(n_classes or y.max() + 1)
    if L < 2:
        raise ConfigurationError("MLP training needs at least 2 classes")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(X.shape[1], cfg.hidden, L, rng)
    n = len(X)
    bs = n if cfg.batch_size is None else max(1, min(cfg.batch_size, n))
    losses = []
    for epoch in range(cfg.epochs):
        order = np.arange(n) if bs == n else rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = loss_and_grad(params, X[idx], y[idx], cfg.l2)
            if bs == n:
                losses.append(loss)
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}", epoch=epoch)
            for key in params:
                params[key] -= cfg.learning_rate * grads[key]
        if bs != n:
            losses.append(loss_and_grad(params, X, y, cfg.l2)[0])
    final = loss_and_grad(params, X, y, cfg.l2)[0]
    if not np.isfinite(final):
        raise TrainingError(f"loss diverged at epoch {cfg.epochs}", epoch=cfg.epochs)
    losses.append(final)
    return MlpModel(params, cfg, L, losses)


class MlpClassifier:
    """``fit``/``predict`` adapter around :func:`mlp_train`."""

    def __init__(self, cfg: MlpConfig | None = None):
        self.cfg = cfg or MlpConfig()
        self.model = None

    def fit(self, X, y, n_classes=None):
        self.model = mlp_train(X, y, self.cfg, n_classes)
        return self

    def predict(self, X):
        if self.model is None:
            raise NotFittedError("MLP used before fit")
        return self.model.predict(X)


CLASSIFIERS = ("knn", "mlp")


def make_classifier(name, knn_k=3, mlp_cfg: MlpConfig | None = None):
    if name == "knn":
        return KnnModel(knn_k)
    if name == "mlp":
        return MlpClassifier(mlp_cfg)
    raise ConfigurationError(f"unknown classifier {name!r}; choose from {CLASSIFIERS}")
