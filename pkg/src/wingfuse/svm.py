"""One-vs-rest linear SVM trained by deterministic subgradient descent.

Objective per class ``c``::

    lam/2 * |w_c|^2 + 1/n * sum_i s_i * max(0, 1 - y_ic * (w_c . z_i + b_c))

with ``z`` the standardized features, ``s_i`` inverse-frequency class
weights normalised to mean one, and the bias folded into ``w`` through a
constant input. In ``C`` terms this is ``C = 1 / (lam * n)``. The step size is
``1 / (lam * t)``. Subgradient steps do not descend monotonically, so after
every epoch the running average of the iterates is scored and the best
average seen so far is kept; that is the returned model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, SingleClass
from .features import FeatureVector, stack
from .taxonomy import TaxonLabel


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 1e-3
    epochs: int = 300
    seed: int = 0
    batch_size: int | None = None  # None: full batch
    class_weight: str = "balanced"  # or "none"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.class_weight not in ("balanced", "none"):
            raise ValueError("class_weight must be 'balanced' or 'none'")

    def c_equivalent(self, n_samples: int) -> float:
        return 1.0 / (self.lam * n_samples)


@dataclass(eq=False)
class LinearSvmModel:
    classes: list[TaxonLabel]
    weights: np.ndarray  # (n_classes, dim)
    biases: np.ndarray  # (n_classes,)
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    config: SvmConfig = field(default_factory=SvmConfig)
    modality: str = "wingbeat"
    objective_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        self.biases = np.asarray(self.biases, dtype=np.float64).ravel()
        k, d = self.weights.shape
        if k != len(self.classes) or self.biases.size != k:
            raise DimensionMismatch(f"{len(self.classes)} classes but weights {self.weights.shape}, biases {self.biases.shape}")
        self.feature_mean = np.zeros(d) if self.feature_mean is None else np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_scale = np.ones(d) if self.feature_scale is None else np.asarray(self.feature_scale, dtype=np.float64)
        if self.feature_mean.shape != (d,) or self.feature_scale.shape != (d,):
            raise DimensionMismatch("standardization vectors do not match weight dimension")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"model expects {self.dim} features, got {X.shape[1]}")
        Z = (X - self.feature_mean) / self.feature_scale
        return Z @ self.weights.T + self.biases

    def __eq__(self, other):
        if not isinstance(other, LinearSvmModel):
            return NotImplemented
        return (
            self.classes == other.classes
            and self.modality == other.modality
            and self.config == other.config
            and all(
                np.array_equal(getattr(self, a), getattr(other, a))
                for a in ("weights", "biases", "feature_mean", "feature_scale")
            )
        )

    __hash__ = None


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    z = s - s.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def class_weights(y: np.ndarray, n_classes: int, mode: str = "balanced") -> np.ndarray:
    """Per-sample weights; 'balanced' gives each class equal total weight, mean 1."""
    if mode == "none":
        return np.ones(y.size)
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    present = counts > 0
    per_class = np.zeros(n_classes)
    per_class[present] = y.size / (present.sum() * counts[present])
    return per_class[y]


def _as_matrix(features) -> np.ndarray:
    if len(features) and isinstance(features[0], FeatureVector):
        return stack(features)
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    return X


def encode_labels(labels: Sequence[TaxonLabel], classes: Sequence[TaxonLabel] | None = None):
    """Class list (canonical order) and integer targets."""
    if classes is None:
        classes = sorted(set(labels))
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    try:
        y = np.array([index[lab] for lab in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]} not among classes") from None
    return classes, y


def svm_objective(W: np.ndarray, A: np.ndarray, Y: np.ndarray, s: np.ndarray, lam: float) -> float:
    """Summed one-vs-rest objective for augmented weights ``W`` (k, d+1)."""
    margins = Y * (A @ W.T)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * lam * np.sum(W * W) + np.sum(s[:, None] * hinge) / A.shape[0])


def train_linear_svm(
    features,
    labels: Sequence[TaxonLabel],
    config: SvmConfig | None = None,
    classes: Sequence[TaxonLabel] | None = None,
    modality: str | None = None,
    record_objective: bool = False,
) -> LinearSvmModel:
    config = config or SvmConfig()
    X = _as_matrix(features)
    if modality is None:
        modality = features[0].modality if isinstance(features[0], FeatureVector) else "wingbeat"
    if X.shape[0] != len(labels):
        raise DimensionMismatch(f"{X.shape[0]} feature rows for {len(labels)} labels")
    classes, y = encode_labels(labels, classes)
    if np.unique(y).size < 2:
        raise SingleClass("training needs at least two classes")
    n, d = X.shape
    k = len(classes)

    s = class_weights(y, k, config.class_weight)
    # standardize with the same class weights so duplicating a class changes nothing
    mean = np.average(X, axis=0, weights=s)
    scale = np.sqrt(np.average((X - mean) ** 2, axis=0, weights=s))
    scale[scale < 1e-12] = 1.0
    A = np.hstack([(X - mean) / scale, np.ones((n, 1))])
    Y = np.where(y[:, None] == np.arange(k)[None, :], 1.0, -1.0)

    lam = config.lam
    radius = np.sqrt(2.0 * s.mean() / lam)
    rng = np.random.default_rng(config.seed)
    W = np.zeros((k, d + 1))
    W_avg = np.zeros_like(W)
    best, best_obj = W_avg.copy(), svm_objective(W_avg, A, Y, s, lam)
    history = []
    t = 0
    for _ in range(config.epochs):
        if config.batch_size is None or config.batch_size >= n:
            batches = [np.arange(n)]
        else:
            order = rng.permutation(n)
            batches = [order[i : i + config.batch_size] for i in range(0, n, config.batch_size)]
        for idx in batches:
            t += 1
            Ab, Yb, sb = A[idx], Y[idx], s[idx]
            active = (Yb * (Ab @ W.T)) < 1.0
            grad = lam * W - ((active * Yb * sb[:, None]).T @ Ab) / idx.size
            W = W - grad / (lam * t)
            norms = np.linalg.norm(W, axis=1, keepdims=True)
            W = W * np.minimum(1.0, radius / np.maximum(norms, 1e-300))
            W_avg += (W - W_avg) / t
        obj = svm_objective(W_avg, A, Y, s, lam)
        if obj < best_obj:
            best, best_obj = W_avg.copy(), obj
        if record_objective:
            history.append(best_obj)
    return LinearSvmModel(
        classes=classes,
        weights=best[:, :d].copy(),
        biases=best[:, d].copy(),
        feature_mean=mean,
        feature_scale=scale,
        config=config,
        modality=modality,
        objective_history=history,
    )


def _vector(x) -> np.ndarray:
    return x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)


def predict_scores(model: LinearSvmModel, x) -> np.ndarray:
    """Per-class margins for one feature vector."""
    v = _vector(x)
    if v.ndim != 1:
        raise DimensionMismatch("predict_scores takes a single feature vector")
    return model.decision_function(v[None, :])[0]


def predict_proba(model: LinearSvmModel, x) -> np.ndarray:
    return softmax(predict_scores(model, x))


def predict(model: LinearSvmModel, x) -> TaxonLabel:
    # np.argmax returns the first maximum: ties go to the earliest class
    return model.classes[int(np.argmax(predict_scores(model, x)))]


def accuracy(model: LinearSvmModel, X, labels: Sequence[TaxonLabel]) -> float:
    scores = model.decision_function(_as_matrix(X))
    pred = [model.classes[i] for i in np.argmax(scores, axis=1)]
    return float(np.mean([p == t for p, t in zip(pred, labels)]))
