"""Late fusion of camera and wingbeat classifiers with missing-modality routing.

The per-modality linear SVMs act as frozen feature extractors; their class
score vectors are concatenated and fed to a one-hidden-layer tanh network.
Events carrying only one modality bypass the network and use that
modality's classifier directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .acquisition import DetectionEvent
from .errors import DimensionMismatch, MissingModality, NoModalities
from .features import EventFeatures, FeatureConfig, featurize_event
from .svm import LinearSvmModel, SvmConfig, class_weights, encode_labels, softmax, train_linear_svm
from .taxonomy import TaxonLabel

ROUTES = {"wingbeat+image": "fusion", "wingbeat": "wingbeat", "image": "image"}


@dataclass(frozen=True)
class FusionConfig:
    hidden: int = 16
    epochs: int = 150
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    l2: float = 1e-4
    seed: int = 0
    class_weight: str = "balanced"

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden, epochs and batch_size must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


@dataclass(eq=False)
class FusionHead:
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray
    w2: np.ndarray  # (classes, hidden)
    b2: np.ndarray
    in_mean: np.ndarray
    in_scale: np.ndarray

    PARAMS = ("w1", "b1", "w2", "b2")

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.PARAMS}

    def with_params(self, params: dict[str, np.ndarray]) -> "FusionHead":
        return FusionHead(params["w1"], params["b1"], params["w2"], params["b2"], self.in_mean, self.in_scale)

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"fusion head takes {self.n_inputs} inputs, got {X.shape[1]}")
        h = np.tanh(((X - self.in_mean) / self.in_scale) @ self.w1.T + self.b1)
        return h @ self.w2.T + self.b2

    def proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def __eq__(self, other):
        if not isinstance(other, FusionHead):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, a), getattr(other, a)) for a in self.PARAMS + ("in_mean", "in_scale")
        )

    __hash__ = None


def init_head(n_inputs: int, n_classes: int, hidden: int, rng: np.random.Generator,
              in_mean=None, in_scale=None) -> FusionHead:
    """Random hidden layer, zero output layer (uniform softmax before training)."""
    return FusionHead(
        w1=rng.normal(0.0, 1.0 / np.sqrt(n_inputs), (hidden, n_inputs)),
        b1=np.zeros(hidden),
        w2=np.zeros((n_classes, hidden)),
        b2=np.zeros(n_classes),
        in_mean=np.zeros(n_inputs) if in_mean is None else np.asarray(in_mean, dtype=np.float64),
        in_scale=np.ones(n_inputs) if in_scale is None else np.asarray(in_scale, dtype=np.float64),
    )


def head_loss_and_grad(head: FusionHead, X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None,
                       l2: float = 0.0) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted mean cross-entropy plus L2 on the weight matrices, with gradients."""
    n = X.shape[0]
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    wsum = weights.sum()
    Z = (X - head.in_mean) / head.in_scale
    H = np.tanh(Z @ head.w1.T + head.b1)
    logits = H @ head.w2.T + head.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -np.sum(weights * log_p[np.arange(n), y]) / wsum
    loss += 0.5 * l2 * (np.sum(head.w1**2) + np.sum(head.w2**2))

    d_logits = np.exp(log_p)
    d_logits[np.arange(n), y] -= 1.0
    d_logits *= (weights / wsum)[:, None]
    g_w2 = d_logits.T @ H + l2 * head.w2
    g_b2 = d_logits.sum(axis=0)
    d_pre = (d_logits @ head.w2) * (1.0 - H**2)
    g_w1 = d_pre.T @ Z + l2 * head.w1
    g_b1 = d_pre.sum(axis=0)
    return float(loss), {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def train_head(X: np.ndarray, y: np.ndarray, n_classes: int, config: FusionConfig | None = None) -> FusionHead:
    """Seeded mini-batch gradient descent with momentum on the fusion head."""
    config = config or FusionConfig()
    rng = np.random.default_rng(config.seed)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    head = init_head(X.shape[1], n_classes, config.hidden, rng, mean, scale)
    sw = class_weights(y, n_classes, config.class_weight)
    params = head.params()
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    n = X.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = head_loss_and_grad(head, X[idx], y[idx], sw[idx], config.l2)
            for k in params:
                velocity[k] = config.momentum * velocity[k] - config.lr * grads[k]
                params[k] = params[k] + velocity[k]
            head = head.with_params(params)
    return head


@dataclass(eq=False)
class FusionModel:
    wingbeat_model: LinearSvmModel
    image_model: LinearSvmModel
    head: FusionHead
    config: FusionConfig = field(default_factory=FusionConfig)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    routing: dict[str, str] = field(default_factory=lambda: dict(ROUTES))

    def __post_init__(self):
        if self.wingbeat_model.classes != self.image_model.classes:
            raise DimensionMismatch("wingbeat and image extractors disagree on the class list")
        k = len(self.classes)
        if self.head.n_inputs != 2 * k or self.head.w2.shape[0] != k:
            raise DimensionMismatch("fusion head does not match the extractors' score dimensions")
        if set(self.routing) != set(ROUTES):
            raise ValueError(f"routing must cover {sorted(ROUTES)}")

    @property
    def classes(self) -> list[TaxonLabel]:
        return self.wingbeat_model.classes

    def __eq__(self, other):
        if not isinstance(other, FusionModel):
            return NotImplemented
        return (
            self.wingbeat_model == other.wingbeat_model
            and self.image_model == other.image_model
            and self.head == other.head
            and self.config == other.config
            and self.feature_config == other.feature_config
            and self.routing == other.routing
        )

    __hash__ = None


def modality_scores(wingbeat_model: LinearSvmModel, image_model: LinearSvmModel, ef: EventFeatures):
    """Class scores per available modality; image scores average over frames."""
    wb = wingbeat_model.decision_function(ef.wingbeat[None, :])[0] if ef.has_wingbeat else None
    img = image_model.decision_function(ef.image).mean(axis=0) if ef.has_image else None
    return wb, img


def _features(item, config: FeatureConfig) -> EventFeatures:
    return item if isinstance(item, EventFeatures) else featurize_event(item, config)


def train_fusion(
    events: Sequence[DetectionEvent | EventFeatures],
    labels: Sequence[TaxonLabel],
    wingbeat_model: LinearSvmModel,
    image_model: LinearSvmModel,
    config: FusionConfig | None = None,
    feature_config: FeatureConfig | None = None,
) -> FusionModel:
    """Fit the fusion head on events that carry both modalities; extractors stay frozen."""
    config = config or FusionConfig()
    feature_config = feature_config or FeatureConfig()
    if len(events) != len(labels):
        raise DimensionMismatch(f"{len(events)} events for {len(labels)} labels")
    for i, ev in enumerate(events):
        if not (ev.has_wingbeat and ev.has_image):
            name = getattr(ev, "event_id", f"#{i}")
            raise MissingModality(f"training event {name} lacks a modality")
    feats = [_features(ev, feature_config) for ev in events]
    rows = [np.concatenate(modality_scores(wingbeat_model, image_model, ef)) for ef in feats]
    _, y = encode_labels(labels, wingbeat_model.classes)
    head = train_head(np.stack(rows), y, len(wingbeat_model.classes), config)
    return FusionModel(wingbeat_model, image_model, head, config, feature_config)


class Prediction(NamedTuple):
    probabilities: np.ndarray
    label: TaxonLabel
    route: str


def predict_any(fusion: FusionModel, event: DetectionEvent | EventFeatures) -> Prediction:
    """Route by available modalities: both -> fusion head, one -> that extractor's softmax."""
    if not (event.has_wingbeat or event.has_image):
        raise NoModalities("event has neither wingbeat nor camera data")
    ef = _features(event, fusion.feature_config)
    wb, img = modality_scores(fusion.wingbeat_model, fusion.image_model, ef)
    key = "+".join(name for name, s in (("wingbeat", wb), ("image", img)) if s is not None)
    route = fusion.routing[key]
    if route == "fusion":
        probs = fusion.head.proba(np.concatenate([wb, img])[None, :])[0]
    elif route == "wingbeat":
        probs = softmax(wb)
    else:
        probs = softmax(img)
    return Prediction(probs, fusion.classes[int(np.argmax(probs))], route)


def train_all(
    features: Sequence[EventFeatures],
    labels: Sequence[TaxonLabel],
    classes: Sequence[TaxonLabel],
    svm_config: SvmConfig | None = None,
    fusion_config: FusionConfig | None = None,
    feature_config: FeatureConfig | None = None,
) -> FusionModel:
    """Train both extractors on every event offering their modality, then the head.

    The image classifier sees each selected frame as its own sample.
    """
    svm_config = svm_config or SvmConfig()
    wb_rows = [(ef.wingbeat, lab) for ef, lab in zip(features, labels) if ef.has_wingbeat]
    img_rows = [(row, lab) for ef, lab in zip(features, labels) if ef.has_image for row in ef.image]
    if not wb_rows or not img_rows:
        raise MissingModality("fusion training needs both wingbeat and camera data")
    wb_model = train_linear_svm(
        np.stack([r for r, _ in wb_rows]), [l for _, l in wb_rows], svm_config, classes, modality="wingbeat"
    )
    img_model = train_linear_svm(
        np.stack([r for r, _ in img_rows]), [l for _, l in img_rows], svm_config, classes, modality="image"
    )
    pairs = [(ef, lab) for ef, lab in zip(features, labels) if ef.has_wingbeat and ef.has_image]
    if not pairs:
        raise MissingModality("no event carries both modalities")
    return train_fusion(
        [ef for ef, _ in pairs], [l for _, l in pairs], wb_model, img_model, fusion_config, feature_config
    )


def modality_accuracies(fusion: FusionModel, features: Sequence[EventFeatures], labels: Sequence[TaxonLabel]) -> dict:
    """Accuracy of the fused head and of each extractor alone on events carrying both modalities."""
    hits = {"fusion": 0, "wingbeat": 0, "image": 0}
    n = 0
    for ef, lab in zip(features, labels):
        if not (ef.has_wingbeat and ef.has_image):
            continue
        wb, img = modality_scores(fusion.wingbeat_model, fusion.image_model, ef)
        fused = fusion.head.logits(np.concatenate([wb, img])[None, :])[0]
        for name, s in (("fusion", fused), ("wingbeat", wb), ("image", img)):
            hits[name] += fusion.classes[int(np.argmax(s))] == lab
        n += 1
    if n == 0:
        raise MissingModality("no event carries both modalities")
    return {"n": n, **{k: v / n for k, v in hits.items()}}
