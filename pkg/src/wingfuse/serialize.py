"""Versioned JSON model files.

A file holds the class list, the taxonomy the classes belong to, every weight
matrix as nested lists, the training configuration and the seed. Floats are
written with ``repr`` precision so a save/load cycle is exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dsp import ChainConfig
from .errors import ParseError
from .features import FeatureConfig
from .fusion import FusionConfig, FusionHead, FusionModel
from .svm import LinearSvmModel, SvmConfig
from .taxonomy import TaxonLabel, TaxonomyTree

FORMAT = "wingfuse-model"
FORMAT_VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def feature_config_to_dict(fc: FeatureConfig) -> dict:
    d = asdict(fc)
    d["chain"]["search_band_hz"] = list(fc.chain.search_band_hz)
    return d


def feature_config_from_dict(d: dict) -> FeatureConfig:
    chain = dict(d["chain"])
    chain["search_band_hz"] = tuple(chain["search_band_hz"])
    return FeatureConfig(ChainConfig(**chain), int(d["n_bands"]), int(d["descriptor_dim"]))


def _svm_body(model: LinearSvmModel) -> dict:
    return {
        "modality": model.modality,
        "config": asdict(model.config),
        "weights": _arr(model.weights),
        "biases": _arr(model.biases),
        "feature_mean": _arr(model.feature_mean),
        "feature_scale": _arr(model.feature_scale),
    }


def _svm_from_body(body: dict, classes: list[TaxonLabel]) -> LinearSvmModel:
    return LinearSvmModel(
        classes=list(classes),
        weights=np.array(body["weights"], dtype=np.float64),
        biases=np.array(body["biases"], dtype=np.float64),
        feature_mean=np.array(body["feature_mean"], dtype=np.float64),
        feature_scale=np.array(body["feature_scale"], dtype=np.float64),
        config=SvmConfig(**body["config"]),
        modality=body["modality"],
    )


def model_to_dict(model: LinearSvmModel | FusionModel, feature_config: FeatureConfig | None = None) -> dict:
    classes = model.classes
    out = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "classes": [c.to_dict() for c in classes],
        "taxonomy": TaxonomyTree(classes).to_list(),
    }
    if isinstance(model, FusionModel):
        head = model.head
        out.update(
            kind="fusion",
            seed=model.config.seed,
            config=asdict(model.config),
            feature_config=feature_config_to_dict(model.feature_config),
            routing=dict(model.routing),
            wingbeat=_svm_body(model.wingbeat_model),
            image=_svm_body(model.image_model),
            head={k: _arr(getattr(head, k)) for k in FusionHead.PARAMS + ("in_mean", "in_scale")},
        )
    else:
        out.update(
            kind="svm",
            seed=model.config.seed,
            config=asdict(model.config),
            feature_config=feature_config_to_dict(feature_config or FeatureConfig()),
            svm=_svm_body(model),
        )
    return out


def model_from_dict(d: dict):
    """Inverse of :func:`model_to_dict`; returns ``(model, feature_config)``."""
    if d.get("format") != FORMAT:
        raise ParseError("BadFormat", f"not a {FORMAT} file")
    if d.get("version") != FORMAT_VERSION:
        raise ParseError("BadVersion", f"unsupported model version {d.get('version')!r}")
    try:
        classes = [TaxonLabel.from_dict(c) for c in d["classes"]]
        fc = feature_config_from_dict(d["feature_config"])
        if d["kind"] == "svm":
            return _svm_from_body(d["svm"], classes), fc
        if d["kind"] == "fusion":
            head = FusionHead(**{k: np.array(v, dtype=np.float64) for k, v in d["head"].items()})
            model = FusionModel(
                _svm_from_body(d["wingbeat"], classes),
                _svm_from_body(d["image"], classes),
                head,
                FusionConfig(**d["config"]),
                fc,
                dict(d["routing"]),
            )
            return model, fc
    except (KeyError, TypeError) as exc:
        raise ParseError("MissingField", f"model file: {exc}") from exc
    raise ParseError("BadFormat", f"unknown model kind {d.get('kind')!r}")


def save_model(model, path: str | Path, feature_config: FeatureConfig | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, feature_config), sort_keys=True) + "\n")


def load_model(path: str | Path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError("BadJson", str(exc), exc.lineno) from exc
    return model_from_dict(d)
