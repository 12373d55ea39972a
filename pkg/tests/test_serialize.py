import json

import numpy as np
import pytest

from wingfuse.errors import ParseError
from wingfuse.features import FeatureConfig, EventFeatures
from wingfuse.dsp import ChainConfig
from wingfuse.fusion import FusionConfig, train_all
from wingfuse.serialize import load_model, model_from_dict, model_to_dict, save_model
from wingfuse.svm import SvmConfig, train_linear_svm
from wingfuse.taxonomy import DEFAULT_SPECIES

CLASSES = sorted(DEFAULT_SPECIES[:3])


def data(seed=0):
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for k, lab in enumerate(CLASSES):
        for _ in range(10):
            feats.append(EventFeatures(rng.normal(k, 0.3, 36), rng.normal(-k, 0.3, (3, 16))))
            labels.append(lab)
    return feats, labels


def test_svm_roundtrip(tmp_path):
    X = np.random.default_rng(0).normal(size=(30, 4))
    y = [CLASSES[i % 3] for i in range(30)]
    model = train_linear_svm(X, y, SvmConfig(lam=0.01, epochs=20, seed=5), modality="image")
    fc = FeatureConfig(ChainConfig(segment_len=4096, search_band_hz=(50.0, 900.0)), 16, 4)
    save_model(model, tmp_path / "m.json", fc)
    back, fc_back = load_model(tmp_path / "m.json")
    assert back == model and fc_back == fc
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["version"] == 1 and d["kind"] == "svm" and d["seed"] == 5
    assert d["taxonomy"][0]["species"] == CLASSES[0].species


def test_fusion_roundtrip(tmp_path):
    feats, labels = data()
    model = train_all(feats, labels, CLASSES, SvmConfig(epochs=20), FusionConfig(epochs=3, hidden=4, seed=2))
    save_model(model, tmp_path / "f.json")
    back, _ = load_model(tmp_path / "f.json")
    assert back == model
    # saving again gives the same bytes
    save_model(back, tmp_path / "g.json")
    assert (tmp_path / "f.json").read_bytes() == (tmp_path / "g.json").read_bytes()


def test_rejects_foreign_or_future_files(tmp_path):
    X = np.eye(3)
    d = model_to_dict(train_linear_svm(X, CLASSES, SvmConfig(epochs=5)))
    with pytest.raises(ParseError):
        model_from_dict({**d, "version": 99})
    with pytest.raises(ParseError):
        model_from_dict({**d, "format": "other"})
    with pytest.raises(ParseError):
        model_from_dict({**d, "kind": "forest"})
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ParseError):
        load_model(tmp_path / "bad.json")
