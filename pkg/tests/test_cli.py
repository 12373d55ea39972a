import csv
import json
import shutil
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from wingfuse.acquisition import TransitScenario
from wingfuse.cli import main
from wingfuse.dataset import default_spec, write_scenarios
from wingfuse.dsp import TimeSeries
from wingfuse.wavio import write_wav


def small_spec(tmp_path, **kw):
    spec = default_spec()
    spec = replace(spec, species=tuple(replace(p, count=max(4, p.count // 10)) for p in spec.species), **kw)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> featurize -> train (three modalities) on a small spec."""
    root = tmp_path_factory.mktemp("cli")
    spec = small_spec(root)
    ds = root / "ds"
    assert main(["synth", "--spec", str(spec), "--out", str(ds)]) == 0
    assert main(["featurize", "--manifest", str(ds / "manifest.jsonl"), "--out", str(root / "feat.csv")]) == 0
    for modality in ("wingbeat", "image", "fusion"):
        assert main(["train", "--manifest", str(ds / "manifest.jsonl"), "--modality", modality,
                     "--features", str(root / "feat.csv"), "--model-out", str(root / f"{modality}.json")]) == 0
    return root


def test_synth_reports_supports(tmp_path, capsys):
    code, out, _ = run(["synth", "--spec", small_spec(tmp_path), "--out", tmp_path / "d", "--seed", 3], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["events"] == sum(summary["supports"].values())
    assert json.loads((tmp_path / "d" / "spec.json").read_text())["seed"] == 3


def test_feature_table_layout(pipeline):
    rows = list(csv.DictReader(open(pipeline / "feat.csv")))
    wb = [r for r in rows if r["modality"] == "wingbeat"]
    img = [r for r in rows if r["modality"] == "image"]
    assert len(img) == 3 * len(wb)
    assert len(wb[0]["values"].split()) == 36 and len(img[0]["values"].split()) == 16


@pytest.mark.parametrize("modality", ["wingbeat", "image", "fusion"])
def test_evaluate_each_model(pipeline, capsys, modality):
    report = pipeline / f"{modality}.report.json"
    code, out, _ = run(["evaluate", "--manifest", pipeline / "ds" / "manifest.jsonl", "--model",
                        pipeline / f"{modality}.json", "--report", report], capsys)
    assert code == 0
    data = json.loads(report.read_text())
    r = data["report"]
    cm = np.array(r["confusion_matrix"])
    assert cm.sum(axis=1).tolist() == [r["per_class"][k]["support"] for k in r["labels"]]
    assert r["accuracy"] == pytest.approx(np.trace(cm) / cm.sum())
    assert data["run"]["split"] == "test"
    confusion = list(csv.reader(open(report.with_suffix(".confusion.csv"))))
    assert confusion[0][1:] == r["labels"]
    if modality == "fusion":
        acc = data["run"]["modality_accuracy"]
        assert set(acc) == {"fusion", "wingbeat", "image"}
        assert data["run"]["routes"] == {"fusion": cm.sum()}


def test_evaluate_with_features_matches_fresh_features(pipeline, capsys):
    args = ["evaluate", "--manifest", pipeline / "ds" / "manifest.jsonl", "--model", pipeline / "fusion.json"]
    run(args + ["--report", pipeline / "a.json"], capsys)
    run(args + ["--report", pipeline / "b.json", "--features", pipeline / "feat.csv"], capsys)
    a = json.loads((pipeline / "a.json").read_text())
    b = json.loads((pipeline / "b.json").read_text())
    assert a["report"] == b["report"]


def test_evaluate_with_prior_table(pipeline, capsys):
    from importlib.resources import files

    table = files("wingfuse").joinpath("data/example_priors.csv")
    code, _, _ = run(["evaluate", "--manifest", pipeline / "ds" / "manifest.jsonl", "--model", pipeline / "fusion.json",
                      "--report", pipeline / "p.json", "--prior-table", str(table)], capsys)
    assert code == 0
    assert json.loads((pipeline / "p.json").read_text())["run"]["prior_applied"] is True


def test_evaluate_predictions_equal_truths(pipeline, tmp_path, capsys):
    lines = [json.loads(l) for l in open(pipeline / "ds" / "manifest.jsonl")]
    preds = tmp_path / "pred.jsonl"
    preds.write_text("".join(json.dumps({"event_id": d["event_id"], "species": d["taxon"]["species"]}) + "\n" for d in lines))
    code, out, _ = run(["evaluate", "--manifest", pipeline / "ds" / "manifest.jsonl", "--predictions", preds,
                        "--report", tmp_path / "r.json", "--split", "all"], capsys)
    assert code == 0
    r = json.loads((tmp_path / "r.json").read_text())["report"]
    assert r["accuracy"] == 1.0 and r["macro_f1"] == 1.0


def test_fusion_on_wingbeat_only_manifest_fails(tmp_path, capsys):
    spec = small_spec(tmp_path, camera_dropout=1.0)
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "d")]) == 0
    capsys.readouterr()
    code, _, err = run(["train", "--manifest", tmp_path / "d" / "manifest.jsonl", "--modality", "fusion",
                        "--model-out", tmp_path / "m.json"], capsys)
    assert code != 0
    assert json.loads(err.strip().splitlines()[-1])["error"] == "MissingModality"
    assert not (tmp_path / "m.json").exists()


def test_errors_are_json(tmp_path, capsys):
    (tmp_path / "m.jsonl").write_text("")
    code, _, err = run(["featurize", "--manifest", tmp_path / "m.jsonl", "--out", tmp_path / "f.csv"], capsys)
    assert code != 0
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "ParseError" and payload["kind"] == "Empty"
    code, _, err = run(["featurize", "--manifest", tmp_path / "missing.jsonl", "--out", tmp_path / "f.csv"], capsys)
    assert json.loads(err.strip().splitlines()[-1])["error"] == "MissingFile"
    (tmp_path / "c.toml").write_text("bogus = 1\n")
    code, _, err = run(["synth", "--out", tmp_path / "x", "--config", tmp_path / "c.toml"], capsys)
    assert code != 0 and json.loads(err.strip().splitlines()[-1])["error"] == "ConfigError"


def test_simulate(tmp_path, capsys):
    sc = [TransitScenario("Apis mellifera", 1.0, 1.0, 250.0, 0.5, 1), TransitScenario("Bombus terrestris", 5.0, 2.0, 150.0, 0.7, 2)]
    write_scenarios(tmp_path / "s.jsonl", sc)
    code, _, _ = run(["simulate", "--scenarios", tmp_path / "s.jsonl", "--out", tmp_path / "o"], capsys)
    assert code == 0
    events = [json.loads(l) for l in open(tmp_path / "o" / "events.jsonl")]
    assert [e["species_id"] for e in events] == ["Apis mellifera", "Bombus terrestris"]
    for e in events:
        assert (tmp_path / "o" / e["wav_path"]).exists()
        b = [f["brightness"] for f in e["frames"]]
        assert len(b) == 3 and b == sorted(b, reverse=True)
        assert e["absent"] == ["env"]


def test_export_psd_and_spectrogram(tmp_path, capsys):
    fs = 96_000
    t = np.arange(fs // 2) / fs
    write_wav(tmp_path / "a.wav", TimeSeries(0.5 * np.sin(2 * np.pi * 350 * t), float(fs)))
    assert run(["export-psd", "--wav", tmp_path / "a.wav", "--out", tmp_path / "psd.csv"], capsys)[0] == 0
    rows = list(csv.DictReader(open(tmp_path / "psd.csv")))
    peak = max(rows, key=lambda r: float(r["psd"]))
    assert abs(float(peak["frequency"]) - 350) < 12
    assert run(["export-spectrogram", "--wav", tmp_path / "a.wav", "--out", tmp_path / "sg.csv",
                "--segment-len", 2048, "--hop", 2048], capsys)[0] == 0
    rows = list(csv.DictReader(open(tmp_path / "sg.csv")))
    assert list(rows[0]) == ["time", "frequency", "power"]
    assert len(rows) == ((len(t) - 2048) // 2048 + 1) * 1025


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("wingfuse")
    cmd = [exe] if exe else [sys.executable, "-m", "wingfuse.cli"]
    out = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("wingfuse ")
