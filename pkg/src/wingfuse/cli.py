"""Command line entry point: ``wingfuse <command> [options]``.

Failures print one JSON object on stderr, e.g.
``{"error": "MissingModality", "message": "..."}``, and exit non-zero.
Log verbosity comes from the ``WINGFUSE_LOG`` environment variable
(DEBUG, INFO, WARNING; default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import run_trigger, select_frames, simulate_transit, co_register
from .config import RunConfig, load_config
from .dataset import (
    DatasetManifest,
    SynthSpec,
    default_spec,
    load_events,
    load_manifest,
    read_scenarios,
    synth_dataset,
    write_descriptors,
)
from .dsp import stft_spectrogram, welch_psd
from .envprior import apply_prior, load_prior_table, species_prior
from .errors import EmptyEvaluation, MissingModality, ParseError, WingfuseError
from .features import EventFeatures, FeatureConfig, featurize_event
from .fusion import FusionModel, modality_accuracies, predict_any, train_all
from .metrics import evaluate
from .serialize import load_model, save_model
from .svm import LinearSvmModel, softmax, train_linear_svm
from .taxonomy import LEVELS, TaxonLabel
from .wavio import read_wav, write_wav

log = logging.getLogger("wingfuse")
EXIT_DOMAIN = 2
EXIT_OTHER = 1


def _setup_logging():
    level = os.environ.get("WINGFUSE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    seed = getattr(args, "seed", None)
    return cfg.with_overrides(seed=seed)


# ---------------------------------------------------------------- feature tables


def write_feature_table(path, records, features: list[EventFeatures]) -> None:
    """CSV with one wingbeat row per event and one image row per frame."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_id", "split", "species", "modality", "frame", "values"])
        for rec, ef in zip(records, features):
            if ef.has_wingbeat:
                w.writerow([rec.event_id, rec.split, rec.taxon.species, "wingbeat", "", " ".join(map(repr, ef.wingbeat.tolist()))])
            if ef.has_image:
                for j, row in enumerate(ef.image):
                    w.writerow([rec.event_id, rec.split, rec.taxon.species, "image", j, " ".join(map(repr, row.tolist()))])


def read_feature_table(path) -> dict[str, EventFeatures]:
    wb: dict[str, np.ndarray] = {}
    img: dict[str, list[np.ndarray]] = {}
    order: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                eid, modality = row["event_id"], row["modality"]
                values = np.array([float(v) for v in row["values"].split()], dtype=np.float64)
            except (KeyError, AttributeError, ValueError) as exc:
                raise ParseError("BadRow", f"{path}: {exc}", lineno) from exc
            if eid not in wb and eid not in img:
                order.append(eid)
            if modality == "wingbeat":
                wb[eid] = values
            elif modality == "image":
                img.setdefault(eid, []).append(values)
            else:
                raise ParseError("BadRow", f"unknown modality {modality!r}", lineno)
    return {
        eid: EventFeatures(wb.get(eid), np.stack(img[eid]) if eid in img else None) for eid in order
    }


def _event_features(manifest: DatasetManifest, records, fc: FeatureConfig, table_path=None) -> list[EventFeatures]:
    if table_path:
        table = read_feature_table(table_path)
        missing = [r.event_id for r in records if r.event_id not in table]
        if missing:
            raise ParseError("MissingFeatures", f"feature table lacks {len(missing)} events, e.g. {missing[0]}")
        return [table[r.event_id] for r in records]
    return [featurize_event(ev, fc) for ev in load_events(manifest, records)]


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    cfg = _config(args)
    spec = SynthSpec.load(args.spec) if args.spec else default_spec()
    if args.seed is not None:
        spec = SynthSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    manifest = synth_dataset(spec, args.out, cfg.trigger(), cfg.frame_window_s)
    print(json.dumps({"out": str(args.out), "events": len(manifest), "supports": manifest.supports()}))
    return 0


def cmd_featurize(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    records = manifest.select(args.split)
    feats = _event_features(manifest, records, cfg.feature_config())
    write_feature_table(args.out, records, feats)
    return 0


def _classes(manifest: DatasetManifest) -> list[TaxonLabel]:
    return sorted(manifest.taxa())


def cmd_train(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    records = manifest.select(args.split)
    feats = _event_features(manifest, records, cfg.feature_config(), args.features)
    labels = [r.taxon for r in records]
    classes = _classes(manifest)
    fc = cfg.feature_config()
    if args.modality == "fusion":
        model = train_all(feats, labels, classes, cfg.svm_config(), cfg.fusion_config(), fc)
    elif args.modality == "wingbeat":
        rows = [(ef.wingbeat, lab) for ef, lab in zip(feats, labels) if ef.has_wingbeat]
        if not rows:
            raise MissingModality("no training event carries a wingbeat recording")
        X = np.stack([r for r, _ in rows])
        model = train_linear_svm(X, [l for _, l in rows], cfg.svm_config(), classes, modality="wingbeat")
    else:
        rows = [(row, lab) for ef, lab in zip(feats, labels) if ef.has_image for row in ef.image]
        if not rows:
            raise MissingModality("no training event carries camera frames")
        X = np.stack([r for r, _ in rows])
        model = train_linear_svm(X, [l for _, l in rows], cfg.svm_config(), classes, modality="image")
    save_model(model, args.model_out, fc)
    log.info("trained %s model on %d events", args.modality, len(records))
    return 0


def _svm_proba(model: LinearSvmModel, ef: EventFeatures):
    if model.modality == "wingbeat":
        return softmax(model.decision_function(ef.wingbeat[None, :])[0]) if ef.has_wingbeat else None
    return softmax(model.decision_function(ef.image).mean(axis=0)) if ef.has_image else None


def _level_accuracy(pred: list[TaxonLabel], truth: list[TaxonLabel]) -> dict[str, float]:
    return {lvl: float(np.mean([p.at(lvl) == t.at(lvl) for p, t in zip(pred, truth)])) for lvl in LEVELS}


def _read_predictions(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                name = d["taxon"]["species"] if "taxon" in d else d["species"]
                out[str(d["event_id"])] = str(name)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError("BadPrediction", str(exc), lineno) from exc
    return out


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest, check_files=args.model is not None)
    records = manifest.select(args.split)
    labels = [t.species for t in _classes(manifest)]
    run: dict = {"split": args.split}

    if args.predictions:
        predicted = _read_predictions(args.predictions)
        kept = [r for r in records if r.event_id in predicted]
        run["source"] = "predictions"
        run["skipped"] = len(records) - len(kept)
        report = evaluate([predicted[r.event_id] for r in kept], [r.taxon.species for r in kept], labels)
    else:
        model, fc = load_model(args.model)
        feats = _event_features(manifest, records, fc, args.features)
        prior_table = None
        if args.prior_table:
            prior_table = load_prior_table(args.prior_table, cfg.utc_offset_hours).reorder(
                [c.species for c in model.classes]
            )
        pred, truth, routes = [], [], {}
        for rec, ef in zip(records, feats):
            if isinstance(model, FusionModel):
                if not (ef.has_wingbeat or ef.has_image):
                    continue
                probs, _, route = predict_any(model, ef)
            else:
                probs, route = _svm_proba(model, ef), model.modality
                if probs is None:
                    continue
            if prior_table is not None and rec.env is not None:
                probs = apply_prior(probs, species_prior(rec.env, prior_table))
            routes[route] = routes.get(route, 0) + 1
            pred.append(model.classes[int(np.argmax(probs))])
            truth.append(rec.taxon)
        if not pred:
            raise EmptyEvaluation(f"no {args.split} event carries a modality the model uses")
        report = evaluate([p.species for p in pred], [t.species for t in truth], labels)
        run.update(
            source="model",
            model_kind="fusion" if isinstance(model, FusionModel) else f"svm-{model.modality}",
            skipped=len(records) - len(pred),
            routes=dict(sorted(routes.items())),
            level_accuracy=_level_accuracy(pred, truth),
            prior_applied=prior_table is not None,
        )
        if isinstance(model, FusionModel) and any(ef.has_wingbeat and ef.has_image for ef in feats):
            acc = modality_accuracies(model, feats, [r.taxon for r in records])
            run["paired_events"] = acc.pop("n")
            run["modality_accuracy"] = acc

    out = {
        "metadata": {"generated_at": datetime.now(timezone.utc).isoformat(), "wingfuse_version": __version__},
        "run": run,
        "report": report.to_dict(),
    }
    Path(args.report).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    confusion = Path(args.confusion) if args.confusion else Path(args.report).with_suffix(".confusion.csv")
    with open(confusion, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["truth\\predicted"] + report.labels)
        for name, row in zip(report.labels, report.confusion.tolist()):
            w.writerow([name] + row)
    print(json.dumps({"accuracy": report.accuracy, "macro_f1": report.macro_f1, "n_events": report.total}))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    trigger = cfg.trigger()
    out = Path(args.out)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    frame_rows = []
    with open(out / "events.jsonl", "w") as fh:
        for scenario in read_scenarios(args.scenarios):
            transit = simulate_transit(scenario, None, trigger, args.sample_rate, descriptor_dim=cfg.descriptor_dim)
            triggers = run_trigger(transit.beam, trigger)
            if not triggers:
                log.warning("scenario at %s produced no trigger", scenario.entry_time)
            for tt in triggers:
                frames = select_frames(transit.frames, tt, cfg.frame_window_s, trigger.frames_to_select)
                ev = co_register(tt, transit.photodiode, frames, None, cfg.frame_window_s)
                wav_ref = f"wav/{ev.event_id}.wav"
                write_wav(out / wav_ref, ev.wingbeat_segment)
                frame_rows.extend((ev.event_id, f) for f in ev.selected_frames or ())
                record = {
                    "event_id": ev.event_id,
                    "species_id": scenario.species_id,
                    "trigger_time": ev.trigger_time,
                    "wav_path": wav_ref,
                    "wav_start_time": ev.wingbeat_segment.start_time,
                    "frames": [
                        {"timestamp": f.timestamp, "brightness": f.mean_brightness} for f in ev.selected_frames or ()
                    ],
                    "image_descriptor_ref": "descriptors.csv" if ev.has_image else None,
                    "absent": list(ev.absent),
                    "scenario": scenario.to_dict(),
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    write_descriptors(out / "descriptors.csv", frame_rows, cfg.descriptor_dim)
    return 0


def cmd_export_psd(args) -> int:
    cfg = _config(args)
    signal = read_wav(args.wav)
    seg = min(args.segment_len or cfg.segment_len, len(signal))
    spectrum = welch_psd(signal, seg, cfg.overlap_fraction, cfg.window)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency", "psd"])
        for f, p in zip(spectrum.frequencies.tolist(), spectrum.psd.tolist()):
            w.writerow([repr(f), repr(p)])
    return 0


def cmd_export_spectrogram(args) -> int:
    cfg = _config(args)
    signal = read_wav(args.wav)
    spec = stft_spectrogram(signal, args.segment_len, args.hop, cfg.window)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "frequency", "power"])
        freqs = spec.frequencies.tolist()
        for t, row in zip(spec.times.tolist(), spec.power.tolist()):
            for f, p in zip(freqs, row):
                w.writerow([repr(t), repr(f), repr(p)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wingfuse", description="Insect wingbeat + camera classification pipeline.")
    parser.add_argument("--version", action="version", version=f"wingfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat TOML file overriding defaults")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a synthetic dataset")
    p.add_argument("--spec", help="species spec JSON (default: built-in 7-species spec)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("featurize", cmd_featurize, "write the feature table of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="all")

    p = add("train", cmd_train, "train a classifier and save it as JSON")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", choices=["wingbeat", "image", "fusion"], required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--features", help="feature table from `featurize` to reuse")
    p.add_argument("--split", choices=["train", "test", "all"], default="train")
    p.add_argument("--seed", type=int)

    p = add("evaluate", cmd_evaluate, "score a model or a predictions file against a manifest")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--predictions", help="JSONL of {event_id, species}")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--confusion", help="confusion CSV path (default: next to the report)")
    p.add_argument("--features", help="feature table from `featurize` to reuse")
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--prior-table", help="species prior CSV applied to event posteriors")

    p = add("simulate", cmd_simulate, "run transit scenarios through the acquisition chain")
    p.add_argument("--scenarios", required=True, help="JSONL of transit scenarios")
    p.add_argument("--out", required=True)
    p.add_argument("--sample-rate", type=float, default=96_000.0)

    p = add("export-psd", cmd_export_psd, "Welch PSD of a WAV file as CSV")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segment-len", type=int)

    p = add("export-spectrogram", cmd_export_spectrogram, "STFT spectrogram of a WAV file as long CSV")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segment-len", type=int, default=4096)
    p.add_argument("--hop", type=int, default=1024)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WingfuseError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
