"""Synthetic datasets, manifests and the file formats around them.

On-disk layout written by :func:`synth_dataset`::

    DIR/manifest.jsonl      one record per detection event
    DIR/descriptors.csv     event_id,timestamp,brightness,d0..dN (one row per frame)
    DIR/wav/<event_id>.wav  24-bit mono photodiode segment
"""

from __future__ import annotations

import csv
import json
import logging
import zlib
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .acquisition import (
    DEFAULT_DESCRIPTOR_DIM,
    DEFAULT_WINDOW_S,
    DetectionEvent,
    Frame,
    TransitScenario,
    TriggerConfig,
    co_register,
    descriptor_center,
    run_trigger,
    select_frames,
    simulate_transit,
)
from .dsp import DEFAULT_SAMPLE_RATE, SensorGeometry, TimeSeries
from .envprior import EnvSnapshot
from .errors import EmptySpec, MissingFile, ParseError, WingfuseError
from .taxonomy import DEFAULT_SPECIES, TaxonLabel, TaxonomyTree
from .wavio import read_wav, write_wav

log = logging.getLogger(__name__)

SPLITS = ("train", "test")
# 2023-06-05 00:00 UTC
SESSION_START = 1_685_923_200.0


@dataclass(frozen=True)
class SpeciesProfile:
    taxon: TaxonLabel
    count: int
    wingbeat_hz: tuple[float, float]  # mean, standard deviation
    image_group: str
    speed_mps: tuple[float, float] = (0.556, 2.5)
    shadow_depth: tuple[float, float] = (0.2, 0.9)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"{self.taxon.species}: count must be >= 1")

    def to_dict(self) -> dict:
        return {
            "taxon": self.taxon.to_dict(),
            "count": self.count,
            "wingbeat_hz": list(self.wingbeat_hz),
            "image_group": self.image_group,
            "speed_mps": list(self.speed_mps),
            "shadow_depth": list(self.shadow_depth),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpeciesProfile":
        return cls(
            TaxonLabel.from_dict(d["taxon"]),
            int(d["count"]),
            tuple(d["wingbeat_hz"]),
            str(d.get("image_group", d["taxon"].get("species"))),
            tuple(d.get("speed_mps", (0.556, 2.5))),
            tuple(d.get("shadow_depth", (0.2, 0.9))),
        )


@dataclass(frozen=True)
class SynthSpec:
    """Species profiles plus generation settings.

    Image descriptors are drawn around ``group_scale * g + species_scale * s``
    where ``g`` is a prototype shared by the species of one image group and
    ``s`` a per-species prototype. Small ``species_scale`` makes group mates
    hard to tell apart by camera alone.
    """

    species: tuple[SpeciesProfile, ...]
    seed: int = 0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    descriptor_dim: int = DEFAULT_DESCRIPTOR_DIM
    descriptor_noise: float = 0.3
    group_scale: float = 1.0
    species_scale: float = 0.1
    test_fraction: float = 0.3
    mean_gap_s: float = 30.0
    camera_dropout: float = 0.0
    wingbeat_dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        if not 0 <= self.test_fraction < 1:
            raise ValueError("test_fraction must be in [0, 1)")
        for name in ("camera_dropout", "wingbeat_dropout"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.camera_dropout >= 1 and self.wingbeat_dropout >= 1:
            raise ValueError("cannot drop both modalities from every event")

    @property
    def tree(self) -> TaxonomyTree:
        return TaxonomyTree(p.taxon for p in self.species)

    def to_dict(self) -> dict:
        return {
            "species": [p.to_dict() for p in self.species],
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "descriptor_dim": self.descriptor_dim,
            "descriptor_noise": self.descriptor_noise,
            "group_scale": self.group_scale,
            "species_scale": self.species_scale,
            "test_fraction": self.test_fraction,
            "mean_gap_s": self.mean_gap_s,
            "camera_dropout": self.camera_dropout,
            "wingbeat_dropout": self.wingbeat_dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ParseError("UnknownKey", ", ".join(sorted(unknown)))
        kwargs = {k: v for k, v in d.items() if k != "species"}
        return cls(tuple(SpeciesProfile.from_dict(p) for p in d.get("species", [])), **kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SynthSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError("BadJson", str(exc), exc.lineno) from exc
        return cls.from_dict(data)


# Wingbeat frequency separates the two species inside each image group while
# image groups separate what wingbeat frequency confuses.
_DEFAULT_PROFILES = {
    "Apis mellifera": (300, (235.0, 14.0), "apidae"),
    "Bombus terrestris": (240, (165.0, 12.0), "apidae"),
    "Vespa crabro": (170, (165.0, 12.0), "vespidae"),
    "Polistes dominula": (140, (235.0, 14.0), "vespidae"),
    "Panorpa communis": (100, (120.0, 10.0), "panorpidae"),
    "Eristalis tenax": (90, (165.0, 12.0), "syrphidae"),
    "Episyrphus balteatus": (60, (235.0, 14.0), "syrphidae"),
}


def default_spec(seed: int = 0) -> SynthSpec:
    """Unbalanced seven-species set with complementary camera and wingbeat cues."""
    profiles = []
    for taxon in DEFAULT_SPECIES:
        count, wb, group = _DEFAULT_PROFILES[taxon.species]
        profiles.append(SpeciesProfile(taxon, count, wb, group))
    return SynthSpec(tuple(profiles), seed=seed)


def _prototype(key: str, dim: int) -> np.ndarray:
    return descriptor_center(key, dim)


def image_mean(spec: SynthSpec, profile: SpeciesProfile) -> np.ndarray:
    return (
        spec.group_scale * _prototype("group:" + profile.image_group, spec.descriptor_dim)
        + spec.species_scale * _prototype("species:" + profile.taxon.species, spec.descriptor_dim)
    )


@dataclass(frozen=True, eq=False)
class SynthEvent:
    event: DetectionEvent
    taxon: TaxonLabel
    split: str
    scenario: TransitScenario


def _env_snapshot(rng: np.random.Generator, timestamp: float) -> EnvSnapshot:
    spectrum = rng.uniform(0.2, 1.0, 10)
    return EnvSnapshot(
        timestamp=timestamp,
        temperature_c=float(rng.normal(21.0, 4.0)),
        humidity_pct=float(rng.uniform(35.0, 85.0)),
        pressure_hpa=float(rng.normal(1013.0, 6.0)),
        lux=float(rng.uniform(2_000.0, 60_000.0)),
        spectral_channels=tuple(spectrum.tolist()),
    )


def generate_events(
    spec: SynthSpec,
    trigger: TriggerConfig | None = None,
    geometry: SensorGeometry | None = None,
    window_s: float = DEFAULT_WINDOW_S,
) -> list[SynthEvent]:
    """Simulate every transit of ``spec`` through the acquisition chain, in time order."""
    if not spec.species:
        raise EmptySpec("synthetic spec lists no species")
    trigger = trigger or TriggerConfig()
    rng = np.random.default_rng(spec.seed)
    owners = np.concatenate([np.full(p.count, i) for i, p in enumerate(spec.species)])
    splits = np.empty(owners.size, dtype=object)
    for i, p in enumerate(spec.species):
        members = np.flatnonzero(owners == i)
        n_test = int(round(spec.test_fraction * p.count))
        test = rng.permutation(members)[:n_test]
        splits[members] = "train"
        splits[test] = "test"
    order = rng.permutation(owners.size)
    means = [image_mean(spec, p) for p in spec.species]

    out = []
    t = SESSION_START
    for pos in order:
        p = spec.species[int(owners[pos])]
        t += trigger.refractory_s + 1.0 + float(rng.exponential(spec.mean_gap_s))
        f = float(np.clip(rng.normal(*p.wingbeat_hz), 100.0, 1000.0))
        scenario = TransitScenario(
            species_id=p.taxon.species,
            entry_time=round(t, 6),
            speed_mps=float(rng.uniform(*p.speed_mps)),
            wingbeat_hz=f,
            body_shadow_depth=float(rng.uniform(*p.shadow_depth)),
            rng_seed=int(rng.integers(2**31)),
        )
        transit = simulate_transit(
            scenario,
            geometry,
            trigger,
            spec.sample_rate,
            descriptor_dim=spec.descriptor_dim,
            descriptor_mean=means[int(owners[pos])],
            descriptor_noise=spec.descriptor_noise,
        )
        triggers = run_trigger(transit.beam, trigger)
        if len(triggers) != 1:
            raise WingfuseError(f"transit at {scenario.entry_time} produced {len(triggers)} triggers")
        tt = triggers[0]
        drop_cam = rng.random() < spec.camera_dropout
        drop_wb = (not drop_cam) and rng.random() < spec.wingbeat_dropout
        frames = None if drop_cam else select_frames(transit.frames, tt, window_s, trigger.frames_to_select)
        wingbeat = None if drop_wb else transit.photodiode
        env = _env_snapshot(rng, tt)
        event = co_register(tt, wingbeat, frames, env, window_s)
        out.append(SynthEvent(event, p.taxon, str(splits[pos]), scenario))
    return out


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True)
class ManifestRecord:
    event_id: str
    taxon: TaxonLabel
    split: str = "train"
    trigger_time: float | None = None
    wav_path: str | None = None
    wav_start_time: float = 0.0
    image_descriptor_ref: str | None = None
    env: EnvSnapshot | None = None

    def to_dict(self) -> dict:
        d = {"event_id": self.event_id, "taxon": self.taxon.to_dict(), "split": self.split}
        if self.trigger_time is not None:
            d["trigger_time"] = self.trigger_time
        if self.wav_path is not None:
            d["wav_path"] = self.wav_path
            d["wav_start_time"] = self.wav_start_time
        if self.image_descriptor_ref is not None:
            d["image_descriptor_ref"] = self.image_descriptor_ref
        if self.env is not None:
            d["env"] = self.env.to_dict()
        return d


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    root: Path = field(default=Path("."), compare=False)

    def __len__(self):
        return len(self.records)

    def supports(self, split: str | None = None) -> dict[str, int]:
        """Events per species, in first-appearance order."""
        counts = Counter(r.taxon.species for r in self.records if split is None or r.split == split)
        return {name: counts[name] for name in dict.fromkeys(r.taxon.species for r in self.records) if counts[name]}

    def taxa(self) -> list[TaxonLabel]:
        return list(dict.fromkeys(r.taxon for r in self.records))

    def select(self, split: str | None) -> list[ManifestRecord]:
        if split in (None, "all"):
            return list(self.records)
        return [r for r in self.records if r.split == split]

    def resolve(self, ref: str) -> Path:
        p = Path(ref)
        return p if p.is_absolute() else self.root / p


def save_manifest(manifest: DatasetManifest | Iterable[ManifestRecord], path: str | Path) -> None:
    records = manifest.records if isinstance(manifest, DatasetManifest) else manifest
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def _parse_record(d: dict, lineno: int) -> ManifestRecord:
    try:
        event_id = str(d["event_id"])
        taxon = TaxonLabel.from_dict(d["taxon"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError("MissingField", f"event_id/taxon: {exc}", lineno) from exc
    if taxon.species is None:
        raise ParseError("BadTaxon", f"{event_id}: label must reach species level", lineno)
    split = d.get("split", "train")
    if split not in SPLITS:
        raise ParseError("BadSplit", f"{event_id}: split {split!r}", lineno)
    if not d.get("wav_path") and not d.get("image_descriptor_ref"):
        raise ParseError("NoModality", f"{event_id} references neither a WAV nor descriptors", lineno)
    try:
        env = EnvSnapshot.from_dict(d["env"]) if d.get("env") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError("BadEnv", f"{event_id}: {exc}", lineno) from exc
    return ManifestRecord(
        event_id=event_id,
        taxon=taxon,
        split=split,
        trigger_time=float(d["trigger_time"]) if d.get("trigger_time") is not None else None,
        wav_path=d.get("wav_path"),
        wav_start_time=float(d.get("wav_start_time", 0.0)),
        image_descriptor_ref=d.get("image_descriptor_ref"),
        env=env,
    )


def load_manifest(path: str | Path, check_files: bool = True) -> DatasetManifest:
    """Parse and validate a JSONL manifest; paths resolve relative to its directory."""
    path = Path(path)
    if not path.exists():
        raise MissingFile([path])
    records = []
    seen: dict[str, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError("BadJson", str(exc), lineno) from exc
            if not isinstance(d, dict):
                raise ParseError("BadJson", "record is not an object", lineno)
            rec = _parse_record(d, lineno)
            if rec.event_id in seen:
                raise ParseError("DuplicateId", f"{rec.event_id} (first on line {seen[rec.event_id]})", lineno)
            seen[rec.event_id] = lineno
            records.append(rec)
    if not records:
        raise ParseError("Empty", f"{path} has no records")
    manifest = DatasetManifest(tuple(records), path.parent)
    if check_files:
        missing = []
        for r in records:
            for ref in (r.wav_path, r.image_descriptor_ref):
                if ref is not None and not manifest.resolve(ref).exists() and ref not in missing:
                    missing.append(ref)
        if missing:
            raise MissingFile(missing)
    log.info("manifest %s: %d events, supports %s", path, len(records), manifest.supports())
    return manifest


# ---------------------------------------------------------------- descriptors


def write_descriptors(path: str | Path, rows: Iterable[tuple[str, Frame]], dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_id", "timestamp", "brightness"] + [f"d{i}" for i in range(dim)])
        for event_id, frame in rows:
            w.writerow([event_id, repr(frame.timestamp), repr(frame.mean_brightness)] + [repr(float(v)) for v in frame.descriptor])


def read_descriptors(path: str | Path) -> dict[str, list[Frame]]:
    """Frames per event from a descriptor/embedding CSV or JSONL file.

    CSV: ``event_id`` column, optional ``timestamp`` and ``brightness``, every
    other column a vector component. JSONL: ``{"event_id", "vector"}`` with the
    same optional keys. Repeated event ids give several frames.
    """
    path = Path(path)
    out: dict[str, list[Frame]] = {}

    def add(event_id, vector, ts, brightness, lineno):
        try:
            vec = np.asarray([float(v) for v in vector], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ParseError("BadVector", f"{path}: {exc}", lineno) from exc
        frames = out.setdefault(event_id, [])
        if ts is None:
            ts = (frames[-1].timestamp + 1e-3) if frames else 0.0
        out[event_id].append(Frame(float(ts), float(brightness if brightness is not None else 1.0), vec))

    if path.suffix == ".jsonl":
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    add(str(d["event_id"]), d["vector"], d.get("timestamp"), d.get("brightness"), lineno)
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ParseError("BadJson", f"{path}: {exc}", lineno) from exc
        return out
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("Empty", f"{path} has no header") from None
        if "event_id" not in header:
            raise ParseError("MissingField", f"{path}: no event_id column", 1)
        i_id = header.index("event_id")
        i_ts = header.index("timestamp") if "timestamp" in header else None
        i_br = header.index("brightness") if "brightness" in header else None
        vec_cols = [i for i in range(len(header)) if i not in (i_id, i_ts, i_br)]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            add(
                row[i_id],
                [row[i] for i in vec_cols],
                row[i_ts] if i_ts is not None else None,
                row[i_br] if i_br is not None else None,
                lineno,
            )
    return out


# ---------------------------------------------------------------- writing


def synth_dataset(spec: SynthSpec, out_dir: str | Path, trigger: TriggerConfig | None = None,
                  window_s: float = DEFAULT_WINDOW_S) -> DatasetManifest:
    """Generate ``spec`` and write WAVs, descriptors and the manifest under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    events = generate_events(spec, trigger, window_s=window_s)
    records = []
    frame_rows = []
    for se in events:
        ev = se.event
        wav_ref = None
        if ev.has_wingbeat:
            wav_ref = f"wav/{ev.event_id}.wav"
            write_wav(out_dir / wav_ref, ev.wingbeat_segment)
        if ev.has_image:
            frame_rows.extend((ev.event_id, f) for f in ev.selected_frames)
        records.append(
            ManifestRecord(
                event_id=ev.event_id,
                taxon=se.taxon,
                split=se.split,
                trigger_time=ev.trigger_time,
                wav_path=wav_ref,
                wav_start_time=ev.wingbeat_segment.start_time if ev.has_wingbeat else 0.0,
                image_descriptor_ref="descriptors.csv" if ev.has_image else None,
                env=ev.env,
            )
        )
    write_descriptors(out_dir / "descriptors.csv", frame_rows, spec.descriptor_dim)
    (out_dir / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    manifest = DatasetManifest(tuple(records), out_dir)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def write_scenarios(path: str | Path, scenarios: Sequence[TransitScenario]) -> None:
    with open(path, "w") as fh:
        for s in scenarios:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")


def read_scenarios(path: str | Path) -> list[TransitScenario]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(TransitScenario.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError("BadScenario", str(exc), lineno) from exc
    if not out:
        raise ParseError("Empty", f"{path} has no scenarios")
    return out


def load_events(manifest: DatasetManifest, records: Sequence[ManifestRecord] | None = None) -> list[DetectionEvent]:
    """Rebuild detection events from the files a manifest references."""
    records = manifest.records if records is None else records
    cache: dict[Path, dict[str, list[Frame]]] = {}
    events = []
    for r in records:
        wav = read_wav(manifest.resolve(r.wav_path), r.wav_start_time) if r.wav_path else None
        frames = None
        if r.image_descriptor_ref:
            ref = manifest.resolve(r.image_descriptor_ref)
            if ref not in cache:
                cache[ref] = read_descriptors(ref)
            frames = cache[ref].get(r.event_id)
            if not frames:
                raise ParseError("MissingDescriptor", f"no descriptor rows for {r.event_id} in {r.image_descriptor_ref}")
        trigger_time = r.trigger_time
        if trigger_time is None:
            trigger_time = wav.start_time if wav is not None else frames[0].timestamp
        events.append(DetectionEvent(r.event_id, trigger_time, wav, frames, r.env))
    return events


def with_seed(spec: SynthSpec, seed: int) -> SynthSpec:
    return replace(spec, seed=seed)


def spec_checksum(spec: SynthSpec) -> int:
    return zlib.crc32(json.dumps(spec.to_dict(), sort_keys=True).encode())
