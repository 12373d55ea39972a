import json
from dataclasses import replace

import numpy as np
import pytest

from wingfuse.dataset import (
    DatasetManifest,
    ManifestRecord,
    SpeciesProfile,
    SynthSpec,
    default_spec,
    generate_events,
    load_events,
    load_manifest,
    read_descriptors,
    read_scenarios,
    save_manifest,
    synth_dataset,
    write_scenarios,
)
from wingfuse.acquisition import TransitScenario
from wingfuse.errors import EmptySpec, MissingFile, ParseError
from wingfuse.taxonomy import DEFAULT_SPECIES

COUNTS = (120, 80, 40, 20, 10, 8, 5)


def unbalanced_spec(seed=0, scale=1):
    base = default_spec(seed)
    profiles = tuple(replace(p, count=max(1, c // scale)) for p, c in zip(base.species, COUNTS))
    return replace(base, species=profiles)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    synth_dataset(unbalanced_spec(scale=4), out)
    return out


def test_supports_match_spec_counts():
    spec = unbalanced_spec()
    events = generate_events(spec)
    names = [e.taxon.species for e in events]
    for taxon, count in zip(DEFAULT_SPECIES, COUNTS):
        assert names.count(taxon.species) == count
    # stratified 70/30 split per species
    for taxon, count in zip(DEFAULT_SPECIES, COUNTS):
        n_test = sum(1 for e in events if e.taxon == taxon and e.split == "test")
        assert n_test == round(0.3 * count)


def test_events_are_time_ordered_and_spaced():
    events = generate_events(unbalanced_spec(scale=8))
    times = [e.event.trigger_time for e in events]
    assert np.all(np.diff(times) > 0.25)
    assert len({e.event.event_id for e in events}) == len(events)
    for e in events:
        assert e.event.has_wingbeat and e.event.has_image and len(e.event.selected_frames) == 3


def test_dropout_removes_modalities():
    spec = replace(unbalanced_spec(scale=4), camera_dropout=0.5, wingbeat_dropout=0.5)
    events = generate_events(spec)
    assert any(not e.event.has_image for e in events)
    assert any(not e.event.has_wingbeat for e in events)
    assert all(e.event.has_image or e.event.has_wingbeat for e in events)


def test_empty_spec():
    with pytest.raises(EmptySpec):
        generate_events(SynthSpec(()))


def test_spec_validation_and_roundtrip(tmp_path):
    spec = default_spec(3)
    assert SynthSpec.from_dict(spec.to_dict()) == spec
    path = tmp_path / "s.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert SynthSpec.load(path) == spec
    with pytest.raises(ParseError):
        SynthSpec.from_dict({**spec.to_dict(), "colour": 1})
    with pytest.raises(ValueError):
        SpeciesProfile(DEFAULT_SPECIES[0], 0, (200.0, 10.0), "g")
    with pytest.raises(ValueError):
        replace(spec, camera_dropout=1.0, wingbeat_dropout=1.0)


def test_shipped_default_spec_matches_code():
    from importlib.resources import files

    shipped = json.loads(files("wingfuse").joinpath("data/default_spec.json").read_text())
    assert SynthSpec.from_dict(shipped) == default_spec()


def test_synth_is_deterministic(small_dataset, tmp_path):
    synth_dataset(unbalanced_spec(scale=4), tmp_path)
    for name in ("manifest.jsonl", "descriptors.csv"):
        assert (tmp_path / name).read_bytes() == (small_dataset / name).read_bytes()
    wavs = sorted(p.name for p in (small_dataset / "wav").iterdir())
    assert wavs == sorted(p.name for p in (tmp_path / "wav").iterdir())
    for name in wavs:
        assert (tmp_path / "wav" / name).read_bytes() == (small_dataset / "wav" / name).read_bytes()


def test_manifest_load_and_supports(small_dataset):
    m = load_manifest(small_dataset / "manifest.jsonl")
    lines = (small_dataset / "manifest.jsonl").read_text().splitlines()
    counted = {}
    for line in lines:
        name = json.loads(line)["taxon"]["species"]
        counted[name] = counted.get(name, 0) + 1
    assert m.supports() == counted
    assert sum(m.supports("train").values()) + sum(m.supports("test").values()) == len(lines)


def test_manifest_roundtrip(small_dataset, tmp_path):
    m = load_manifest(small_dataset / "manifest.jsonl")
    save_manifest(m, tmp_path / "copy.jsonl")
    back = load_manifest(tmp_path / "copy.jsonl", check_files=False)
    assert back.records == m.records


def test_events_reload_from_disk(small_dataset):
    m = load_manifest(small_dataset / "manifest.jsonl")
    spec = unbalanced_spec(scale=4)
    original = {e.event.event_id: e.event for e in generate_events(spec)}
    loaded = load_events(m, m.records[:5])
    for ev in loaded:
        src = original[ev.event_id]
        assert ev.trigger_time == src.trigger_time
        assert ev.selected_frames == src.selected_frames
        assert ev.env == src.env
        # 24-bit quantization
        assert np.max(np.abs(ev.wingbeat_segment.samples - src.wingbeat_segment.samples)) <= 2.0**-23
        assert ev.wingbeat_segment.start_time == src.wingbeat_segment.start_time


def write_lines(path, lines):
    path.write_text("".join(json.dumps(x) + "\n" if not isinstance(x, str) else x + "\n" for x in lines))
    return path


def rec(event_id, **kw):
    d = {"event_id": event_id, "taxon": DEFAULT_SPECIES[0].to_dict(), "split": "train", "image_descriptor_ref": "d.csv"}
    d.update(kw)
    return d


def test_manifest_errors(tmp_path):
    (tmp_path / "d.csv").write_text("event_id,v0\n")
    with pytest.raises(ParseError) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", []))
    assert e.value.kind == "Empty"
    with pytest.raises(ParseError) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", [rec("a"), rec("b"), rec("a")]))
    assert e.value.kind == "DuplicateId" and e.value.line == 3 and "a" in str(e.value)
    with pytest.raises(ParseError) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", [rec("a"), "{oops"]))
    assert e.value.kind == "BadJson" and e.value.line == 2
    with pytest.raises(ParseError) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", [{"event_id": "a"}]))
    assert e.value.kind == "MissingField"
    with pytest.raises(ParseError) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", [rec("a", image_descriptor_ref=None)]))
    assert e.value.kind == "NoModality"
    with pytest.raises(ParseError) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", [rec("a", split="dev")]))
    assert e.value.kind == "BadSplit"
    with pytest.raises(MissingFile) as e:
        load_manifest(write_lines(tmp_path / "m.jsonl", [rec("a", wav_path="wav/x.wav"), rec("b", wav_path="wav/y.wav")]))
    assert e.value.paths == ["wav/x.wav", "wav/y.wav"]
    with pytest.raises(MissingFile):
        load_manifest(tmp_path / "nope.jsonl")


def test_descriptor_import_csv_and_jsonl(tmp_path):
    (tmp_path / "e.csv").write_text("event_id,a,b,c\nx,1,2,3\nx,4,5,6\ny,0,0,1\n")
    d = read_descriptors(tmp_path / "e.csv")
    assert [f.descriptor.tolist() for f in d["x"]] == [[1, 2, 3], [4, 5, 6]]
    assert d["x"][0].timestamp < d["x"][1].timestamp
    (tmp_path / "e.jsonl").write_text('{"event_id": "x", "vector": [1, 2], "brightness": 0.4}\n')
    j = read_descriptors(tmp_path / "e.jsonl")
    assert j["x"][0].mean_brightness == 0.4
    (tmp_path / "bad.csv").write_text("event_id,a\nx,notanumber\n")
    with pytest.raises(ParseError) as e:
        read_descriptors(tmp_path / "bad.csv")
    assert e.value.line == 2


def test_external_embeddings_manifest(tmp_path):
    (tmp_path / "emb.csv").write_text("event_id,v0,v1\nq,0.5,0.25\n")
    write_lines(tmp_path / "m.jsonl", [rec("q", image_descriptor_ref="emb.csv", trigger_time=5.0)])
    m = load_manifest(tmp_path / "m.jsonl")
    (ev,) = load_events(m)
    assert ev.has_image and not ev.has_wingbeat
    assert ev.selected_frames[0].descriptor.tolist() == [0.5, 0.25]


def test_scenario_file_roundtrip(tmp_path):
    sc = [TransitScenario("a", 1.0, 1.0, 300.0, 0.5, 1), TransitScenario("b", 3.0, 2.0, 200.0, 0.4, 2)]
    write_scenarios(tmp_path / "s.jsonl", sc)
    assert read_scenarios(tmp_path / "s.jsonl") == sc
    (tmp_path / "bad.jsonl").write_text('{"species_id": "a"}\n')
    with pytest.raises(ParseError):
        read_scenarios(tmp_path / "bad.jsonl")
