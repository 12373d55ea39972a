import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from wingfuse.envprior import (
    EnvSnapshot,
    SpeciesPrior,
    SpeciesPriorTable,
    apply_prior,
    cloudage_index,
    load_prior_table,
    local_hour,
    species_prior,
)
from wingfuse.errors import EmptyTable, LengthMismatch, NotNormalized, ParseError, ZeroSpectrum

NOON = 12 * 3600.0


def channels(blue, red, clear=1.0):
    return [blue, blue, blue, 0.5, 0.5, red, red, red, 0.3, clear]


def env(temp=20.0, ts=NOON):
    return EnvSnapshot(ts, temp, 50.0, 1013.0, 1000.0, channels(1.0, 1.0))


def table(rates, ranges=None, hours=None):
    n = len(rates)
    ranges = ranges or [(0.0, 40.0)] * n
    hours = hours or [(0.0, 24.0)] * n
    return SpeciesPriorTable(tuple(SpeciesPrior(f"s{i}", ranges[i], hours[i], r) for i, r in enumerate(rates)))


def test_snapshot_validation_and_roundtrip():
    e = env()
    assert EnvSnapshot.from_dict(e.to_dict()) == e
    with pytest.raises(ValueError):
        EnvSnapshot(0, 20, 120, 1000, 10)
    with pytest.raises(ValueError):
        EnvSnapshot(0, 20, 50, 1000, -1)
    with pytest.raises(ValueError):
        EnvSnapshot(0, 20, 50, 1000, 10, (1.0,) * 9)


def test_cloudage_examples():
    assert cloudage_index(channels(1.0, 1.0)) == 0.0
    assert cloudage_index(channels(2.0, 1.0)) == 0.0
    assert cloudage_index(channels(0.0, 1.0)) == 1.0
    assert cloudage_index(channels(0.25, 1.0)) == pytest.approx(0.75)
    with pytest.raises(ZeroSpectrum):
        cloudage_index(channels(1.0, 0.0))
    with pytest.raises(ZeroSpectrum):
        cloudage_index(channels(1.0, 1.0, clear=0.0))


def test_prior_uniform_when_all_in_range():
    assert np.allclose(species_prior(env(), table([1, 1, 1, 1])), 0.25, atol=1e-15)


def test_prior_falls_back_to_base_rates():
    p = species_prior(env(temp=-30.0), table([2, 1, 1], ranges=[(0, 30)] * 3))
    assert np.allclose(p, [0.5, 0.25, 0.25])


def test_prior_hand_example():
    p = species_prior(env(temp=20.0), table([2, 1, 1], ranges=[(10, 30), (15, 25), (25, 35)]))
    assert np.allclose(p, [2 / 3, 1 / 3, 0.0], atol=1e-12)


def test_prior_active_hours_with_wraparound():
    t = table([1, 1], hours=[(20.0, 4.0), (8.0, 18.0)])
    assert np.allclose(species_prior(env(ts=2 * 3600.0), t), [1.0, 0.0])
    assert np.allclose(species_prior(env(ts=NOON), t), [0.0, 1.0])
    shifted = SpeciesPriorTable(t.entries, utc_offset_hours=10.0)
    assert np.allclose(species_prior(env(ts=NOON), shifted), [1.0, 0.0])


def test_local_hour():
    assert local_hour(NOON) == 12.0
    assert local_hour(NOON, -14.0) == 22.0


def test_empty_table():
    with pytest.raises(EmptyTable):
        species_prior(env(), SpeciesPriorTable(()))
    with pytest.raises(ValueError):
        table([0, 0])


def test_apply_prior_examples():
    post = np.array([0.6, 0.4])
    assert np.allclose(apply_prior(post, [0.5, 0.5]), post, atol=1e-12)
    assert np.allclose(apply_prior(post, [0.25, 0.75]), [1 / 3, 2 / 3], atol=1e-4)
    assert np.array_equal(apply_prior(post, [0.0, 1.0]), [0.0, 1.0])
    assert np.array_equal(apply_prior([1.0, 0.0], [0.0, 1.0]), [1.0, 0.0])  # zero product


def test_apply_prior_errors():
    with pytest.raises(LengthMismatch):
        apply_prior([0.5, 0.5], [1.0])
    with pytest.raises(NotNormalized):
        apply_prior([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(NotNormalized):
        apply_prior([0.5, 0.5], [-0.5, 1.5])


probs = arrays(np.float64, 5, elements=st.floats(0.01, 1.0)).map(lambda v: v / v.sum())


@given(probs, probs, st.floats(1e-3, 1e3))
def test_apply_prior_properties(post, pri, c):
    out = apply_prior(post, pri)
    assert np.all(out >= 0) and abs(out.sum() - 1) <= 1e-9
    assert np.allclose(apply_prior(post, c * pri), out, rtol=1e-12, atol=1e-15)
    assert np.allclose(apply_prior(post, np.full(5, 0.2)), post, atol=1e-12)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=8).filter(lambda r: sum(r) > 0), st.floats(-20, 50))
def test_species_prior_is_distribution(rates, temp):
    ranges = [(float(i) * 5, float(i) * 5 + 12) for i in range(len(rates))]
    p = species_prior(env(temp=temp), table(rates, ranges))
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9


def test_load_prior_table(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("species_id,temp_min_c,temp_max_c,hour_start,hour_end,base_rate\nA,0,30,6,20,2\nB,5,25,0,24,1\n")
    t = load_prior_table(path)
    assert t.species == ["A", "B"]
    assert t.reorder(["B", "C", "A"]).species == ["B", "C", "A"]
    assert np.allclose(species_prior(env(), t.reorder(["B", "C", "A"])), [1 / 3, 0, 2 / 3])
    path.write_text("species_id,temp_min_c\nA,oops\n")
    with pytest.raises(ParseError):
        load_prior_table(path)
    path.write_text("species_id,temp_min_c,temp_max_c,hour_start,hour_end,base_rate\n")
    with pytest.raises(EmptyTable):
        load_prior_table(path)
