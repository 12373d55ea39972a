"""Environmental snapshots and the species prior derived from them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyTable, LengthMismatch, NotNormalized, ParseError, ZeroSpectrum

# AS7341 channel order
SPECTRAL_BANDS = ("415nm", "445nm", "480nm", "515nm", "550nm", "590nm", "660nm", "690nm", "nir", "clear")
BLUE_CHANNELS = (0, 1, 2)
RED_CHANNELS = (5, 6, 7)
CLEAR_CHANNEL = 9


@dataclass(frozen=True)
class EnvSnapshot:
    timestamp: float
    temperature_c: float
    humidity_pct: float
    pressure_hpa: float
    lux: float
    spectral_channels: tuple[float, ...] = (0.0,) * 10

    def __post_init__(self):
        object.__setattr__(self, "spectral_channels", tuple(float(v) for v in self.spectral_channels))
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise ValueError(f"humidity_pct must be in [0, 100], got {self.humidity_pct}")
        if self.lux < 0:
            raise ValueError("lux must be non-negative")
        if len(self.spectral_channels) != len(SPECTRAL_BANDS):
            raise ValueError(f"expected {len(SPECTRAL_BANDS)} spectral channels, got {len(self.spectral_channels)}")

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "temperature_c": self.temperature_c,
            "humidity_pct": self.humidity_pct,
            "pressure_hpa": self.pressure_hpa,
            "lux": self.lux,
            "spectral_channels": list(self.spectral_channels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSnapshot":
        return cls(
            float(d["timestamp"]),
            float(d["temperature_c"]),
            float(d["humidity_pct"]),
            float(d["pressure_hpa"]),
            float(d["lux"]),
            tuple(d.get("spectral_channels", (0.0,) * 10)),
        )


@dataclass(frozen=True)
class SpeciesPrior:
    species_id: str
    temperature_range_c: tuple[float, float]
    active_hours: tuple[float, float]
    base_rate: float

    def __post_init__(self):
        lo, hi = self.temperature_range_c
        if not lo < hi:
            raise ValueError(f"{self.species_id}: temperature range must have min < max")
        if self.base_rate < 0:
            raise ValueError(f"{self.species_id}: base_rate must be non-negative")

    def active_at(self, hour: float) -> bool:
        start, end = self.active_hours
        if start <= end:
            return start <= hour <= end
        return hour >= start or hour <= end  # window wraps past midnight


@dataclass(frozen=True)
class SpeciesPriorTable:
    entries: tuple[SpeciesPrior, ...]
    utc_offset_hours: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.entries and not any(e.base_rate > 0 for e in self.entries):
            raise ValueError("at least one species needs a positive base_rate")

    @property
    def species(self) -> list[str]:
        return [e.species_id for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def reorder(self, species: Sequence[str]) -> "SpeciesPriorTable":
        """Table restricted and ordered to ``species``; unknown ids get base rate 0."""
        by_id = {e.species_id: e for e in self.entries}
        rows = [
            by_id.get(s, SpeciesPrior(s, (-math.inf, math.inf), (0.0, 24.0), 0.0))
            for s in species
        ]
        return SpeciesPriorTable(tuple(rows), self.utc_offset_hours)


def load_prior_table(path: str | Path, utc_offset_hours: float = 0.0) -> SpeciesPriorTable:
    """Read the CSV form: species_id, temp_min_c, temp_max_c, hour_start, hour_end, base_rate."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append(
                    SpeciesPrior(
                        row["species_id"],
                        (float(row["temp_min_c"]), float(row["temp_max_c"])),
                        (float(row["hour_start"]), float(row["hour_end"])),
                        float(row["base_rate"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError("BadRow", str(exc), lineno) from exc
    if not rows:
        raise EmptyTable(f"{path}: no species rows")
    return SpeciesPriorTable(tuple(rows), utc_offset_hours)


def cloudage_index(spectral_channels: Sequence[float]) -> float:
    """0 for a blue-dominated clear sky, towards 1 as scattering flattens the spectrum.

    Computed as ``1 - blue/red`` over the 415-480 nm and 590-690 nm channel
    means, clamped to [0, 1].
    """
    ch = np.asarray(spectral_channels, dtype=np.float64)
    if ch.size != len(SPECTRAL_BANDS):
        raise ValueError(f"expected {len(SPECTRAL_BANDS)} channels, got {ch.size}")
    if np.any(ch < 0):
        raise ValueError("spectral channels must be non-negative")
    red = ch[list(RED_CHANNELS)].mean()
    if red == 0 or ch[CLEAR_CHANNEL] == 0:
        raise ZeroSpectrum("red band or clear channel reads zero")
    blue = ch[list(BLUE_CHANNELS)].mean()
    return float(min(max(1.0 - blue / red, 0.0), 1.0))


def local_hour(timestamp: float, utc_offset_hours: float = 0.0) -> float:
    return ((timestamp / 3600.0) + utc_offset_hours) % 24.0


def species_prior(env: EnvSnapshot, table: SpeciesPriorTable) -> np.ndarray:
    """Base rate gated by temperature range and active hours, normalized.

    When no species passes both gates the plain base-rate distribution is
    returned.
    """
    if len(table) == 0:
        raise EmptyTable("species prior table is empty")
    hour = local_hour(env.timestamp, table.utc_offset_hours)
    base = np.array([e.base_rate for e in table.entries], dtype=np.float64)
    gate = np.array(
        [
            e.temperature_range_c[0] <= env.temperature_c <= e.temperature_range_c[1] and e.active_at(hour)
            for e in table.entries
        ],
        dtype=np.float64,
    )
    weights = base * gate
    if weights.sum() <= 0:
        weights = base
    return weights / weights.sum()


def _check_distribution(p: np.ndarray, name: str):
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise NotNormalized(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > 1e-6:
        raise NotNormalized(f"{name} sums to {p.sum():.9f}, not 1")


def apply_prior(classifier_posterior: Sequence[float], prior: Sequence[float]) -> np.ndarray:
    """Bayes combination: product of posterior and prior, renormalized.

    The prior only matters up to scale; the posterior must be a distribution.
    An all-zero product returns the posterior unchanged.
    """
    post = np.asarray(classifier_posterior, dtype=np.float64)
    pri = np.asarray(prior, dtype=np.float64)
    if post.shape != pri.shape:
        raise LengthMismatch(f"posterior has {post.size} entries, prior {pri.size}")
    _check_distribution(post, "posterior")
    if np.any(pri < 0) or not np.all(np.isfinite(pri)) or pri.sum() <= 0:
        raise NotNormalized("prior must be non-negative with a positive sum")
    prod = post * pri
    total = prod.sum()
    if total <= 0:
        return post.copy()
    return prod / total
