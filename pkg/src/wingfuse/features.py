"""Per-modality feature vectors: wingbeat spectral features and image descriptors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .acquisition import DEFAULT_DESCRIPTOR_DIM, DetectionEvent, Frame
from .dsp import ChainConfig, PowerSpectrum, TimeSeries, analyze
from .errors import BadDescriptor, DimensionMismatch

SCHEMA_VERSION = 1
MODALITIES = ("wingbeat", "image")
HARMONIC_ORDERS = (2, 3, 4)
FEATURE_BAND_HZ = (30.0, 1200.0)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    modality: str
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        v = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.modality == other.modality
            and self.schema_version == other.schema_version
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class FeatureConfig:
    chain: ChainConfig = field(default_factory=ChainConfig)
    n_bands: int = 32
    descriptor_dim: int = DEFAULT_DESCRIPTOR_DIM

    @property
    def wingbeat_dim(self) -> int:
        return self.n_bands + 1 + len(HARMONIC_ORDERS)

    def dim(self, modality: str) -> int:
        return self.wingbeat_dim if modality == "wingbeat" else self.descriptor_dim


def band_log_power(spectrum: PowerSpectrum, n_bands: int, band_hz=FEATURE_BAND_HZ) -> np.ndarray:
    """log10 of each log-spaced band's share of the total power in ``band_hz``.

    Bands narrower than a frequency bin take the PSD interpolated at their
    geometric centre.
    """
    edges = np.geomspace(band_hz[0], band_hz[1], n_bands + 1)
    f, p = spectrum.frequencies, spectrum.psd
    out = np.empty(n_bands)
    for b in range(n_bands):
        sel = (f >= edges[b]) & (f < edges[b + 1])
        out[b] = p[sel].mean() if sel.any() else np.interp(np.sqrt(edges[b] * edges[b + 1]), f, p)
    total = out.sum()
    share = out / total if total > 0 else np.full(n_bands, 1.0 / n_bands)
    return np.log10(share + 1e-12)


def featurize_wingbeat(signal: TimeSeries, config: FeatureConfig | None = None) -> FeatureVector:
    """Band log-powers, fundamental / 1200 Hz and relative powers of harmonics 2-4."""
    config = config or FeatureConfig()
    spectrum, profile = analyze(signal, config.chain)
    values = np.concatenate(
        [
            band_log_power(spectrum, config.n_bands),
            [profile.fundamental_hz / FEATURE_BAND_HZ[1]],
            profile.relative_powers(HARMONIC_ORDERS),
        ]
    )
    return FeatureVector(values, "wingbeat")


def featurize_image(frame: Frame, config: FeatureConfig | None = None) -> FeatureVector:
    """Validate and pass through the frame's stored descriptor."""
    config = config or FeatureConfig()
    d = getattr(frame, "descriptor", None)
    if d is None:
        raise BadDescriptor("frame has no descriptor")
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.size != config.descriptor_dim:
        raise BadDescriptor(f"descriptor length {d.size}, expected {config.descriptor_dim}")
    if not np.all(np.isfinite(d)):
        raise BadDescriptor("descriptor contains non-finite values")
    return FeatureVector(d, "image")


@dataclass(frozen=True, eq=False)
class EventFeatures:
    """Features of one detection event: a wingbeat vector and one row per frame."""

    wingbeat: np.ndarray | None = None
    image: np.ndarray | None = None

    @property
    def has_wingbeat(self) -> bool:
        return self.wingbeat is not None

    @property
    def has_image(self) -> bool:
        return self.image is not None and len(self.image) > 0

    def without(self, modality: str) -> "EventFeatures":
        if modality == "wingbeat":
            return EventFeatures(None, self.image)
        return EventFeatures(self.wingbeat, None)


def featurize_event(event: DetectionEvent, config: FeatureConfig | None = None) -> EventFeatures:
    config = config or FeatureConfig()
    wb = featurize_wingbeat(event.wingbeat_segment, config).values if event.has_wingbeat else None
    img = None
    if event.has_image:
        img = np.stack([featurize_image(f, config).values for f in event.selected_frames])
    return EventFeatures(wb, img)


def stack(features: Sequence[FeatureVector], modality: str | None = None) -> np.ndarray:
    """Row-stack feature vectors after checking modality and dimension agree."""
    if not features:
        raise ValueError("no feature vectors")
    modality = modality or features[0].modality
    dim = len(features[0])
    for fv in features:
        if fv.modality != modality:
            raise DimensionMismatch(f"mixed modalities {modality} and {fv.modality}")
        if len(fv) != dim:
            raise DimensionMismatch(f"feature lengths {dim} and {len(fv)} differ")
    return np.stack([fv.values for fv in features])
