"""Run configuration: one flat TOML document holding every tunable.

Example::

    seed = 3
    segment_len = 4096
    svm_lambda = 0.001
    fusion_hidden = 16

Unknown keys, nested tables, wrong types and out-of-range values are
rejected with :class:`ConfigError`. Keys left out keep their defaults.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .acquisition import DEFAULT_WINDOW_S, TriggerConfig
from .dsp import (
    DEFAULT_CUTOFF_HZ,
    DEFAULT_OVERLAP,
    DEFAULT_SEARCH_BAND,
    DEFAULT_SEGMENT_LEN,
    WINDOWS,
    ChainConfig,
)
from .errors import ConfigError
from .features import FeatureConfig
from .fusion import FusionConfig
from .svm import SvmConfig


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    # wingbeat chain
    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    filter_order: int = 1
    segment_len: int = DEFAULT_SEGMENT_LEN
    overlap_fraction: float = DEFAULT_OVERLAP
    window: str = "hann"
    search_band_low_hz: float = DEFAULT_SEARCH_BAND[0]
    search_band_high_hz: float = DEFAULT_SEARCH_BAND[1]
    max_harmonics: int = 3
    min_relative_power: float = 0.01
    floor_ratio: float = 1e-4
    n_bands: int = 32
    descriptor_dim: int = 16
    # trigger and frame selection
    beam_threshold: float = 0.5
    flash_duration_s: float = 500e-6
    exposure_s: float = 23.5e-3
    refractory_s: float = 0.25
    frames_to_select: int = 3
    frame_window_s: float = DEFAULT_WINDOW_S
    # classifiers
    svm_lambda: float = 1e-3
    svm_epochs: int = 300
    svm_batch_size: int = 0  # 0: full batch
    class_weight: str = "balanced"
    fusion_hidden: int = 16
    fusion_epochs: int = 150
    fusion_lr: float = 0.05
    fusion_momentum: float = 0.9
    fusion_batch_size: int = 32
    fusion_l2: float = 1e-4
    # evaluation
    utc_offset_hours: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            want = {"int": int, "float": (int, float), "str": str}[f.type]
            if isinstance(v, bool) or not isinstance(v, want):
                raise ConfigError(f"{f.name} must be {f.type}, got {v!r}")
            if f.type == "float":
                object.__setattr__(self, f.name, float(v))
        if self.window not in WINDOWS:
            raise ConfigError(f"window must be one of {sorted(WINDOWS)}")
        if not 0 < self.search_band_low_hz < self.search_band_high_hz:
            raise ConfigError("search band must satisfy 0 < low < high")
        if self.segment_len < 16 or self.n_bands < 1 or self.descriptor_dim < 1:
            raise ConfigError("segment_len >= 16, n_bands >= 1 and descriptor_dim >= 1 required")
        if not 0 <= self.overlap_fraction <= 0.9:
            raise ConfigError("overlap_fraction must be in [0, 0.9]")
        if not 0 < self.cutoff_hz or self.filter_order < 1:
            raise ConfigError("cutoff_hz must be positive and filter_order >= 1")
        if self.svm_batch_size < 0 or self.seed < 0:
            raise ConfigError("svm_batch_size and seed must be non-negative")
        if not -12 <= self.utc_offset_hours <= 14:
            raise ConfigError("utc_offset_hours must be in [-12, 14]")
        try:
            self.trigger()
            self.svm_config()
            self.fusion_config()
            self.chain()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def chain(self) -> ChainConfig:
        return ChainConfig(
            cutoff_hz=self.cutoff_hz,
            filter_order=self.filter_order,
            segment_len=self.segment_len,
            overlap_fraction=self.overlap_fraction,
            window=self.window,
            search_band_hz=(self.search_band_low_hz, self.search_band_high_hz),
            max_harmonics=self.max_harmonics,
            min_relative_power=self.min_relative_power,
            floor_ratio=self.floor_ratio,
        )

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(self.chain(), self.n_bands, self.descriptor_dim)

    def trigger(self) -> TriggerConfig:
        return TriggerConfig(
            self.beam_threshold, self.flash_duration_s, self.exposure_s, self.refractory_s, self.frames_to_select
        )

    def svm_config(self) -> SvmConfig:
        return SvmConfig(
            lam=self.svm_lambda,
            epochs=self.svm_epochs,
            seed=self.seed,
            batch_size=self.svm_batch_size or None,
            class_weight=self.class_weight,
        )

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            hidden=self.fusion_hidden,
            epochs=self.fusion_epochs,
            lr=self.fusion_lr,
            momentum=self.fusion_momentum,
            batch_size=self.fusion_batch_size,
            l2=self.fusion_l2,
            seed=self.seed,
            class_weight=self.class_weight,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for key, value in d.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(value, dict):
                raise ConfigError(f"config must be flat; {key!r} is a table")
        return cls(**d)

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(data)
