"""Wingbeat signal chain: DC removal, high-pass, Welch PSD, STFT and harmonic picking.

All routines are pure functions over immutable containers. Arrays held by the
containers are flagged read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import (
    EmptySignal,
    InvalidCutoff,
    InvalidHop,
    InvalidOverlap,
    NoPeak,
    SegmentTooLong,
    ZeroSpeed,
)

DEFAULT_SAMPLE_RATE = 96_000.0
DEFAULT_CUTOFF_HZ = 8.0
DEFAULT_SEGMENT_LEN = 8192
DEFAULT_OVERLAP = 0.5
DEFAULT_SEARCH_BAND = (30.0, 1200.0)
WINDOWS = ("hann", "rect")


def _frozen(values, dtype=np.float64):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled waveform. ``start_time`` is seconds since the epoch."""

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples).ravel())
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.start_time < 0:
            raise ValueError(f"start_time must be non-negative, got {self.start_time}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.sample_rate

    def with_samples(self, samples) -> "TimeSeries":
        return TimeSeries(samples, self.sample_rate, self.start_time)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.start_time == other.start_time
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    frequencies: np.ndarray
    psd: np.ndarray
    resolution: float

    def __post_init__(self):
        object.__setattr__(self, "frequencies", _frozen(self.frequencies))
        object.__setattr__(self, "psd", _frozen(self.psd))
        if self.frequencies.shape != self.psd.shape:
            raise ValueError("frequencies and psd lengths differ")
        if np.any(self.psd < 0):
            raise ValueError("psd must be non-negative")

    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.resolution)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    times: np.ndarray
    frequencies: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "frequencies", _frozen(self.frequencies))
        object.__setattr__(self, "power", _frozen(self.power))
        if self.power.shape != (self.times.size, self.frequencies.size):
            raise ValueError("power matrix does not match time x frequency axes")

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])


class Harmonic(NamedTuple):
    order: int
    frequency_hz: float
    relative_power: float


@dataclass(frozen=True)
class HarmonicProfile:
    fundamental_hz: float
    fundamental_power: float
    harmonics: tuple[Harmonic, ...] = ()

    def relative_powers(self, orders: Sequence[int]) -> list[float]:
        """Relative power for each requested order, 0.0 where no peak was found."""
        found = {h.order: h.relative_power for h in self.harmonics}
        return [found.get(k, 0.0) for k in orders]


@dataclass(frozen=True)
class SensorGeometry:
    active_length_m: float = 0.06
    sensor_area_mm: tuple[float, float] = (100.0, 100.0)
    freq_band_hz: tuple[float, float] = (200.0, 600.0)
    # 2 km/h and 30 km/h
    speed_band_mps: tuple[float, float] = (2 / 3.6, 30 / 3.6)

    def __post_init__(self):
        if not self.active_length_m > 0:
            raise ValueError("active_length_m must be positive")
        for name in ("freq_band_hz", "speed_band_mps"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name}: lower bound must be below upper bound")


def _require_samples(signal: TimeSeries):
    if len(signal) == 0:
        raise EmptySignal("signal has no samples")


def remove_dc(signal: TimeSeries) -> TimeSeries:
    _require_samples(signal)
    x = signal.samples
    # exact summation so a constant input comes back as exact zeros
    return signal.with_samples(x - math.fsum(x) / x.size)


def highpass_coefficients(cutoff_hz: float, sample_rate: float, order: int = 1) -> np.ndarray:
    """First-order bilinear sections, one row ``(b0, b1, a1)`` per section.

    Section cutoffs are pre-warped so that the whole cascade sits at -3 dB at
    ``cutoff_hz``.
    """
    if not 0 < cutoff_hz < sample_rate / 2:
        raise InvalidCutoff(f"cutoff {cutoff_hz} Hz outside (0, {sample_rate / 2}) Hz")
    if order < 1:
        raise ValueError("filter order must be >= 1")
    warped = math.tan(math.pi * cutoff_hz / sample_rate)
    k = warped * math.sqrt(2.0 ** (1.0 / order) - 1.0)
    row = (1.0 / (1.0 + k), -1.0 / (1.0 + k), (k - 1.0) / (k + 1.0))
    return np.tile(np.array(row), (order, 1))


def highpass_response(freqs_hz, cutoff_hz: float, sample_rate: float, order: int = 1) -> np.ndarray:
    """Complex frequency response of :func:`highpass_filter` at ``freqs_hz``."""
    z1 = np.exp(-2j * np.pi * np.asarray(freqs_hz, dtype=float) / sample_rate)
    h = np.ones_like(z1)
    for b0, b1, a1 in highpass_coefficients(cutoff_hz, sample_rate, order):
        h = h * (b0 + b1 * z1) / (1.0 + a1 * z1)
    return h


def highpass_filter(signal: TimeSeries, cutoff_hz: float = DEFAULT_CUTOFF_HZ, order: int = 1) -> TimeSeries:
    coeffs = highpass_coefficients(cutoff_hz, signal.sample_rate, order)
    _require_samples(signal)
    return signal.with_samples(kernels.first_order_sections(signal.samples, coeffs))


def condition(signal: TimeSeries, cutoff_hz: float = DEFAULT_CUTOFF_HZ, order: int = 1) -> TimeSeries:
    """Sound-card front end: subtract the body DC level, then high-pass."""
    return highpass_filter(remove_dc(signal), cutoff_hz, order)


def window_values(name: str, n: int) -> np.ndarray:
    if name == "hann":
        # periodic Hann, the DFT-even form used for spectral estimation
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if name == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window {name!r}; expected one of {WINDOWS}")


def _one_sided_periodograms(frames: np.ndarray, window: np.ndarray, sample_rate: float, detrend: bool) -> np.ndarray:
    """Density-scaled one-sided periodogram for each row of ``frames``."""
    if detrend:
        frames = frames - frames.mean(axis=1, keepdims=True)
    n = frames.shape[1]
    spec = np.fft.rfft(frames * window, axis=1)
    power = (spec.real**2 + spec.imag**2) / (sample_rate * np.sum(window**2))
    # fold negative frequencies; DC and (even n) Nyquist appear once
    if n % 2 == 0:
        power[:, 1:-1] *= 2.0
    else:
        power[:, 1:] *= 2.0
    return power


def _check_segment(signal: TimeSeries, segment_len: int):
    _require_samples(signal)
    if segment_len < 16:
        raise SegmentTooLong(f"segment_len must be >= 16, got {segment_len}")
    if segment_len > len(signal):
        raise SegmentTooLong(f"segment_len {segment_len} exceeds signal length {len(signal)}")


def welch_psd(
    signal: TimeSeries,
    segment_len: int = DEFAULT_SEGMENT_LEN,
    overlap_fraction: float = DEFAULT_OVERLAP,
    window: str = "hann",
    detrend: bool = True,
) -> PowerSpectrum:
    """Averaged-periodogram PSD estimate over ``[0, Nyquist]``.

    Scaling is one-sided density, so ``sum(psd) * resolution`` recovers the
    signal variance. With ``detrend`` each segment has its mean removed first.
    """
    _check_segment(signal, segment_len)
    if not 0.0 <= overlap_fraction <= 0.9:
        raise InvalidOverlap(f"overlap_fraction must be in [0, 0.9], got {overlap_fraction}")
    step = segment_len - int(round(overlap_fraction * segment_len))
    x = signal.samples
    count = (len(x) - segment_len) // step + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, segment_len)[::step][:count]
    power = _one_sided_periodograms(frames, window_values(window, segment_len), signal.sample_rate, detrend)
    resolution = signal.sample_rate / segment_len
    freqs = np.arange(power.shape[1]) * resolution
    return PowerSpectrum(freqs, power.mean(axis=0), resolution)


def stft_spectrogram(
    signal: TimeSeries,
    segment_len: int = 4096,
    hop: int = 1024,
    window: str = "hann",
    detrend: bool = True,
) -> Spectrogram:
    """Time-frequency power; each row is the single-segment periodogram of its frame.

    ``times`` are frame centres in seconds relative to the first sample.
    """
    _check_segment(signal, segment_len)
    if hop < 1:
        raise InvalidHop(f"hop must be >= 1, got {hop}")
    x = signal.samples
    count = (len(x) - segment_len) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, segment_len)[::hop][:count]
    power = _one_sided_periodograms(frames, window_values(window, segment_len), signal.sample_rate, detrend)
    times = (np.arange(count) * hop + segment_len / 2) / signal.sample_rate
    freqs = np.arange(power.shape[1]) * (signal.sample_rate / segment_len)
    return Spectrogram(times, freqs, power)


def _refine_peak(psd: np.ndarray, i: int) -> tuple[float, float]:
    """Fractional bin offset and peak height from a 3-point parabola.

    The parabola is fitted to log power when all three points are positive,
    which is exact for Gaussian-shaped peaks and close for Hann main lobes.
    """
    if i <= 0 or i >= psd.size - 1:
        return 0.0, float(psd[i])
    a, b, c = psd[i - 1], psd[i], psd[i + 1]
    if a > 0 and b > 0 and c > 0:
        la, lb, lc = math.log(a), math.log(b), math.log(c)
        denom = la - 2 * lb + lc
        if denom >= 0:
            return 0.0, float(b)
        delta = 0.5 * (la - lc) / denom
        return delta, math.exp(lb - 0.25 * (la - lc) * delta)
    denom = a - 2 * b + c
    if denom >= 0:
        return 0.0, float(b)
    delta = 0.5 * (a - c) / denom
    return delta, float(b - 0.25 * (a - c) * delta)


def _is_local_max(psd: np.ndarray, j: int) -> bool:
    left = psd[j - 1] if j > 0 else -np.inf
    right = psd[j + 1] if j < psd.size - 1 else -np.inf
    return bool(psd[j] >= left and psd[j] >= right)


def extract_harmonics(
    spectrum: PowerSpectrum,
    search_band_hz: tuple[float, float] = DEFAULT_SEARCH_BAND,
    max_harmonics: int = 3,
    min_relative_power: float = 0.01,
    floor_ratio: float = 0.0,
) -> HarmonicProfile:
    """Fundamental inside ``search_band_hz`` plus harmonics 2..max_harmonics+1.

    The fundamental is the strongest local PSD maximum inside the band,
    refined by 3-point interpolation.
    A harmonic is kept when a local PSD maximum sits within 1.5 bins of its
    integer multiple and carries at least ``min_relative_power`` of the
    fundamental's power. ``floor_ratio`` rejects in-band peaks weaker than that
    fraction of the strongest bin anywhere in the spectrum.
    """
    if max_harmonics < 0:
        raise ValueError("max_harmonics must be >= 0")
    freqs, psd, res = spectrum.frequencies, spectrum.psd, spectrum.resolution
    lo, hi = search_band_hz
    band = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    if band.size == 0:
        raise NoPeak(f"no frequency bins inside {search_band_hz}")
    # a leakage tail falling across the band edge is not a peak
    band = band[[_is_local_max(psd, j) for j in band]]
    if band.size == 0:
        raise NoPeak(f"no local maximum inside {search_band_hz}")
    i = int(band[np.argmax(psd[band])])
    peak = psd[i]
    if peak <= 0:
        raise NoPeak(f"spectrum is zero inside {search_band_hz}")
    if floor_ratio > 0 and peak < floor_ratio * psd.max():
        raise NoPeak(f"in-band peak {peak:.3g} below floor {floor_ratio:g} x spectrum maximum")
    delta, fund_power = _refine_peak(psd, i)
    f0 = float(np.clip(freqs[i] + delta * res, lo, hi))

    harmonics = []
    for k in range(2, max_harmonics + 2):
        target = k * f0
        if target - 1.5 * res > freqs[-1]:
            break
        near = np.flatnonzero(np.abs(freqs - target) <= 1.5 * res)
        if near.size == 0:
            continue
        j = int(near[np.argmax(psd[near])])
        if psd[j] <= 0 or not _is_local_max(psd, j):
            continue
        dj, pj = _refine_peak(psd, j)
        rel = pj / fund_power
        if rel < min_relative_power:
            continue
        fj = float(np.clip(freqs[j] + dj * res, target - 1.5 * res, target + 1.5 * res))
        harmonics.append(Harmonic(k, fj, float(min(rel, 1.0))))
    return HarmonicProfile(f0, float(fund_power), tuple(harmonics))


def expected_beats_in_path(wingbeat_hz: float, speed_mps: float, geometry: SensorGeometry | None = None) -> float:
    """Wing beats completed while crossing the sensor's active length."""
    if speed_mps <= 0:
        raise ZeroSpeed(f"speed must be positive, got {speed_mps}")
    if wingbeat_hz < 0:
        raise ValueError("wingbeat_hz must be non-negative")
    geometry = geometry or SensorGeometry()
    return wingbeat_hz * geometry.active_length_m / speed_mps


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of the conditioning + PSD + harmonic chain."""

    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    filter_order: int = 1
    segment_len: int = DEFAULT_SEGMENT_LEN
    overlap_fraction: float = DEFAULT_OVERLAP
    window: str = "hann"
    search_band_hz: tuple[float, float] = DEFAULT_SEARCH_BAND
    max_harmonics: int = 3
    min_relative_power: float = 0.01
    floor_ratio: float = 1e-4


def analyze(signal: TimeSeries, chain: ChainConfig | None = None) -> tuple[PowerSpectrum, HarmonicProfile]:
    """Condition ``signal``, estimate its PSD and pick the harmonic profile.

    Recordings shorter than the configured segment use one full-length segment.
    """
    chain = chain or ChainConfig()
    conditioned = condition(signal, chain.cutoff_hz, chain.filter_order)
    seg = min(chain.segment_len, len(conditioned))
    spectrum = welch_psd(conditioned, seg, chain.overlap_fraction, chain.window)
    profile = extract_harmonics(
        spectrum,
        chain.search_band_hz,
        chain.max_harmonics,
        chain.min_relative_power,
        chain.floor_ratio,
    )
    return spectrum, profile
