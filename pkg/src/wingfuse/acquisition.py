"""Simulated acquisition: light-barrier trigger, flash-lit camera frames, photodiode transit.

Frames are modelled as records (timestamp, mean brightness, descriptor) rather
than pixel arrays.
"""

from __future__ import annotations

import math
import zlib
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .dsp import DEFAULT_SAMPLE_RATE, SensorGeometry, TimeSeries
from .envprior import EnvSnapshot
from .errors import (
    AliasedScenario,
    InsufficientFrames,
    InvalidBeamRange,
    NoModalities,
)

DEFAULT_DESCRIPTOR_DIM = 16
DEFAULT_FRAME_RATE = 40.0
DEFAULT_BUFFER_CAPACITY = 64
DEFAULT_WINDOW_S = 0.5
GENERATOR_HARMONICS = 3
HARMONIC_POWER_DECAY = 0.5
NOISE_DB = -40.0
WING_MODULATION_INDEX = 0.5
# light barrier: insect body plus beam width crossed at flight speed
BARRIER_DWELL_M = 0.015
BARRIER_OCCLUSION = 0.9
BEAM_NOISE = 2e-3
AMBIENT_BRIGHTNESS = 0.15
FLASH_BRIGHTNESS = 0.7
BRIGHTNESS_NOISE = 0.02


@dataclass(frozen=True)
class TransitScenario:
    species_id: str
    entry_time: float
    speed_mps: float
    wingbeat_hz: float
    body_shadow_depth: float
    rng_seed: int = 0

    def __post_init__(self):
        if not self.speed_mps > 0:
            raise ValueError(f"speed_mps must be positive, got {self.speed_mps}")
        if not 0 < self.body_shadow_depth <= 1:
            raise ValueError(f"body_shadow_depth must be in (0, 1], got {self.body_shadow_depth}")
        if self.wingbeat_hz < 0:
            raise ValueError(f"wingbeat_hz must be non-negative, got {self.wingbeat_hz}")
        if self.entry_time < 0:
            raise ValueError("entry_time must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "TransitScenario":
        return cls(
            species_id=str(d["species_id"]),
            entry_time=float(d["entry_time"]),
            speed_mps=float(d["speed_mps"]),
            wingbeat_hz=float(d["wingbeat_hz"]),
            body_shadow_depth=float(d["body_shadow_depth"]),
            rng_seed=int(d.get("rng_seed", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "species_id": self.species_id,
            "entry_time": self.entry_time,
            "speed_mps": self.speed_mps,
            "wingbeat_hz": self.wingbeat_hz,
            "body_shadow_depth": self.body_shadow_depth,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True, eq=False)
class Frame:
    timestamp: float
    mean_brightness: float
    descriptor: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.mean_brightness <= 1.0:
            raise ValueError(f"mean_brightness must be in [0, 1], got {self.mean_brightness}")
        d = np.array(self.descriptor, dtype=np.float64).ravel()
        d.setflags(write=False)
        object.__setattr__(self, "descriptor", d)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.timestamp == other.timestamp
            and self.mean_brightness == other.mean_brightness
            and np.array_equal(self.descriptor, other.descriptor)
        )

    __hash__ = None


class RingBuffer:
    """Fixed-capacity frame store; the oldest frame is evicted first."""

    def __init__(self, capacity: int = DEFAULT_BUFFER_CAPACITY, frames: Iterable[Frame] = ()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._frames: deque[Frame] = deque(maxlen=capacity)
        for f in frames:
            self.push(f)

    def push(self, frame: Frame) -> None:
        if self._frames and frame.timestamp <= self._frames[-1].timestamp:
            raise ValueError("frame timestamps must be strictly increasing")
        self._frames.append(frame)

    @property
    def frames(self) -> tuple[Frame, ...]:
        return tuple(self._frames)

    def __len__(self):
        return len(self._frames)

    def __iter__(self):
        return iter(tuple(self._frames))

    def __eq__(self, other):
        if not isinstance(other, RingBuffer):
            return NotImplemented
        return self.capacity == other.capacity and self.frames == other.frames


@dataclass(frozen=True)
class TriggerConfig:
    beam_threshold: float = 0.5
    flash_duration_s: float = 500e-6
    exposure_s: float = 23.5e-3
    refractory_s: float = 0.25
    frames_to_select: int = 3

    def __post_init__(self):
        if not 0 < self.beam_threshold < 1:
            raise ValueError("beam_threshold must be in (0, 1)")
        if not 0 < self.flash_duration_s < self.exposure_s:
            raise ValueError("flash_duration_s must be positive and shorter than exposure_s")
        if self.refractory_s < 0:
            raise ValueError("refractory_s must be non-negative")
        if self.frames_to_select < 1:
            raise ValueError("frames_to_select must be >= 1")


@dataclass(frozen=True, eq=False)
class DetectionEvent:
    event_id: str
    trigger_time: float
    wingbeat_segment: TimeSeries | None = None
    selected_frames: tuple[Frame, ...] | None = None
    env: EnvSnapshot | None = None

    def __post_init__(self):
        if self.selected_frames is not None:
            object.__setattr__(self, "selected_frames", tuple(self.selected_frames) or None)
        if self.wingbeat_segment is None and self.selected_frames is None and self.env is None:
            raise NoModalities("a detection event needs at least one modality")

    @property
    def has_wingbeat(self) -> bool:
        return self.wingbeat_segment is not None

    @property
    def has_image(self) -> bool:
        return self.selected_frames is not None

    @property
    def absent(self) -> tuple[str, ...]:
        flags = []
        if self.wingbeat_segment is None:
            flags.append("wingbeat")
        if self.selected_frames is None:
            flags.append("camera")
        if self.env is None:
            flags.append("env")
        return tuple(flags)

    def without(self, *modalities: str) -> "DetectionEvent":
        """Copy of the event with the named modalities dropped."""
        return DetectionEvent(
            self.event_id,
            self.trigger_time,
            None if "wingbeat" in modalities else self.wingbeat_segment,
            None if "camera" in modalities else self.selected_frames,
            None if "env" in modalities else self.env,
        )

    def __eq__(self, other):
        if not isinstance(other, DetectionEvent):
            return NotImplemented
        return (
            self.event_id == other.event_id
            and self.trigger_time == other.trigger_time
            and self.wingbeat_segment == other.wingbeat_segment
            and self.selected_frames == other.selected_frames
            and self.env == other.env
        )

    __hash__ = None


def run_trigger(beam_signal: TimeSeries, config: TriggerConfig | None = None) -> list[float]:
    """Times at which the beam falls below threshold, one per refractory period."""
    config = config or TriggerConfig()
    b = beam_signal.samples
    if b.size and (b.min() < 0.0 or b.max() > 1.0):
        raise InvalidBeamRange("beam samples must lie in [0, 1]")
    refractory = math.ceil(config.refractory_s * beam_signal.sample_rate - 1e-9)
    idx = kernels.falling_crossings(b, config.beam_threshold, refractory)
    return [beam_signal.start_time + i / beam_signal.sample_rate for i in idx.tolist()]


def _brightness_order(frames: Sequence[Frame]) -> list[Frame]:
    return sorted(frames, key=lambda f: (-f.mean_brightness, f.timestamp))


def select_frames(
    buffer: RingBuffer | Iterable[Frame],
    trigger_time: float,
    window_s: float = DEFAULT_WINDOW_S,
    k: int = 3,
) -> list[Frame]:
    """The ``k`` brightest frames within ``window_s`` of the trigger.

    Ties in brightness go to the earlier frame.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not window_s > 0:
        raise ValueError("window_s must be positive")
    candidates = [f for f in buffer if abs(f.timestamp - trigger_time) <= window_s]
    if len(candidates) < k:
        raise InsufficientFrames(f"{len(candidates)} frames within {window_s} s of trigger, need {k}")
    return _brightness_order(candidates)[:k]


def descriptor_center(species_id: str, dim: int = DEFAULT_DESCRIPTOR_DIM) -> np.ndarray:
    """Stable per-species descriptor prototype derived from the identifier."""
    rng = np.random.default_rng(zlib.crc32(species_id.encode("utf-8")))
    return rng.normal(0.0, 1.0, dim)


def _raised_cosine(t: np.ndarray, start: float, duration: float) -> np.ndarray:
    u = (t - start) / duration
    out = 0.5 - 0.5 * np.cos(2.0 * np.pi * u)
    out[(u < 0) | (u > 1)] = 0.0
    return out


class Transit(NamedTuple):
    beam: TimeSeries
    photodiode: TimeSeries
    frames: RingBuffer


def simulate_transit(
    scenario: TransitScenario,
    geometry: SensorGeometry | None = None,
    config: TriggerConfig | None = None,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    *,
    pre_roll_s: float = 0.1,
    post_roll_s: float = 0.1,
    frame_rate: float = DEFAULT_FRAME_RATE,
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY,
    descriptor_dim: int = DEFAULT_DESCRIPTOR_DIM,
    descriptor_mean: np.ndarray | None = None,
    descriptor_noise: float = 0.3,
) -> Transit:
    """Render the beam, photodiode and camera streams of one insect crossing.

    The photodiode shading follows a raised-cosine envelope over the time the
    insect needs to cross the active length, modulated by three wingbeat
    harmonics whose powers halve per order, plus white noise 40 dB below the
    modulation. The beam dips over the centre of the transit; each trigger
    fires a flash that lights the overlapping camera exposures.
    """
    geometry = geometry or SensorGeometry()
    config = config or TriggerConfig()
    if sample_rate < 4.0 * scenario.wingbeat_hz * GENERATOR_HARMONICS:
        raise AliasedScenario(
            f"sample rate {sample_rate} Hz too low for {scenario.wingbeat_hz} Hz with "
            f"{GENERATOR_HARMONICS} harmonics"
        )
    rng = np.random.default_rng(scenario.rng_seed)
    transit_s = geometry.active_length_m / scenario.speed_mps
    t0 = max(0.0, scenario.entry_time - pre_roll_s)
    n = int(round((scenario.entry_time + transit_s + post_roll_s - t0) * sample_rate))
    t = t0 + np.arange(n) / sample_rate

    envelope = _raised_cosine(t, scenario.entry_time, transit_s)
    modulation = np.zeros(n)
    if scenario.wingbeat_hz > 0:
        phases = rng.uniform(0.0, 2.0 * np.pi, GENERATOR_HARMONICS)
        amps = HARMONIC_POWER_DECAY ** (np.arange(GENERATOR_HARMONICS) / 2.0)
        for k in range(GENERATOR_HARMONICS):
            modulation += amps[k] * np.sin(2.0 * np.pi * (k + 1) * scenario.wingbeat_hz * (t - t0) + phases[k])
        modulation /= amps.sum()
    w = WING_MODULATION_INDEX
    shade = scenario.body_shadow_depth * envelope * (1.0 - w / 2.0 + (w / 2.0) * modulation)
    wing_part = scenario.body_shadow_depth * envelope * (w / 2.0) * modulation
    noise_std = math.sqrt(np.mean(wing_part**2)) * 10.0 ** (NOISE_DB / 20.0)
    noise = rng.normal(0.0, 1.0, n) * noise_std
    photodiode = np.clip(1.0 - shade + noise, 0.0, 1.0)

    dwell = BARRIER_DWELL_M / scenario.speed_mps
    centre = scenario.entry_time + transit_s / 2.0
    dip = _raised_cosine(t, centre - dwell / 2.0, dwell)
    beam = np.clip(1.0 - BARRIER_OCCLUSION * dip + rng.normal(0.0, BEAM_NOISE, n), 0.0, 1.0)
    beam_ts = TimeSeries(beam, sample_rate, t0)
    flashes = run_trigger(beam_ts, config)

    if descriptor_mean is None:
        descriptor_mean = descriptor_center(scenario.species_id, descriptor_dim)
    descriptor_mean = np.asarray(descriptor_mean, dtype=np.float64)
    period = 1.0 / frame_rate
    first = t0 + rng.uniform(0.0, period)
    n_frames = int(math.floor((t[-1] - first) / period)) + 1
    buffer = RingBuffer(buffer_capacity)
    for i in range(max(n_frames, 0)):
        ts = first + i * period
        lit = 0.0
        for ft in flashes:
            overlap = min(ts + config.exposure_s, ft + config.flash_duration_s) - max(ts, ft)
            lit = max(lit, max(overlap, 0.0) / config.flash_duration_s)
        brightness = float(np.clip(AMBIENT_BRIGHTNESS + FLASH_BRIGHTNESS * lit + rng.normal(0.0, BRIGHTNESS_NOISE), 0.0, 1.0))
        # dim frames carry noisier descriptors
        spread = descriptor_noise * (1.0 + 2.0 * (1.0 - brightness))
        desc = descriptor_mean + rng.normal(0.0, spread, descriptor_mean.size)
        buffer.push(Frame(ts, brightness, desc))
    return Transit(beam_ts, TimeSeries(photodiode, sample_rate, t0), buffer)


def _event_id(trigger_time: float) -> str:
    return f"evt-{int(round(trigger_time * 1e6)):016d}"


def co_register(
    trigger_time: float,
    wingbeat: TimeSeries | None = None,
    frames: Sequence[Frame] | None = None,
    env: EnvSnapshot | None = None,
    window_s: float = DEFAULT_WINDOW_S,
) -> DetectionEvent:
    """Bundle the modalities that fall within ``window_s`` of the trigger.

    A wingbeat segment counts by its time span (distance zero when the span
    covers the trigger); frames are kept individually.
    """
    kept_wb = None
    if wingbeat is not None and len(wingbeat):
        gap = max(wingbeat.start_time - trigger_time, trigger_time - wingbeat.end_time, 0.0)
        if gap <= window_s:
            kept_wb = wingbeat
    kept_frames = None
    if frames:
        inside = [f for f in frames if abs(f.timestamp - trigger_time) <= window_s]
        kept_frames = tuple(_brightness_order(inside)) or None
    kept_env = env if env is not None and abs(env.timestamp - trigger_time) <= window_s else None
    if kept_wb is None and kept_frames is None and kept_env is None:
        raise NoModalities(f"no modality within {window_s} s of trigger at {trigger_time}")
    return DetectionEvent(_event_id(trigger_time), trigger_time, kept_wb, kept_frames, kept_env)
