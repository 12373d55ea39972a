"""Mono PCM WAV reading and writing (16- or 24-bit)."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .dsp import TimeSeries
from .errors import WavFormatError


def _decode(raw: bytes, width: int) -> np.ndarray:
    if width == 2:
        return np.frombuffer(raw, dtype="<i2").astype(np.int64)
    if width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        return np.where(v >= 1 << 23, v - (1 << 24), v)
    raise WavFormatError(f"unsupported sample width {8 * width} bit; expected 16 or 24")


def read_wav(path: str | Path, start_time: float = 0.0) -> TimeSeries:
    """Load a mono 16/24-bit PCM file, scaled by full scale into [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if channels != 1:
        raise WavFormatError(f"{path}: {channels} channels, only mono is supported")
    ints = _decode(raw, width)
    return TimeSeries(ints / float(1 << (8 * width - 1)), float(rate), start_time)


def write_wav(path: str | Path, signal: TimeSeries, bits: int = 24) -> None:
    """Write ``signal`` as mono PCM; samples are clipped to the representable range."""
    if bits not in (16, 24):
        raise WavFormatError(f"unsupported bit depth {bits}")
    if signal.sample_rate != int(signal.sample_rate):
        raise WavFormatError("WAV needs an integer sample rate")
    full = 1 << (bits - 1)
    ints = np.clip(np.round(signal.samples * full), -full, full - 1).astype(np.int64)
    if bits == 16:
        raw = ints.astype("<i2").tobytes()
    else:
        u = ints & 0xFFFFFF
        raw = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(bits // 8)
        w.setframerate(int(signal.sample_rate))
        w.writeframes(raw)
