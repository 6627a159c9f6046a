"""Waveform handling, time-span extraction, STFT, and log-Mel spectrograms.

All functions are pure; defaults (16 kHz, n_fft 512, hop 128, Hann window,
40 Mel bands, HTK Mel scale, log floor 1e-10) are conventional for speech.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_FLOOR = 1e-10


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError("waveform must be mono (1-D)")
        if not np.all(np.isfinite(samples)):
            raise AudioError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise AudioError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class TimeSpan:
    start: float
    end: float

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise AudioError(f"invalid time span [{self.start}, {self.end})")


@dataclass(frozen=True)
class MelConfig:
    n_fft: int = 512
    hop: int = 128
    n_mels: int = 40
    fmin: float = 0.0
    fmax: float = 8000.0
    sample_rate: int = 16000
    log_floor: float = LOG_FLOOR


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-Mel energies, shape (n_mels, n_frames)."""

    data: np.ndarray
    config: MelConfig

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise AudioError("mel spectrogram contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def n_mels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


def extract_span(w: Waveform, span: TimeSpan) -> Waveform:
    """Samples in [start, end) seconds, same sample rate."""
    if span.end > w.duration + 1e-12:
        raise AudioError(f"span end {span.end}s beyond waveform of {w.duration}s")
    lo = int(round(span.start * w.sample_rate))
    hi = int(round(span.end * w.sample_rate))
    return Waveform(w.samples[lo:hi].copy(), w.sample_rate)


def hann_window(n: int) -> np.ndarray:
    # periodic Hann, the usual STFT analysis window
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(n_samples: int, n_fft: int, hop: int) -> int:
    return 1 + (n_samples - n_fft) // hop


def stft(w: Waveform, n_fft: int = 512, hop: int = 128) -> np.ndarray:
    """Complex spectrogram, shape (n_fft // 2 + 1, n_frames)."""
    if n_fft & (n_fft - 1):
        raise AudioError("n_fft must be a power of two")
    if hop > n_fft:
        raise AudioError("hop must not exceed n_fft")
    if len(w) < n_fft:
        raise AudioError(f"waveform of {len(w)} samples shorter than one {n_fft}-sample frame")
    n = frame_count(len(w), n_fft, hop)
    idx = np.arange(n)[:, None] * hop + np.arange(n_fft)[None, :]
    frames = w.samples[idx] * hann_window(n_fft)
    return np.fft.rfft(frames, axis=1).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MelConfig) -> np.ndarray:
    """Triangular filters on the HTK Mel scale, shape (n_mels, n_fft//2 + 1)."""
    if not config.fmin < config.fmax <= config.sample_rate / 2:
        raise AudioError(f"need fmin < fmax <= rate/2, got [{config.fmin}, {config.fmax}]")
    n_bins = config.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * config.sample_rate / config.n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax),
                                  config.n_mels + 2))
    fb = np.zeros((config.n_mels, n_bins))
    for m in range(config.n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bin_hz - lo) / max(mid - lo, 1e-12)
        down = (hi - bin_hz) / max(hi - mid, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def mel_spectrogram(w: Waveform, config: MelConfig | None = None) -> MelSpectrogram:
    """Power spectrogram through the Mel filterbank, floored log energies."""
    config = config or MelConfig(sample_rate=w.sample_rate)
    if config.sample_rate != w.sample_rate:
        config = MelConfig(**{**config.__dict__, "sample_rate": w.sample_rate})
    spec = stft(w, config.n_fft, config.hop)
    power = np.abs(spec) ** 2
    mel = mel_filterbank(config) @ power
    return MelSpectrogram(np.log(np.maximum(mel, config.log_floor)), config)


def read_wav(path: str | Path) -> Waveform:
    """Read a RIFF WAV file (PCM 16-bit little-endian mono)."""
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise AudioError(f"{path}: expected mono audio")
        if fh.getsampwidth() != 2:
            raise AudioError(f"{path}: expected 16-bit PCM")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path: str | Path, w: Waveform) -> None:
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())
