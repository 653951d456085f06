"""WAV input and MFCC feature extraction."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

LOG_FLOOR = 1e-10


class FeatureError(ValueError):
    pass


class AudioFormatError(FeatureError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_filters: int = 26
    n_coeffs: int = 13
    preemphasis: float = 0.97

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise FeatureError("sample rate must be positive")
        if not self.frame_ms >= self.hop_ms > 0:
            raise FeatureError("need frame length >= hop > 0")
        if not 0 < self.n_coeffs <= self.n_filters:
            raise FeatureError("need 0 < coefficients <= filters")
        if self.frame_length < 2 or self.hop_length < 1:
            raise FeatureError("frame or hop shorter than one sample")

    @property
    def frame_length(self) -> int:
        return int(round(self.sample_rate * self.frame_ms / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    @property
    def n_fft(self) -> int:
        return 1 << (self.frame_length - 1).bit_length()


def wav_read(path) -> tuple[np.ndarray, int]:
    """Samples of a 16-bit PCM mono WAV file scaled to [-1, 1), and the sample rate."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getcomptype() != "NONE":
                raise AudioFormatError(f"{path}: compressed WAV ({w.getcomptype()}) is not supported")
            if w.getsampwidth() != 2:
                raise AudioFormatError(f"{path}: only 16-bit PCM is supported, got {8 * w.getsampwidth()}-bit")
            if w.getnchannels() != 1:
                raise AudioFormatError(f"{path}: only mono is supported, got {w.getnchannels()} channels")
            n = w.getnframes()
            rate = w.getframerate()
            raw = w.readframes(n)
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise AudioFormatError(f"{path}: truncated file") from exc
    if len(raw) != 2 * n:
        raise AudioFormatError(f"{path}: truncated file ({len(raw) // 2} of {n} samples)")
    return np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0, rate


def wav_write(path, samples, sample_rate: int) -> None:
    """Write samples in [-1, 1] as 16-bit PCM mono."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=float) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """``(n_filters, n_fft // 2 + 1)`` triangular filters equally spaced on the mel scale."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_filters + 2))
    freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def frame_signal(signal, frame_length: int, hop_length: int) -> np.ndarray:
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise FeatureError("signal must be one-dimensional")
    if len(signal) < frame_length:
        raise FeatureError(f"signal of {len(signal)} samples is shorter than one frame ({frame_length})")
    n = 1 + (len(signal) - frame_length) // hop_length
    idx = np.arange(frame_length)[None, :] + hop_length * np.arange(n)[:, None]
    return signal[idx]


def mfcc_extract(signal, config: FeatureConfig | None = None) -> np.ndarray:
    """``(T, n_coeffs)`` cepstra, c0 included.

    Pre-emphasis is applied inside each frame so that shifting the signal by
    one hop shifts the output by exactly one frame.
    """
    cfg = config or FeatureConfig()
    frames = frame_signal(signal, cfg.frame_length, cfg.hop_length)
    frames = np.concatenate([frames[:, :1] * (1.0 - cfg.preemphasis),
                             frames[:, 1:] - cfg.preemphasis * frames[:, :-1]], axis=1)
    frames = frames * np.hamming(cfg.frame_length)
    spectrum = np.abs(np.fft.rfft(frames, n=cfg.n_fft))
    energies = spectrum @ mel_filterbank(cfg.n_filters, cfg.n_fft, cfg.sample_rate).T
    return dct(np.log(np.maximum(energies, LOG_FLOOR)), type=2, norm="ortho", axis=1)[:, : cfg.n_coeffs]
