"""Mel-spectrogram front-end.

Frames are taken without centering: frame ``f`` covers samples
``[f*hop, f*hop + win_len)``, Hann-windowed (periodic) and zero-padded to
``fft_size``. Filters are triangles on the HTK mel scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidRange, TooShort

LOG_EPS = 1e-6


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    win_len: int = 400
    hop: int = 160
    fft_size: int = 512
    n_mels: int = 32
    f_min: float = 60.0
    f_max: float = 3800.0

    def __post_init__(self):
        if self.win_len < 1 or self.hop < 1 or self.n_mels < 1:
            raise InvalidRange("win_len, hop and n_mels must be >= 1")
        if self.win_len > self.fft_size:
            raise InvalidRange(f"win_len {self.win_len} exceeds fft_size {self.fft_size}")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise InvalidRange(f"need 0 <= f_min < f_max <= {self.sample_rate / 2}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.win_len:
            return 0
        return (n_samples - self.win_len) // self.hop + 1

    def min_samples(self, n_frames: int) -> int:
        """Shortest input yielding ``n_frames`` frames."""
        return self.win_len + (n_frames - 1) * self.hop


PIPELINE_MEL = MelConfig()
SPEAKER_MEL = MelConfig(win_len=2048, hop=512, fft_size=2048, n_mels=96, f_min=0.0, f_max=8000.0)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window, ``w[0] == 0``."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


def frame_signal(clip: np.ndarray, win_len: int, hop: int) -> np.ndarray:
    clip = np.asarray(clip, dtype=np.float64)
    n_frames = (clip.size - win_len) // hop + 1
    idx = np.arange(win_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return clip[idx]


def stft_power(clip: np.ndarray, config: MelConfig = PIPELINE_MEL) -> np.ndarray:
    """Squared-magnitude STFT, shape ``[n_frames, fft_size // 2 + 1]``."""
    clip = np.asarray(clip, dtype=np.float64)
    if clip.size < config.win_len:
        raise TooShort(f"need at least {config.win_len} samples, got {clip.size}")
    frames = frame_signal(clip, config.win_len, config.hop) * hann_window(config.win_len)
    spec = np.fft.rfft(frames, n=config.fft_size, axis=1)
    return spec.real**2 + spec.imag**2


@lru_cache(maxsize=16)
def _filterbank(config: MelConfig) -> np.ndarray:
    mel_pts = np.linspace(hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    freqs = np.arange(config.n_bins) * config.sample_rate / config.fft_size
    lo, mid, hi = hz_pts[:-2, None], hz_pts[1:-1, None], hz_pts[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def mel_filterbank(config: MelConfig = PIPELINE_MEL) -> np.ndarray:
    """Triangular HTK-mel filters, shape ``[n_mels, fft_size // 2 + 1]``.

    The result is cached per config and read-only.
    """
    return _filterbank(config)


def scale_mels(log_mels):
    return np.asarray(log_mels, dtype=np.float64) / 10.0 + 2.0


def mel_power(clip: np.ndarray, config: MelConfig = PIPELINE_MEL) -> np.ndarray:
    """Linear-power mel spectrogram, shape ``[n_frames, n_mels]``."""
    return stft_power(clip, config) @ mel_filterbank(config).T


def melspectrogram(clip: np.ndarray, config: MelConfig = PIPELINE_MEL) -> np.ndarray:
    """Scaled log-mel frames ``ln(mel_power + 1e-6) / 10 + 2``, shape ``[n_frames, n_mels]``."""
    return scale_mels(np.log(mel_power(clip, config) + LOG_EPS))
