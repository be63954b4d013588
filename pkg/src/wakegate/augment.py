"""Seeded offline audio augmentation.

Every random draw for clip ``index`` comes from its own SplitMix64 stream,
so :func:`augment_clip` is a pure function of ``(clip, plan, index)``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .audio_io import SAMPLE_RATE, rms
from .errors import AugmentError
from .rng import SplitMix64

log = logging.getLogger(__name__)


def _clip_report(x: np.ndarray) -> tuple[np.ndarray, int]:
    n = int(np.count_nonzero(np.abs(x) > 1.0))
    return (np.clip(x, -1.0, 1.0) if n else x), n


def apply_gain(clip, db: float) -> tuple[np.ndarray, int]:
    """Scale by ``10**(db/20)``; returns the clipped result and the clip count."""
    if not np.isfinite(db):
        raise AugmentError("gain must be finite")
    return _clip_report(np.asarray(clip, dtype=np.float64) * 10.0 ** (db / 20.0))


def _tile(noise: np.ndarray, n: int) -> np.ndarray:
    if noise.size >= n:
        return noise[:n]
    return np.tile(noise, -(-n // noise.size))[:n]


def scale_noise_for_snr(clip, noise, snr_db: float) -> np.ndarray:
    """Noise (tiled or cut to the clip length) scaled to sit ``snr_db`` below the clip."""
    clip = np.asarray(clip, dtype=np.float64)
    noise = _tile(np.asarray(noise, dtype=np.float64), clip.size)
    s, n = rms(clip), rms(noise)
    if s <= 1e-8:
        raise AugmentError("SilentSignal: cannot set an SNR against a silent clip")
    if n <= 1e-8:
        raise AugmentError("SilentNoise: noise clip is silent")
    return noise * (s / (n * 10.0 ** (snr_db / 20.0)))


def add_noise_snr(clip, noise, snr_db: float) -> np.ndarray:
    clip = np.asarray(clip, dtype=np.float64)
    return np.clip(clip + scale_noise_for_snr(clip, noise, snr_db), -1.0, 1.0)


def convolve_rir(clip, rir) -> np.ndarray:
    """Reverberate: full convolution cut to the input length, rescaled to the input peak."""
    clip = np.asarray(clip, dtype=np.float64)
    rir = np.asarray(rir, dtype=np.float64)
    if rir.size == 0:
        raise AugmentError("EmptyRir: impulse response is empty")
    if clip.size == 0:
        return clip.copy()
    n = clip.size + rir.size - 1
    size = 1 << (n - 1).bit_length()
    wet = np.fft.irfft(np.fft.rfft(clip, size) * np.fft.rfft(rir, size), size)[: clip.size]
    peak_in, peak_out = np.max(np.abs(clip)), np.max(np.abs(wet))
    if peak_in > 0 and peak_out > 0:
        wet = wet * (peak_in / peak_out)
    return wet


def band_stop(clip, f_lo: float, f_hi: float, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Zero every FFT bin of the whole clip inside ``[f_lo, f_hi]``."""
    if not 0 < f_lo < f_hi < sample_rate / 2:
        raise AugmentError(f"InvalidBand: need 0 < f_lo < f_hi < {sample_rate / 2}")
    clip = np.asarray(clip, dtype=np.float64)
    if clip.size == 0:
        return clip.copy()
    spec = np.fft.rfft(clip)
    freqs = np.fft.rfftfreq(clip.size, 1.0 / sample_rate)
    spec[(freqs >= f_lo) & (freqs <= f_hi)] = 0.0
    return np.fft.irfft(spec, clip.size)


def tanh_distortion(clip, k: float) -> np.ndarray:
    """``tanh(k x) / tanh(k)``: odd, monotone, unity at full scale."""
    if k <= 0:
        raise AugmentError("NonPositiveDrive: drive must be positive")
    return np.tanh(k * np.asarray(clip, dtype=np.float64)) / np.tanh(k)


@dataclass
class AugmentPlan:
    seed: int = 0
    p_noise: float = 0.75
    p_pitch: float = 0.25
    p_rir: float = 0.50
    p_distortion: float = 0.0
    p_band_stop: float = 0.0
    noise_bank: list = field(default_factory=list)
    rir_bank: list = field(default_factory=list)
    snr_range: tuple = (5.0, 30.0)
    gain_range: tuple = (-6.0, 6.0)
    drive_range: tuple = (0.5, 3.0)
    band_width_range: tuple = (100.0, 1000.0)

    def __post_init__(self):
        for name in ("p_noise", "p_pitch", "p_rir", "p_distortion", "p_band_stop"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise AugmentError(f"{name} must lie in [0, 1]")
        if self.p_noise > 0 and not self.noise_bank:
            raise AugmentError("noise bank is empty but p_noise > 0")
        if self.p_rir > 0 and not self.rir_bank:
            raise AugmentError("RIR bank is empty but p_rir > 0")
        for name in ("snr_range", "gain_range", "drive_range", "band_width_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise AugmentError(f"{name} is reversed")


def augment_clip(clip, plan: AugmentPlan, index: int) -> tuple[np.ndarray, list[dict]]:
    """Apply the probabilistic chain noise -> (pitch) -> RIR -> distortion -> band-stop -> gain.

    Every coin and parameter is drawn whether or not its op fires, so the
    stream position of each draw is fixed. Pitch shifting is not implemented;
    its coin is drawn and recorded as skipped.
    """
    rng = SplitMix64.for_item(plan.seed, index)
    out = np.asarray(clip, dtype=np.float64).copy()
    ops: list[dict] = []

    coin, pick, snr = rng.random(), rng.random(), rng.uniform(*plan.snr_range)
    if coin < plan.p_noise:
        i = int(pick * len(plan.noise_bank))
        out = add_noise_snr(out, plan.noise_bank[i], snr)
        ops.append({"op": "noise", "bank_index": i, "snr_db": snr})

    if rng.random() < plan.p_pitch:
        ops.append({"op": "pitch_shift", "skipped": True})

    coin, pick = rng.random(), rng.random()
    if coin < plan.p_rir:
        i = int(pick * len(plan.rir_bank))
        out = convolve_rir(out, plan.rir_bank[i])
        ops.append({"op": "rir", "bank_index": i})

    coin, drive = rng.random(), rng.uniform(*plan.drive_range)
    if coin < plan.p_distortion:
        out = tanh_distortion(out, drive)
        ops.append({"op": "tanh_distortion", "drive": drive})

    coin, centre, width = rng.random(), rng.uniform(200.0, 7000.0), rng.uniform(*plan.band_width_range)
    if coin < plan.p_band_stop:
        lo, hi = max(centre - width / 2, 20.0), min(centre + width / 2, 7900.0)
        out = band_stop(out, lo, hi)
        ops.append({"op": "band_stop", "f_lo": lo, "f_hi": hi})

    db = rng.uniform(*plan.gain_range)
    out, n_clipped = apply_gain(out, db)
    ops.append({"op": "gain", "db": db, "clipped": n_clipped})
    return np.clip(out, -1.0, 1.0), ops


def ops_record(name: str, index: int, ops: list[dict]) -> str:
    """One JSON line describing the ops applied to an output clip."""
    return json.dumps({"output": name, "index": index, "ops": ops})
