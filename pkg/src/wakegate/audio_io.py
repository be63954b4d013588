"""WAV I/O, amplitude normalization and energy-based VAD.

Clips are 1-D float64 numpy arrays with samples in [-1, 1] at 16 kHz.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NotWav, SilentInput, TruncatedFile, UnsupportedFormat

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000
_FULL_SCALE = 32768.0


def to_int16(clip: np.ndarray) -> np.ndarray:
    """Quantize float samples to int16, clamping the +1.0 edge to 32767."""
    q = np.round(np.asarray(clip, dtype=np.float64) * _FULL_SCALE)
    return np.clip(q, -32768, 32767).astype("<i2")


def from_int16(ints: np.ndarray) -> np.ndarray:
    return np.asarray(ints, dtype=np.float64) / _FULL_SCALE


def quantize(clip: np.ndarray) -> np.ndarray:
    """Round-trip through 16-bit PCM without touching disk."""
    return from_int16(to_int16(clip))


def read_wav(path) -> np.ndarray:
    """Read a 16 kHz mono PCM-16 WAV file into float samples.

    Raises:
        NotWav: missing RIFF/WAVE magic.
        UnsupportedFormat: anything other than mono 16-bit PCM at 16 kHz.
        TruncatedFile: header or data chunk cut short.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise NotWav(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise TruncatedFile(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif cid == b"data":
            if len(body) < size:
                raise TruncatedFile(f"{path}: data chunk declares {size} bytes, found {len(body)}")
            pcm = body
            break
        pos += 8 + size + (size & 1)

    if fmt is None:
        raise TruncatedFile(f"{path}: no fmt chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != 1 or bits != 16:
        raise UnsupportedFormat(f"{path}: need PCM 16-bit, got format tag {tag}, {bits} bits")
    if channels != 1:
        raise UnsupportedFormat(f"{path}: need mono, got {channels} channels")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"{path}: need {SAMPLE_RATE} Hz, got {rate} Hz")
    if pcm is None:
        raise TruncatedFile(f"{path}: no data chunk")
    if len(pcm) % 2:
        raise TruncatedFile(f"{path}: odd byte count in 16-bit data")
    return from_int16(np.frombuffer(pcm, dtype="<i2"))


def wav_bytes(clip: np.ndarray, sample_rate: int = SAMPLE_RATE) -> bytes:
    pcm = to_int16(clip).tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, 1, 1, sample_rate, sample_rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def write_wav(clip: np.ndarray, path) -> None:
    """Write ``clip`` as mono PCM-16 at 16 kHz."""
    Path(path).write_bytes(wav_bytes(clip))


def rms(clip: np.ndarray) -> float:
    clip = np.asarray(clip, dtype=np.float64)
    if clip.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(clip * clip)))


def rms_normalize(clip: np.ndarray, target_dbfs: float = -20.0) -> tuple[np.ndarray, int]:
    """Scale ``clip`` so its RMS sits at ``target_dbfs``.

    Returns the scaled clip and the number of samples that had to be
    hard-clipped to [-1, 1] after the gain.
    """
    level = rms(clip)
    if level <= 1e-8:
        raise SilentInput("cannot normalize a silent clip")
    gain = 10.0 ** (target_dbfs / 20.0) / level
    out = np.asarray(clip, dtype=np.float64) * gain
    n_clipped = int(np.count_nonzero(np.abs(out) > 1.0))
    if n_clipped:
        log.warning("rms_normalize clipped %d samples", n_clipped)
        out = np.clip(out, -1.0, 1.0)
    return out, n_clipped


@dataclass(frozen=True)
class VadParams:
    frame_len: int = 400
    hop: int = 160
    energy_floor_db: float = 10.0
    min_speech_frames: int = 3
    hangover_frames: int = 5
    # the noise floor estimate never sits above this level, so clips with no
    # quiet frames at all (a steady tone) still register as speech
    abs_floor_db: float = -60.0

    def __post_init__(self):
        if self.frame_len <= 0 or self.hop <= 0:
            raise ValueError("frame_len and hop must be positive")
        if self.min_speech_frames < 1:
            raise ValueError("min_speech_frames must be >= 1")


def frame_energies_db(clip: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    clip = np.asarray(clip, dtype=np.float64)
    if clip.size < frame_len:
        return np.empty(0)
    n_frames = (clip.size - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    power = np.mean(clip[idx] ** 2, axis=1)
    return 10.0 * np.log10(power + 1e-12)


def speech_frames(energies: np.ndarray, params: VadParams) -> np.ndarray:
    """Boolean mask of frames kept as speech (before hangover)."""
    if energies.size == 0:
        return np.zeros(0, dtype=bool)
    floor = min(float(np.percentile(energies, 10)), params.abs_floor_db)
    active = energies >= floor + params.energy_floor_db
    # drop bursts shorter than min_speech_frames
    keep = np.zeros_like(active)
    start = None
    for i, flag in enumerate(np.append(active, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= params.min_speech_frames:
                keep[start:i] = True
            start = None
    return keep


def vad_trim(clip: np.ndarray, params: VadParams = VadParams()) -> tuple[np.ndarray, bool]:
    """Cut leading and trailing silence.

    Returns the trimmed sub-clip and whether any speech was found. The end is
    extended by ``hangover_frames`` hops past the last speech frame.
    """
    clip = np.asarray(clip, dtype=np.float64)
    mask = speech_frames(frame_energies_db(clip, params.frame_len, params.hop), params)
    if not mask.any():
        return clip[:0].copy(), False
    frames = np.flatnonzero(mask)
    start = int(frames[0]) * params.hop
    end = int(frames[-1]) * params.hop + params.frame_len + params.hangover_frames * params.hop
    return clip[start : min(end, clip.size)].copy(), True
