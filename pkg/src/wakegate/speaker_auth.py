"""Speaker enrollment and verification by cosine similarity.

Approach A averages the first 50 frames of a 96-bin power mel spectrogram
(window 2048, hop 512) and gates on both the auth and wake thresholds.
Approach B encodes the last 4000 samples into a 256-d unit vector.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .errors import (
    DegenerateAudio,
    DimMismatch,
    EmptyEnrollment,
    InsufficientAudio,
    ModelFormatError,
    WrongChunkSize,
    ZeroVector,
)
from .rng import uniform_array

log = logging.getLogger(__name__)

DIM_A = 96
DIM_B = 256
STATS_DIM = 128
WGSP_MAGIC = b"WGSP"


@dataclass(frozen=True)
class AuthConfig:
    approach: str = "B"
    auth_threshold: float = 0.5
    wake_threshold: float = 0.5
    a_num_frames: int = 50
    a_required_samples: int = 27136
    b_chunk_samples: int = 4000

    def __post_init__(self):
        if self.approach not in ("A", "B"):
            raise ValueError(f"approach must be 'A' or 'B', got {self.approach!r}")
        for name in ("auth_threshold", "wake_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if dsp.SPEAKER_MEL.n_frames(self.a_required_samples) < self.a_num_frames:
            raise ValueError("a_required_samples too short for a_num_frames")

    @property
    def required_samples(self) -> int:
        return self.a_required_samples if self.approach == "A" else self.b_chunk_samples


@dataclass(frozen=True, eq=False)
class VoiceEncoderSpec:
    kind: str
    P: np.ndarray
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class ReferenceProfile:
    ref_a: np.ndarray
    ref_b: np.ndarray
    enrolled_clips: int


@dataclass(frozen=True)
class AuthResult:
    success: bool
    similarity: float | None
    approach: str
    reason: str = ""


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimMismatch(f"dimension mismatch {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def approach_a_embedding(audio, num_frames: int = 50, required_samples: int = 27136) -> np.ndarray:
    """Per-bin mean of the first ``num_frames`` 96-bin power-mel frames."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size < required_samples:
        raise InsufficientAudio(f"approach A needs {required_samples} samples, got {audio.size}")
    mels = dsp.mel_power(audio, dsp.SPEAKER_MEL)
    return mels[:num_frames].mean(axis=0)


def init_native_encoder(seed: int) -> VoiceEncoderSpec:
    P = uniform_array(seed, DIM_B * STATS_DIM).reshape(DIM_B, STATS_DIM)
    P.setflags(write=False)
    return VoiceEncoderSpec("native_standin", P, seed)


def speaker_stats(audio) -> np.ndarray:
    """128-d summary of 32-bin log-mel frames: mean, std, delta mean, delta std."""
    mels = dsp.melspectrogram(audio, dsp.PIPELINE_MEL)
    delta = np.diff(mels, axis=0)
    return np.concatenate([mels.mean(0), mels.std(0), delta.mean(0), delta.std(0)])


def encode_speaker_256(spec: VoiceEncoderSpec, audio, chunk_samples: int = 4000) -> np.ndarray:
    """Unit-norm 256-d speaker vector ``P @ stats / ||P @ stats||``."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.size != chunk_samples:
        raise WrongChunkSize(f"encoder expects {chunk_samples} samples, got {audio.size}")
    stats = speaker_stats(audio)
    if not np.any(stats):
        raise DegenerateAudio("speaker statistics are all zero")
    y = spec.P @ stats
    norm = np.linalg.norm(y)
    if norm == 0.0:
        raise DegenerateAudio("projected speaker vector is zero")
    return y / norm


def _left_pad(audio: np.ndarray, n: int) -> np.ndarray:
    if audio.size >= n:
        return audio
    return np.concatenate([np.zeros(n - audio.size), audio])


def enroll(clips, encoder: VoiceEncoderSpec, config: AuthConfig = AuthConfig()) -> ReferenceProfile:
    """Build the reference profile from one or more enrollment clips.

    Every clip must be long enough for the configured approach. The other
    approach's reference is still filled in, left-padding short clips with
    silence.
    """
    clips = [np.asarray(c, dtype=np.float64) for c in clips]
    if not clips:
        raise EmptyEnrollment("no enrollment clips")
    embs_a, embs_b = [], []
    for i, clip in enumerate(clips):
        if clip.size < config.required_samples:
            raise InsufficientAudio(
                f"clip {i}: approach {config.approach} needs {config.required_samples} samples, got {clip.size}"
            )
        padded = _left_pad(clip, config.a_required_samples)
        embs_a.append(approach_a_embedding(padded[-config.a_required_samples :], config.a_num_frames, config.a_required_samples))
        tail = _left_pad(clip, config.b_chunk_samples)[-config.b_chunk_samples :]
        embs_b.append(encode_speaker_256(encoder, tail, config.b_chunk_samples))
    # sort so the mean is bitwise independent of clip order
    ref_a = _ordered_mean(embs_a)
    ref_b = _ordered_mean(embs_b)
    norm = np.linalg.norm(ref_b)
    if abs(norm - 1.0) > 1e-12:
        ref_b = ref_b / norm
    return ReferenceProfile(ref_a, ref_b, len(clips))


def _ordered_mean(vectors) -> np.ndarray:
    stacked = np.stack(vectors)
    order = np.lexsort(stacked.T[::-1])
    return stacked[order].sum(axis=0) / len(vectors)


def authenticate(profile: ReferenceProfile, audio_source, encoder: VoiceEncoderSpec,
                 config: AuthConfig, end: int | None = None) -> AuthResult:
    """Verify the speaker behind the most recent audio.

    ``audio_source`` is a :class:`~wakegate.stream_state.ClientState` (audio is
    read from its ring, ending at absolute sample ``end``) or a plain array
    whose tail is used. Missing audio yields an unsuccessful result, never an
    exception.
    """
    n = config.required_samples
    try:
        if hasattr(audio_source, "recent_audio"):
            audio = audio_source.recent_audio(n, end)
        else:
            audio = np.asarray(audio_source, dtype=np.float64)
            if audio.size < n:
                raise InsufficientAudio(f"need {n} samples, got {audio.size}")
            audio = audio[-n:]
        if config.approach == "A":
            emb = approach_a_embedding(audio, config.a_num_frames, n)
            sim = cosine_similarity(emb, profile.ref_a)
            ok = sim >= max(config.auth_threshold, config.wake_threshold)
        else:
            emb = encode_speaker_256(encoder, audio, n)
            sim = cosine_similarity(emb, profile.ref_b)
            ok = sim >= config.auth_threshold
    except (InsufficientAudio, DegenerateAudio, ZeroVector) as exc:
        log.info("auth not attempted: %s", exc)
        return AuthResult(False, None, config.approach, f"{type(exc).__name__}: {exc}")
    if ok:
        log.info("Auth Success (similarity %.4f)", sim)
        return AuthResult(True, sim, config.approach)
    log.info("Auth Failed (similarity %.4f)", sim)
    return AuthResult(False, sim, config.approach, "similarity below threshold")


def save_profile(profile: ReferenceProfile, path) -> None:
    payload = struct.pack("<4sII", WGSP_MAGIC, DIM_A, DIM_B)
    payload += np.asarray(profile.ref_a, dtype="<f4").tobytes()
    payload += np.asarray(profile.ref_b, dtype="<f4").tobytes()
    payload += struct.pack("<I", profile.enrolled_clips)
    Path(path).write_bytes(payload)


def load_profile(path) -> ReferenceProfile:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != WGSP_MAGIC:
        raise ModelFormatError(f"{path}: bad WGSP magic")
    dim_a, dim_b = struct.unpack_from("<II", data, 4)
    if (dim_a, dim_b) != (DIM_A, DIM_B) or len(data) != 12 + 4 * (dim_a + dim_b) + 4:
        raise ModelFormatError(f"{path}: unexpected dimensions or size")
    flat = np.frombuffer(data, dtype="<f4", count=dim_a + dim_b, offset=12).astype(np.float64)
    (clips,) = struct.unpack_from("<I", data, 12 + 4 * (dim_a + dim_b))
    return ReferenceProfile(flat[:dim_a], flat[dim_a:], clips)
