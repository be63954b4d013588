"""Flat application configuration: JSON file plus ``key=value`` overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .audio_io import VadParams
from .dsp import MelConfig
from .errors import WakegateError
from .pipeline import PipelineConfig
from .speaker_auth import AuthConfig
from .wakeword import TrainConfig


class ConfigError(WakegateError, ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    # streaming pipeline
    mel_samples: int = 1760
    emb_features: int = 76
    emb_step: int = 8
    ww_windows: int = 16
    hidden_dim: int = 128
    wake_threshold: float = 0.5
    trigger_level: int = 4
    cooldown_frames: int = 20
    audio_capacity: int = 48000
    mel_capacity: int = 512
    embedding_capacity: int = 64
    max_lag_chunks: int = 4
    # mel front-end
    mel_win_len: int = 400
    mel_hop: int = 160
    mel_fft_size: int = 512
    mel_f_min: float = 60.0
    mel_f_max: float = 3800.0
    # speaker authentication
    approach: str = "B"
    auth_threshold: float = 0.5
    a_num_frames: int = 50
    a_required_samples: int = 27136
    b_chunk_samples: int = 4000
    # models
    model_path: str | None = None
    profile_path: str | None = None
    embedder_path: str | None = None
    backbone_seed: int = 42
    encoder_seed: int = 7
    # training
    learning_rate: float = 1e-3
    micro_batch: int = 32
    accum_steps: int = 4
    epochs: int = 50
    train_seed: int = 0
    # preprocessing
    normalize_dbfs: float = -20.0
    vad_frame_len: int = 400
    vad_hop: int = 160
    vad_energy_floor_db: float = 10.0
    vad_min_speech_frames: int = 3
    vad_hangover_frames: int = 5
    # augmentation
    augment_seed: int = 0
    p_noise: float = 0.75
    p_pitch: float = 0.25
    p_rir: float = 0.5
    p_distortion: float = 0.0
    p_band_stop: float = 0.0
    snr_min: float = 5.0
    snr_max: float = 30.0
    gain_min: float = -6.0
    gain_max: float = 6.0
    noise_dir: str | None = None
    rir_dir: str | None = None
    multiplier: int = 1

    def __post_init__(self):
        # build every derived config once so bad values fail at load time
        try:
            self.pipeline_config()
            self.train_config()
            self.vad_params()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.multiplier < 1:
            raise ConfigError("multiplier must be >= 1")

    @classmethod
    def from_dict(cls, values: dict) -> "AppConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        clean = {}
        for key, value in values.items():
            clean[key] = _coerce(key, known[key].type, value)
        return cls(**clean)

    @classmethod
    def load(cls, path=None, overrides=()) -> "AppConfig":
        values = {}
        if path is not None:
            try:
                values = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(values, dict):
                raise ConfigError("config file must hold a JSON object")
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            try:
                values[key.strip()] = json.loads(raw)
            except json.JSONDecodeError:
                values[key.strip()] = raw
        return cls.from_dict(values)

    def to_dict(self) -> dict:
        return asdict(self)

    def mel_config(self) -> MelConfig:
        return MelConfig(16000, self.mel_win_len, self.mel_hop, self.mel_fft_size, 32,
                         self.mel_f_min, self.mel_f_max)

    def auth_config(self) -> AuthConfig:
        return AuthConfig(self.approach, self.auth_threshold, self.wake_threshold,
                          self.a_num_frames, self.a_required_samples, self.b_chunk_samples)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(self.mel_samples, self.emb_features, self.emb_step, self.ww_windows,
                              self.wake_threshold, self.trigger_level, self.cooldown_frames,
                              self.auth_config(), self.mel_config(), self.audio_capacity,
                              self.mel_capacity, self.embedding_capacity, self.max_lag_chunks)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.micro_batch, self.accum_steps, self.epochs,
                           self.train_seed)

    def vad_params(self) -> VadParams:
        return VadParams(self.vad_frame_len, self.vad_hop, self.vad_energy_floor_db,
                         self.vad_min_speech_frames, self.vad_hangover_frames)


def _coerce(key: str, type_name, value):
    name = type_name if isinstance(type_name, str) else getattr(type_name, "__name__", str(type_name))
    optional = "None" in name
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{key} cannot be null")
    if name.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if name.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if name.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    return value
