"""Streaming wakeword detection with speaker authentication."""

from .audio_io import SAMPLE_RATE, read_wav, rms_normalize, vad_trim, write_wav
from .backbone import EmbedderSpec, embed, embed_batch, init_native_embedder, load_embedder
from .dsp import PIPELINE_MEL, SPEAKER_MEL, MelConfig, melspectrogram
from .evalkit import ScoreSet, eer, far, frr, sweep
from .pipeline import DetectionEvent, Engine, PipelineConfig
from .speaker_auth import (
    AuthConfig,
    ReferenceProfile,
    authenticate,
    cosine_similarity,
    enroll,
    init_native_encoder,
)
from .wakeword import FcnModel, GateAction, TrainConfig, fcn_forward, gate_update, init_fcn, train

__version__ = "0.1.0"
