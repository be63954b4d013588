"""Three-stage streaming orchestrator.

Stage 1 turns 1760-sample chunks into mel frames, stage 2 turns mel windows
into embeddings, stage 3 classifies embedding windows, runs the gate and, on
a trigger, authenticates the speaker. :meth:`Engine.step` runs the stages
inline on the calling thread; :meth:`Engine.run_stream` runs one thread per
stage. Both produce the same per-client events.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

import numpy as np

from . import dsp
from .backbone import EmbedderSpec, embed
from .errors import UnknownClient
from .speaker_auth import AuthConfig, ReferenceProfile, VoiceEncoderSpec, authenticate
from .stream_state import MEL_SAMPLES, ClientState, GateState
from .wakeword import GateAction, gate_update

log = logging.getLogger(__name__)

DEFAULT_WW = "default"


@dataclass(frozen=True)
class PipelineConfig:
    mel_samples: int = MEL_SAMPLES
    emb_features: int = 76
    emb_step: int = 8
    ww_windows: int = 16
    wake_threshold: float = 0.5
    trigger_level: int = 4
    cooldown_frames: int = 20
    auth: AuthConfig = field(default_factory=AuthConfig)
    mel: dsp.MelConfig = dsp.PIPELINE_MEL
    audio_capacity: int = 48000
    mel_capacity: int = 512
    embedding_capacity: int = 64
    # how many chunks stage 1 may run ahead of stage 3 in threaded mode
    max_lag_chunks: int = 4

    def __post_init__(self):
        counts = ("mel_samples", "emb_features", "emb_step", "ww_windows", "trigger_level",
                  "audio_capacity", "mel_capacity", "embedding_capacity", "max_lag_chunks")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.cooldown_frames < 0:
            raise ValueError("cooldown_frames must be >= 0")
        if not 0.0 <= self.wake_threshold <= 1.0:
            raise ValueError("wake_threshold must lie in [0, 1]")
        if self.emb_step > self.emb_features:
            raise ValueError("emb_step cannot exceed emb_features")
        if self.frames_per_chunk < 1:
            raise ValueError("mel_samples shorter than one mel window")
        if self.mel.n_mels != 32:
            raise ValueError("the backbone consumes 32-bin mel frames")
        lookback = self.auth.required_samples + (self.max_lag_chunks + 2) * self.mel_samples
        if lookback > self.audio_capacity:
            raise ValueError(f"audio_capacity {self.audio_capacity} cannot hold {lookback} samples of lookback")

    @property
    def approach(self) -> str:
        return self.auth.approach

    @property
    def frames_per_chunk(self) -> int:
        return self.mel.n_frames(self.mel_samples)

    def frames_for_classification(self, k: int = 1) -> int:
        """Mel frames needed before the ``k``-th classification can run."""
        return self.emb_features + (self.ww_windows - 1 + k - 1) * self.emb_step

    def samples_for_classification(self, k: int = 1) -> int:
        chunks = -(-self.frames_for_classification(k) // self.frames_per_chunk)
        return chunks * self.mel_samples


@dataclass(frozen=True)
class DetectionEvent:
    client_id: str
    audio_time: int
    probability: float
    similarity: float | None
    auth_success: bool
    approach: str
    reason: str = ""

    def to_json(self) -> str:
        record = {
            "client_id": self.client_id,
            "audio_time": self.audio_time,
            "probability": self.probability,
            "similarity": self.similarity,
            "auth_success": self.auth_success,
            "approach": self.approach,
        }
        if self.reason:
            record["reason"] = self.reason
        return json.dumps(record)

    @classmethod
    def from_json(cls, line: str) -> "DetectionEvent":
        d = json.loads(line)
        return cls(d["client_id"], int(d["audio_time"]), float(d["probability"]),
                   None if d["similarity"] is None else float(d["similarity"]),
                   bool(d["auth_success"]), d["approach"], d.get("reason", ""))


def emit_event_log(events: Iterable[DetectionEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_json() + "\n")
        fh.flush()


def read_event_log(path) -> list[DetectionEvent]:
    with open(path, encoding="utf-8") as fh:
        return [DetectionEvent.from_json(line) for line in fh if line.strip()]


def iter_blocks(samples, block: int = 1600):
    samples = np.asarray(samples, dtype=np.float64)
    for start in range(0, samples.size, block):
        yield samples[start : start + block]


def _as_scorer(model) -> Callable:
    return model.predict if hasattr(model, "predict") else model


class Engine:
    """Holds the models, configuration and per-client stream state.

    Args:
        config: stage parameters and thresholds.
        embedder: backbone turning ``[emb_features, 32]`` mel windows into 96-d vectors.
        wakewords: one scorer or a mapping of wakeword key to scorer. A scorer
            is an :class:`~wakegate.wakeword.FcnModel` or any callable mapping
            a ``[ww_windows, 96]`` window to a probability.
        profile, encoder: enrolled speaker and voice encoder used on triggers.
    """

    def __init__(self, config: PipelineConfig, embedder: EmbedderSpec, wakewords,
                 profile: ReferenceProfile | None = None, encoder: VoiceEncoderSpec | None = None):
        if embedder.emb_features != config.emb_features:
            raise ValueError(
                f"embedder expects {embedder.emb_features} frames, config says {config.emb_features}"
            )
        self.config = config
        self.embedder = embedder
        if not isinstance(wakewords, Mapping):
            wakewords = {DEFAULT_WW: wakewords}
        self.wakewords = {key: _as_scorer(m) for key, m in wakewords.items()}
        self.profile = profile
        self.encoder = encoder
        self.auth_config = replace(config.auth, wake_threshold=config.wake_threshold)
        self.clients: dict[str, ClientState] = {}
        self._registry_lock = threading.Lock()

    # client registry -----------------------------------------------------

    def register_client(self, client_id: str) -> ClientState:
        cfg = self.config
        with self._registry_lock:
            if client_id in self.clients:
                return self.clients[client_id]
            state = ClientState(client_id, cfg.audio_capacity, cfg.mel_capacity,
                                cfg.embedding_capacity, mel_samples=cfg.mel_samples)
            for key in self.wakewords:
                state.register_wakeword(key, GateState(cfg.wake_threshold, cfg.trigger_level,
                                                       cfg.cooldown_frames))
            self.clients[client_id] = state
            return state

    def client(self, client_id: str) -> ClientState:
        try:
            return self.clients[client_id]
        except KeyError:
            raise UnknownClient(client_id) from None

    # stages ----------------------------------------------------------------

    def _mel_stage(self, state: ClientState) -> int:
        produced = 0
        while (chunk := state.take_mel_chunk()) is not None:
            frames = dsp.melspectrogram(chunk, self.config.mel)
            state.append_mels(frames)
            produced += len(frames)
        return produced

    def _embedding_stage(self, state: ClientState) -> int:
        cfg = self.config
        produced = 0
        while (item := state.take_embedding_window(cfg.emb_features, cfg.emb_step)) is not None:
            window, end_frame = item
            emb = embed(self.embedder, window)
            for key in state.embedding_rings:
                state.append_embedding(key, emb, end_frame)
            produced += 1
        return produced

    def _trigger_end(self, end_frame: int) -> int:
        """Absolute sample index closing the chunk that produced frame ``end_frame - 1``."""
        chunk = (end_frame - 1) // self.config.frames_per_chunk
        return (chunk + 1) * self.config.mel_samples

    def _classification_stage(self, state: ClientState) -> list[DetectionEvent]:
        events = []
        for key, scorer in self.wakewords.items():
            gate = state.gates[key]
            while (item := state.take_classification_window(key, self.config.ww_windows)) is not None:
                window, end_frame = item
                p = float(scorer(window))
                if gate_update(gate, p) is GateAction.TRIGGERED:
                    events.append(self._on_trigger(state, p, self._trigger_end(end_frame)))
        return events

    def _on_trigger(self, state: ClientState, p: float, audio_time: int) -> DetectionEvent:
        approach = self.auth_config.approach
        if self.profile is None or (approach == "B" and self.encoder is None):
            return DetectionEvent(state.client_id, audio_time, p, None, False, approach,
                                  "no reference profile loaded")
        result = authenticate(self.profile, state, self.encoder, self.auth_config, end=audio_time)
        return DetectionEvent(state.client_id, audio_time, p, result.similarity, result.success,
                              result.approach, result.reason)

    def _drain(self, state: ClientState) -> list[DetectionEvent]:
        self._mel_stage(state)
        self._embedding_stage(state)
        return self._classification_stage(state)

    # single-threaded mode --------------------------------------------------

    def step(self, client_id: str, samples) -> list[DetectionEvent]:
        """Push ``samples`` for one client and run every stage until idle.

        Audio enters in pieces that never overfill the pending chunk, so the
        audio ring always holds the samples behind a trigger.
        """
        state = self.client(client_id)
        samples = np.asarray(samples, dtype=np.float64).reshape(-1)
        events = []
        with state.lock:
            pos = 0
            while pos < samples.size:
                room = self.config.mel_samples - state.pending_audio.size
                state.push_audio(samples[pos : pos + room])
                pos += room
                events.extend(self._drain(state))
        return events

    # threaded mode ---------------------------------------------------------

    def run_stream(self, sources: Mapping[str, Iterable], sink: Callable[[DetectionEvent], None]) -> None:
        """Run the three stages on separate threads until every source is exhausted.

        ``sources`` maps client ids to iterables of sample blocks (a 1-D array
        is split into blocks). ``sink`` receives each event from the
        classification thread, in audio-time order per client. The first error
        raised by a source, a stage or the sink stops all threads and is
        re-raised here.
        """
        _StreamRun(self, sources, sink).run()

    # per-clip scoring, gate bypassed ------------------------------------------

    def iter_clip_windows(self, samples, pad: bool = True):
        """Yield every ``[ww_windows, 96]`` classifier input of a standalone clip.

        With ``pad`` a clip holding at least one chunk but too short for a
        classification is left-padded with silence up to that length.
        """
        cfg = self.config
        samples = np.asarray(samples, dtype=np.float64).reshape(-1)
        need = cfg.samples_for_classification(1)
        if pad and cfg.mel_samples <= samples.size < need:
            samples = np.concatenate([np.zeros(need - samples.size), samples])
        state = ClientState("_clip", cfg.audio_capacity, cfg.mel_capacity,
                            cfg.embedding_capacity, mel_samples=cfg.mel_samples)
        state.register_wakeword(DEFAULT_WW)
        for start in range(0, samples.size - cfg.mel_samples + 1, cfg.mel_samples):
            state.push_audio(samples[start : start + cfg.mel_samples])
            self._mel_stage(state)
            self._embedding_stage(state)
            while (item := state.take_classification_window(DEFAULT_WW, cfg.ww_windows)) is not None:
                yield item[0]

    def clip_windows(self, samples, pad: bool = True) -> np.ndarray:
        windows = list(self.iter_clip_windows(samples, pad))
        if not windows:
            return np.empty((0, self.config.ww_windows, 96))
        return np.stack(windows)

    def clip_probabilities(self, samples, ww_key: str = DEFAULT_WW, pad: bool = True) -> np.ndarray:
        """Raw classifier probabilities for every window of a clip, gate bypassed."""
        scorer = self.wakewords[ww_key]
        return np.array([float(scorer(w)) for w in self.iter_clip_windows(samples, pad)])


@dataclass
class _Progress:
    mel: int = 0
    emb: int = 0
    cls: int = 0


class _StreamRun:
    def __init__(self, engine: Engine, sources, sink):
        self.engine = engine
        self.sink = sink
        self.sources = {}
        for cid, src in sources.items():
            if isinstance(src, np.ndarray):
                src = iter_blocks(src)
            self.sources[cid] = src
            engine.register_client(cid)
        self.progress = {cid: _Progress() for cid in self.sources}
        self.cv = threading.Condition()
        self.stop = False
        self.source_done = False
        self.embedding_done = False
        self.errors: list[BaseException] = []

    def run(self) -> None:
        workers = [threading.Thread(target=self._guard, args=(fn,), name=name, daemon=True)
                   for name, fn in (("mels_proc", self._preprocess),
                                    ("embeddings_proc", self._extract),
                                    ("ww_proc", self._classify))]
        for t in workers:
            t.start()
        for t in workers:
            t.join()
        if self.errors:
            raise self.errors[0]

    def _guard(self, fn) -> None:
        try:
            fn()
        except BaseException as exc:  # noqa: BLE001 - surfaced to the caller
            with self.cv:
                self.errors.append(exc)
                self.stop = True
                self.cv.notify_all()

    def _preprocess(self) -> None:
        iters = {cid: iter(src) for cid, src in self.sources.items()}
        while iters and not self.stop:
            for cid in list(iters):
                try:
                    block = next(iters[cid])
                except StopIteration:
                    del iters[cid]
                    continue
                self._feed(cid, np.asarray(block, dtype=np.float64).reshape(-1))
        with self.cv:
            self.source_done = True
            self.cv.notify_all()

    def _feed(self, cid: str, samples: np.ndarray) -> None:
        engine = self.engine
        state = engine.clients[cid]
        prog = self.progress[cid]
        max_lag = engine.config.max_lag_chunks
        pos = 0
        while pos < samples.size:
            with self.cv:
                self.cv.wait_for(lambda: self.stop or prog.mel - prog.cls < max_lag)
                if self.stop:
                    return
            with state.lock:
                room = engine.config.mel_samples - state.pending_audio.size
                state.push_audio(samples[pos : pos + room])
                pos += room
                chunks_before = state.chunks_taken
                engine._mel_stage(state)
                new_chunks = state.chunks_taken - chunks_before
            if new_chunks:
                with self.cv:
                    prog.mel += new_chunks
                    self.cv.notify_all()

    def _extract(self) -> None:
        while True:
            with self.cv:
                self.cv.wait_for(lambda: self.stop or self.source_done
                                 or any(p.mel > p.emb for p in self.progress.values()))
                if self.stop:
                    return
                work = [(cid, p.mel) for cid, p in self.progress.items() if p.mel > p.emb]
                if not work and self.source_done:
                    self.embedding_done = True
                    self.cv.notify_all()
                    return
            for cid, target in work:
                state = self.engine.clients[cid]
                with state.lock:
                    self.engine._embedding_stage(state)
                with self.cv:
                    self.progress[cid].emb = target
                    self.cv.notify_all()

    def _classify(self) -> None:
        while True:
            with self.cv:
                self.cv.wait_for(lambda: self.stop or self.embedding_done
                                 or any(p.emb > p.cls for p in self.progress.values()))
                if self.stop:
                    return
                work = [(cid, p.emb) for cid, p in self.progress.items() if p.emb > p.cls]
                if not work and self.embedding_done:
                    return
            for cid, target in work:
                state = self.engine.clients[cid]
                with state.lock:
                    events = self.engine._classification_stage(state)
                for ev in events:
                    self.sink(ev)
                with self.cv:
                    self.progress[cid].cls = target
                    self.cv.notify_all()
