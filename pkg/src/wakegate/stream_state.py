"""Per-client ring buffers and counters shared by the pipeline stages."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientAudio, UnknownWakewordKey

log = logging.getLogger(__name__)

MEL_SAMPLES = 1760
PENDING_WARN_SAMPLES = 10 * 16000


class RingBuffer:
    """Fixed-capacity FIFO that overwrites its oldest elements.

    Elements may be scalars or fixed-shape arrays (``item_shape``).
    ``total`` counts every element ever pushed, so callers can address
    elements by absolute index.
    """

    def __init__(self, capacity: int, item_shape: tuple = (), dtype=np.float64):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.storage = np.zeros((capacity, *item_shape), dtype=dtype)
        self.write_pos = 0
        self.filled = 0
        self.total = 0

    def __len__(self) -> int:
        return self.filled

    def push(self, items) -> None:
        items = np.asarray(items, dtype=self.storage.dtype)
        k = len(items)
        if k == 0:
            return
        self.total += k
        if k >= self.capacity:
            self.storage[:] = items[-self.capacity :]
            self.write_pos = 0
            self.filled = self.capacity
            return
        end = self.write_pos + k
        if end <= self.capacity:
            self.storage[self.write_pos : end] = items
        else:
            split = self.capacity - self.write_pos
            self.storage[self.write_pos :] = items[:split]
            self.storage[: k - split] = items[split:]
        self.write_pos = end % self.capacity
        self.filled = min(self.filled + k, self.capacity)

    def latest(self, n: int) -> np.ndarray:
        """The most recent ``n`` elements, oldest first."""
        return self.span(self.total - n, self.total)

    def span(self, start: int, stop: int) -> np.ndarray:
        """Elements with absolute indices ``[start, stop)``, oldest first."""
        oldest = self.total - self.filled
        if start < oldest or stop > self.total or start > stop:
            raise IndexError(f"span [{start}, {stop}) outside retained [{oldest}, {self.total})")
        n = stop - start
        first = (self.write_pos - (self.total - start)) % self.capacity
        idx = (first + np.arange(n)) % self.capacity
        return self.storage[idx].copy()

    def contents(self) -> np.ndarray:
        return self.latest(self.filled)


@dataclass
class GateState:
    """Activation counter and cooldown for one client and wakeword."""

    wake_threshold: float = 0.5
    trigger_level: int = 4
    cooldown_frames: int = 20
    activations: int = 0
    cooldown_counter: int = 0


@dataclass
class ClientState:
    client_id: str
    audio_capacity: int = 48000
    mel_capacity: int = 512
    embedding_capacity: int = 64
    n_mels: int = 32
    emb_dim: int = 96
    mel_samples: int = MEL_SAMPLES

    def __post_init__(self):
        self.audio_ring = RingBuffer(self.audio_capacity)
        self.pending_audio = np.empty(0)
        self.mel_ring = RingBuffer(self.mel_capacity, (self.n_mels,))
        self.new_mels = 0
        self.embedding_rings: dict[str, RingBuffer] = {}
        # absolute mel-frame end index of the window behind each embedding
        self.embedding_ends: dict[str, RingBuffer] = {}
        self.new_embeddings: dict[str, int] = {}
        self.gates: dict[str, GateState] = {}
        self.chunks_taken = 0
        self.last_update = time.monotonic()
        self.lock = threading.Lock()

    def register_wakeword(self, ww_key: str, gate: GateState | None = None) -> None:
        self.embedding_rings[ww_key] = RingBuffer(self.embedding_capacity, (self.emb_dim,))
        self.embedding_ends[ww_key] = RingBuffer(self.embedding_capacity, dtype=np.int64)
        self.new_embeddings[ww_key] = 0
        self.gates[ww_key] = gate if gate is not None else GateState()

    # audio -------------------------------------------------------------

    def push_audio(self, samples) -> None:
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size == 0:
            return
        self.audio_ring.push(samples)
        self.pending_audio = np.concatenate([self.pending_audio, samples])
        if self.pending_audio.size > PENDING_WARN_SAMPLES:
            log.warning("client %s: %d samples pending", self.client_id, self.pending_audio.size)

    def take_mel_chunk(self) -> np.ndarray | None:
        """Remove and return the oldest ``mel_samples`` pending samples, if available."""
        if self.pending_audio.size < self.mel_samples:
            return None
        chunk = self.pending_audio[: self.mel_samples]
        self.pending_audio = self.pending_audio[self.mel_samples :]
        self.chunks_taken += 1
        return chunk

    def recent_audio(self, n: int, end: int | None = None) -> np.ndarray:
        """The ``n`` samples ending at absolute sample index ``end`` (default: newest)."""
        end = self.audio_ring.total if end is None else end
        try:
            return self.audio_ring.span(end - n, end)
        except IndexError:
            raise InsufficientAudio(
                f"need {n} samples ending at {end}, ring holds {self.audio_ring.filled}"
            ) from None

    # mels --------------------------------------------------------------

    def append_mels(self, frames) -> None:
        frames = np.asarray(frames, dtype=np.float64).reshape(-1, self.n_mels)
        if len(frames) == 0:
            return
        self.mel_ring.push(frames)
        self.new_mels = min(self.new_mels + len(frames), self.mel_ring.filled)
        self.last_update = time.monotonic()

    def take_embedding_window(self, emb_features: int = 76, emb_step: int = 8):
        """Next mel window for the embedder, or None.

        Windows end at absolute frames ``emb_features + j * emb_step``; each
        call advances by ``emb_step``. Pending steps whose window would reach
        back past the retained history are dropped first.

        Returns ``(frames, end_frame)``.
        """
        if not emb_features >= emb_step >= 1:
            raise ValueError("need emb_features >= emb_step >= 1")
        ring = self.mel_ring
        if ring.filled < emb_features:
            return None
        self.new_mels = min(self.new_mels, ring.filled - emb_features + emb_step)
        if self.new_mels < emb_step:
            return None
        end = ring.total - self.new_mels + emb_step
        window = ring.span(end - emb_features, end)
        self.new_mels -= emb_step
        return window, end

    # embeddings --------------------------------------------------------

    def append_embedding(self, ww_key: str, emb, end_frame: int = -1) -> None:
        if ww_key not in self.embedding_rings:
            raise UnknownWakewordKey(ww_key)
        ring = self.embedding_rings[ww_key]
        ring.push(np.asarray(emb, dtype=np.float64).reshape(1, self.emb_dim))
        self.embedding_ends[ww_key].push([end_frame])
        self.new_embeddings[ww_key] = min(self.new_embeddings[ww_key] + 1, ring.filled)
        self.last_update = time.monotonic()

    def take_classification_window(self, ww_key: str, ww_windows: int = 16):
        """Latest-unconsumed window of ``ww_windows`` embeddings, advancing by one.

        Returns ``(embeddings, end_frame)`` where ``end_frame`` is the mel
        frame end index behind the newest embedding in the window.
        """
        if ww_key not in self.embedding_rings:
            raise UnknownWakewordKey(ww_key)
        ring = self.embedding_rings[ww_key]
        if ring.filled < ww_windows:
            return None
        pending = min(self.new_embeddings[ww_key], ring.filled - ww_windows + 1)
        if pending < 1:
            self.new_embeddings[ww_key] = pending
            return None
        end = ring.total - pending + 1
        window = ring.span(end - ww_windows, end)
        end_frame = int(self.embedding_ends[ww_key].span(end - 1, end)[0])
        self.new_embeddings[ww_key] = pending - 1
        return window, end_frame
