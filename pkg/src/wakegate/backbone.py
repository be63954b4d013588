"""Mel-window to 96-d embedding backbone.

The native stand-in is a fixed random projection followed by tanh, with
weights drawn from SplitMix64 so any implementation can regenerate them.
Real backbones can be loaded from WGEM files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, ShapeMismatch
from .rng import uniform_array

EMB_DIM = 96
N_MELS = 32
WGEM_MAGIC = b"WGEM"


@dataclass(frozen=True, eq=False)
class EmbedderSpec:
    kind: str
    W: np.ndarray
    b: np.ndarray
    seed: int | None = None

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def emb_features(self) -> int:
        return self.input_dim // N_MELS

    def embed(self, window: np.ndarray) -> np.ndarray:
        return embed(self, window)


def init_native_embedder(seed: int, emb_features: int = 76) -> EmbedderSpec:
    """Stand-in backbone: W (row-major) then b, all uniform(-1, 1) from SplitMix64(seed)."""
    d = emb_features * N_MELS
    values = uniform_array(seed, EMB_DIM * d + EMB_DIM)
    W = values[: EMB_DIM * d].reshape(EMB_DIM, d)
    b = values[EMB_DIM * d :]
    W.setflags(write=False)
    b.setflags(write=False)
    return EmbedderSpec("native_standin", W, b, seed)


def embed(spec: EmbedderSpec, window: np.ndarray) -> np.ndarray:
    """``tanh(W @ flatten(window) / sqrt(D) + b)``."""
    x = np.asarray(window, dtype=np.float64)
    if x.size != spec.input_dim or (x.ndim == 2 and x.shape[1] != N_MELS):
        raise ShapeMismatch(
            f"window shape {x.shape} does not match backbone ({spec.emb_features}, {N_MELS})"
        )
    return np.tanh(spec.W @ x.reshape(-1) / np.sqrt(spec.input_dim) + spec.b)


def embed_batch(spec: EmbedderSpec, windows) -> np.ndarray:
    """Embed each window independently; exactly equal to mapping :func:`embed`."""
    out = [embed(spec, w) for w in windows]
    if not out:
        return np.empty((0, EMB_DIM))
    return np.stack(out)


def save_embedder(spec: EmbedderSpec, path) -> None:
    rows, cols = spec.W.shape
    payload = struct.pack("<4sII", WGEM_MAGIC, rows, cols)
    payload += np.asarray(spec.W, dtype="<f4").tobytes() + np.asarray(spec.b, dtype="<f4").tobytes()
    Path(path).write_bytes(payload)


def load_embedder(path) -> EmbedderSpec:
    """Load a WGEM file: magic, u32 rows, u32 cols, f32 W (row-major), f32 b."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != WGEM_MAGIC:
        raise ModelFormatError(f"{path}: bad WGEM magic")
    rows, cols = struct.unpack_from("<II", data, 4)
    if rows != EMB_DIM or cols % N_MELS or cols == 0:
        raise ModelFormatError(f"{path}: unsupported shape {rows}x{cols}")
    expected = 12 + 4 * (rows * cols + rows)
    if len(data) != expected:
        raise ModelFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f4", offset=12).astype(np.float64)
    W = flat[: rows * cols].reshape(rows, cols)
    b = flat[rows * cols :]
    W.setflags(write=False)
    b.setflags(write=False)
    return EmbedderSpec("external", W, b)
