"""Fully-connected wakeword classifier and the activation/cooldown gate."""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyBatch, ModelFormatError, ShapeMismatch, SingleClassData
from .stream_state import GateState

log = logging.getLogger(__name__)

EMB_DIM = 96
WGFC_MAGIC = b"WGFC"
P_CLAMP = 1e-7


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class FcnModel:
    """One hidden ReLU layer: ``sigmoid(W2 @ relu(W1 @ x + b1) + b2)``."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    ww_windows: int = 16
    emb_dim: int = EMB_DIM

    @property
    def input_dim(self) -> int:
        return self.ww_windows * self.emb_dim

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": np.float64(self.b2)}

    def with_params(self, **params) -> "FcnModel":
        if "b2" in params:
            params["b2"] = float(params["b2"])
        return replace(self, **params)

    def predict(self, window) -> float:
        return fcn_forward(self, window)


def init_fcn(ww_windows: int = 16, hidden_dim: int = 128, seed: int = 0, emb_dim: int = EMB_DIM) -> FcnModel:
    """He-initialised hidden layer, small output layer, zero biases."""
    rng = np.random.default_rng(seed)
    d = ww_windows * emb_dim
    W1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(hidden_dim, d))
    W2 = rng.normal(0.0, np.sqrt(1.0 / hidden_dim), size=(1, hidden_dim))
    return FcnModel(W1, np.zeros(hidden_dim), W2, 0.0, ww_windows, emb_dim)


def _flatten(model: FcnModel, windows) -> np.ndarray:
    x = np.asarray(windows, dtype=np.float64)
    d = model.input_dim
    if x.size % d or (x.ndim >= 2 and x.shape[-1] != model.emb_dim and x.shape[-1] != d):
        raise ShapeMismatch(f"input shape {x.shape} incompatible with model input {d}")
    return x.reshape(-1, d)


def _forward(model: FcnModel, X: np.ndarray):
    pre = X @ model.W1.T + model.b1
    h = np.maximum(pre, 0.0)
    logits = h @ model.W2[0] + model.b2
    return pre, h, _sigmoid(logits)


def fcn_forward(model: FcnModel, window) -> float:
    """Wakeword probability for one ``[ww_windows, emb_dim]`` window."""
    X = _flatten(model, window)
    if len(X) != 1:
        raise ShapeMismatch(f"expected one window, got {len(X)}")
    return float(_forward(model, X)[2][0])


def fcn_predict_batch(model: FcnModel, windows) -> np.ndarray:
    return _forward(model, _flatten(model, windows))[2]


def _sum_loss_and_grad(model: FcnModel, X: np.ndarray, y: np.ndarray):
    """Summed (not averaged) BCE and gradients over the rows of X."""
    pre, h, p = _forward(model, X)
    pc = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    loss = -np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    # d loss / d logit; zero where the clamp is active
    dz = np.where((p > P_CLAMP) & (p < 1.0 - P_CLAMP), p - y, 0.0)
    gW2 = (dz @ h)[None, :]
    gb2 = np.sum(dz)
    dh = np.outer(dz, model.W2[0]) * (pre > 0)
    gW1 = dh.T @ X
    gb1 = dh.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def fcn_loss_and_grad(model: FcnModel, windows, labels):
    """Mean binary cross-entropy and its analytic gradient.

    Returns ``(loss, grads)`` with ``grads`` keyed like :meth:`FcnModel.params`.
    """
    X = _flatten(model, windows)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(X) == 0:
        raise EmptyBatch("empty batch")
    if len(y) != len(X):
        raise ShapeMismatch(f"{len(X)} windows but {len(y)} labels")
    loss, grads = _sum_loss_and_grad(model, X, y)
    n = len(X)
    return loss / n, {k: g / n for k, g in grads.items()}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    micro_batch: int = 32
    accum_steps: int = 4
    epochs: int = 50
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if min(self.micro_batch, self.accum_steps, self.epochs) < 1:
            raise ValueError("micro_batch, accum_steps and epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def train(model: FcnModel, windows, labels, config: TrainConfig = TrainConfig()):
    """SGD with momentum and gradient accumulation.

    Each optimizer step sums per-item gradients over ``accum_steps``
    micro-batches and divides by the item count, so it equals one step on the
    union of those micro-batches. Returns the trained model and the full-data
    BCE after every epoch.
    """
    X = _flatten(model, windows)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(X) != len(y):
        raise ShapeMismatch(f"{len(X)} windows but {len(y)} labels")
    if len(np.unique(y)) < 2:
        raise SingleClassData("training data must contain both classes")

    rng = np.random.default_rng(config.seed)
    params = {k: np.array(v, dtype=np.float64) for k, v in model.params().items()}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    step_size = config.micro_batch * config.accum_steps
    trace = []
    current = model
    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), step_size):
            group = order[start : start + step_size]
            total = {k: np.zeros_like(v) for k, v in params.items()}
            for mb in range(0, len(group), config.micro_batch):
                idx = group[mb : mb + config.micro_batch]
                _, g = _sum_loss_and_grad(current, X[idx], y[idx])
                for k in total:
                    total[k] += g[k]
            for k in params:
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * total[k] / len(group)
                params[k] = params[k] + velocity[k]
            current = current.with_params(**params)
        loss, _ = _sum_loss_and_grad(current, X, y)
        trace.append(loss / len(X))
    return current, trace


# gate ------------------------------------------------------------------


class GateAction(enum.Enum):
    IDLE = "Idle"
    COOLDOWN_SKIP = "CooldownSkip"
    TRIGGERED = "Triggered"


def gate_update(state: GateState, p: float) -> GateAction:
    """Advance the activation/cooldown state machine by one classification."""
    if state.cooldown_counter > 0:
        state.cooldown_counter -= 1
        return GateAction.COOLDOWN_SKIP
    if p >= state.wake_threshold:
        state.activations += 1
        if state.activations >= state.trigger_level:
            state.activations = 0
            state.cooldown_counter = state.cooldown_frames
            return GateAction.TRIGGERED
        return GateAction.IDLE
    state.activations = max(0, state.activations - 1)
    return GateAction.IDLE


# persistence -----------------------------------------------------------


def save_fcn(model: FcnModel, path) -> None:
    if model.emb_dim != EMB_DIM:
        raise ModelFormatError(f"WGFC stores {EMB_DIM}-d embeddings only")
    parts = [struct.pack("<4sII", WGFC_MAGIC, model.ww_windows, model.hidden_dim)]
    for arr in (model.W1, model.b1, model.W2, np.array([model.b2])):
        parts.append(np.asarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_fcn(path) -> FcnModel:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != WGFC_MAGIC:
        raise ModelFormatError(f"{path}: bad WGFC magic")
    ww_windows, hidden = struct.unpack_from("<II", data, 4)
    d = ww_windows * EMB_DIM
    n = hidden * d + hidden + hidden + 1
    if ww_windows == 0 or hidden == 0 or len(data) != 12 + 4 * n:
        raise ModelFormatError(f"{path}: size does not match header ({ww_windows}, {hidden})")
    flat = np.frombuffer(data, dtype="<f4", offset=12).astype(np.float64)
    W1 = flat[: hidden * d].reshape(hidden, d)
    b1 = flat[hidden * d : hidden * d + hidden]
    W2 = flat[hidden * d + hidden : hidden * d + 2 * hidden].reshape(1, hidden)
    return FcnModel(W1, b1, W2, float(flat[-1]), ww_windows, EMB_DIM)
