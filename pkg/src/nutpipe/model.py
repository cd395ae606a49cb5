"""Pluggable trainable models and the nuts that drive them.

Any object with ``train_batch(batch) -> float`` and
``predict_batch(batch) -> class indices`` can be trained and evaluated
by a pipeline. :class:`ToyModel` is a small softmax regression used for
demos and tests.
"""

from __future__ import annotations

import struct
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .core import FlowError, Processor, Sink

__all__ = [
    "TrainableModel",
    "ToyModel",
    "softmax",
    "Train",
    "Predict",
    "Evaluate",
    "Network",
]


@runtime_checkable
class TrainableModel(Protocol):
    def train_batch(self, batch: Sequence[np.ndarray]) -> float: ...

    def predict_batch(self, batch: Sequence[np.ndarray]) -> np.ndarray: ...


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _features(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    flat = x.reshape(x.shape[0], -1)
    if np.issubdtype(flat.dtype, np.integer):
        return flat.astype(np.float64) / 255.0
    return flat.astype(np.float64, copy=False)


def _targets(y: np.ndarray, k: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim == 1:
        out = np.zeros((y.shape[0], k))
        out[np.arange(y.shape[0]), y.astype(np.int64)] = 1.0
        return out
    return y.astype(np.float64, copy=False)


class ToyModel:
    """Softmax regression trained with plain minibatch SGD.

    Weights are ``k x d`` and drawn uniformly from [-0.01, 0.01] with
    ``seed``; the bias starts at zero. Integer inputs (images) are scaled
    to [0, 1] before use; float inputs are taken as they are.
    """

    def __init__(self, k: int, d: int, lr: float = 0.1, seed: int = 0):
        if k < 2 or d < 1:
            raise ValueError(f"need k >= 2 classes and d >= 1 inputs, got k={k}, d={d}")
        if not lr >= 0:
            raise ValueError(f"learning rate must be non-negative, got {lr}")
        rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
        self.weights = rng.uniform(-0.01, 0.01, size=(k, d))
        self.bias = np.zeros(k)
        self.lr = lr

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def _inputs(self, batch) -> tuple[np.ndarray, np.ndarray]:
        if len(batch) < 2:
            raise ValueError("batch needs an input column and a target column")
        x = _features(batch[0])
        y = _targets(batch[1], self.k)
        if x.shape[1] != self.d:
            raise ValueError(f"batch inputs have {x.shape[1]} features, model expects {self.d}")
        if y.shape != (x.shape[0], self.k):
            raise ValueError(f"targets have shape {y.shape}, expected {(x.shape[0], self.k)}")
        return x, y

    def loss_and_grad(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Mean cross-entropy of ``softmax(x W^T + b)`` against ``y`` and its gradients."""
        n = x.shape[0]
        z = x @ self.weights.T + self.bias
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = -float(np.sum(y * logp)) / n
        g = (np.exp(logp) - y) / n
        return loss, g.T @ x, g.sum(axis=0)

    def train_batch(self, batch) -> float:
        """One SGD step; returns the loss before the step."""
        x, y = self._inputs(batch)
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad_w, grad_b = self.loss_and_grad(x, y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"training diverged: loss is {loss}")
        self.weights -= self.lr * grad_w
        self.bias -= self.lr * grad_b
        return loss

    def predict_proba(self, x) -> np.ndarray:
        return softmax(_features(x) @ self.weights.T + self.bias)

    def predict_batch(self, batch) -> np.ndarray:
        return np.argmax(self.predict_proba(batch[0]), axis=1)

    # model.bin: little-endian float64 values k, d, W (row-major), b
    def to_bytes(self) -> bytes:
        values = np.concatenate([[self.k, self.d], self.weights.ravel(), self.bias])
        return values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, lr: float = 0.1) -> ToyModel:
        if len(data) < 16 or len(data) % 8:
            raise ValueError("model file is truncated")
        k, d = (int(v) for v in struct.unpack("<2d", data[:16]))
        values = np.frombuffer(data, dtype="<f8", offset=16)
        if values.size != k * d + k:
            raise ValueError(f"model file holds {values.size} parameters, expected {k * d + k}")
        model = cls(k, d, lr)
        model.weights = values[: k * d].reshape(k, d).astype(np.float64)
        model.bias = values[k * d :].astype(np.float64)
        return model

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path, lr: float = 0.1) -> ToyModel:
        with open(path, "rb") as f:
            return cls.from_bytes(f.read(), lr)


class Train(Processor):
    """Train ``model`` on each batch pulled through; yields the batch losses."""

    def __init__(self, model: TrainableModel):
        self.model = model

    def process(self, iterable):
        for batch in iterable:
            yield float(self.model.train_batch(batch))

    def __repr__(self):
        return f"Train({type(self.model).__name__})"


class Predict(Processor):
    def __init__(self, model: TrainableModel):
        self.model = model

    def process(self, iterable):
        for batch in iterable:
            yield np.asarray(self.model.predict_batch(batch))

    def __repr__(self):
        return f"Predict({type(self.model).__name__})"


class Evaluate(Sink):
    """Accuracy of ``model`` over all batches: correct predictions / samples.

    Targets (column ``targetcol``) may be one-hot rows or class indices.
    """

    def __init__(self, model: TrainableModel, targetcol: int = 1):
        self.model = model
        self.targetcol = targetcol

    def consume(self, flow):
        correct = total = 0
        for batch in flow:
            predicted = np.asarray(self.model.predict_batch(batch))
            target = np.asarray(batch[self.targetcol])
            if target.ndim == 2:
                target = np.argmax(target, axis=1)
            correct += int(np.sum(predicted == target))
            total += len(target)
        if total == 0:
            raise FlowError(repr(self), "empty flow")
        return correct / total

    def __repr__(self):
        return f"Evaluate({type(self.model).__name__})"


class Network:
    """Wrap a trainable model so pipelines read ``batches >> network.train()``."""

    def __init__(self, model: TrainableModel):
        self.model = model

    def train(self) -> Train:
        return Train(self.model)

    def predict(self) -> Predict:
        return Predict(self.model)

    def evaluate(self, targetcol: int = 1) -> Evaluate:
        return Evaluate(self.model, targetcol)
