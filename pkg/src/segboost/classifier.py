"""Trainable per-pixel softmax classifier with windowed features.

The pipeline only requires the probability-map contract, so any external
model can replace this one by shipping its output through
:func:`ingest_probmap`.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import DimensionError, ExtraChannels, LabelMap, ProbMap, RasterImage


class TrainingDivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 100
    batch: int = 0  # pixel samples per step; 0 means full batch
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")


@dataclass(frozen=True)
class ClassifierParams:
    """Weights of a linear or one-hidden-layer softmax model."""

    feature_dim: int
    n_classes: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None = None  # present iff a hidden layer is used
    b2: np.ndarray | None = None

    @property
    def hidden(self) -> int | None:
        return None if self.w2 is None else self.w1.shape[1]

    def arrays(self) -> list[np.ndarray]:
        out = [self.w1, self.b1]
        if self.w2 is not None:
            out += [self.w2, self.b2]
        return out


def init_params(
    feature_dim: int,
    n_classes: int,
    hidden: int | None = None,
    seed: int = 0,
    scale: float = 0.01,
) -> ClassifierParams:
    rng = np.random.default_rng(seed)
    if hidden is None:
        w1 = rng.normal(0.0, scale, size=(feature_dim, n_classes))
        return ClassifierParams(feature_dim, n_classes, w1, np.zeros(n_classes))
    w1 = rng.normal(0.0, scale, size=(feature_dim, hidden))
    w2 = rng.normal(0.0, scale, size=(hidden, n_classes))
    return ClassifierParams(feature_dim, n_classes, w1, np.zeros(hidden), w2, np.zeros(n_classes))


def _window_stats(channel: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard deviation over (2r+1)^2 windows, edge-clamped."""
    if radius == 0:
        return channel.copy(), np.zeros_like(channel)
    size = 2 * radius + 1
    padded = np.pad(channel, radius, mode="edge")

    def window_sum(arr: np.ndarray) -> np.ndarray:
        s = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.float64)
        np.cumsum(np.cumsum(arr, axis=0), axis=1, out=s[1:, 1:])
        return s[size:, size:] - s[:-size, size:] - s[size:, :-size] + s[:-size, :-size]

    count = float(size * size)
    mean = window_sum(padded) / count
    meansq = window_sum(padded * padded) / count
    var = np.maximum(meansq - mean * mean, 0.0)
    return mean, np.sqrt(var)


def extract_features(image: RasterImage, extra: ExtraChannels, window: int) -> np.ndarray:
    """Per-pixel feature rows: raw channels, rescaled shadow/elevation, then
    per-channel window mean and standard deviation.

    Returns an (h*w, channels + 2 + 2*channels) float64 array in row-major
    pixel order.
    """
    if (image.height, image.width) != (extra.height, extra.width):
        raise DimensionError("image and extra channels must share dimensions")
    if window < 0:
        raise DimensionError("window radius must be non-negative")
    h, w, c = image.data.shape
    cols = [image.data[:, :, ch].astype(np.float64) for ch in range(c)]
    cols.append((extra.shadow.astype(np.float64) + 1.0) / 2.0)
    cols.append(extra.elevation.astype(np.float64) / 2.0)
    means, stds = [], []
    for ch in range(c):
        mean, std = _window_stats(image.data[:, :, ch].astype(np.float64), window)
        means.append(mean)
        stds.append(std)
    cols.extend(means)
    cols.extend(stds)
    return np.stack([col.ravel() for col in cols], axis=1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(params: ClassifierParams, features: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    if params.w2 is None:
        return _softmax(features @ params.w1 + params.b1), None
    hidden = np.tanh(features @ params.w1 + params.b1)
    return _softmax(hidden @ params.w2 + params.b2), hidden


def loss_and_gradients(
    params: ClassifierParams, features: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy and its gradient w.r.t. every parameter array."""
    n = features.shape[0]
    probs, hidden = _forward(params, features)
    picked = probs[np.arange(n), targets]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    if params.w2 is None:
        return loss, [features.T @ dlogits, dlogits.sum(axis=0)]
    gw2 = hidden.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dhidden = (dlogits @ params.w2.T) * (1.0 - hidden * hidden)
    return loss, [features.T @ dhidden, dhidden.sum(axis=0), gw2, gb2]


def _mean_loss(params: ClassifierParams, features: np.ndarray, targets: np.ndarray) -> float:
    probs, _ = _forward(params, features)
    picked = probs[np.arange(features.shape[0]), targets]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def train(
    params: ClassifierParams,
    samples: Sequence[tuple[np.ndarray, LabelMap]],
    cfg: TrainingConfig,
) -> tuple[ClassifierParams, list[float]]:
    """Adam on mean cross-entropy; returns updated params and per-epoch loss.

    Deterministic for a fixed seed (the per-epoch shuffle is the only use of
    randomness). Raises :class:`TrainingDivergenceError` naming the epoch if
    the loss turns non-finite.
    """
    if not samples:
        raise ValueError("at least one training sample is required")
    features = np.concatenate([f for f, _ in samples], axis=0)
    targets = np.concatenate([lm.labels.ravel() for _, lm in samples])
    if features.shape[1] != params.feature_dim:
        raise DimensionError(
            f"features have dim {features.shape[1]}, classifier expects {params.feature_dim}"
        )
    if cfg.epochs == 0:
        return params, []

    rng = np.random.default_rng(cfg.seed)
    arrays = [a.copy() for a in params.arrays()]
    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    t = 0
    n = features.shape[0]
    batch = cfg.batch if 0 < cfg.batch < n else n
    history: list[float] = []

    def rebuild() -> ClassifierParams:
        if params.w2 is None:
            return replace(params, w1=arrays[0], b1=arrays[1])
        return replace(params, w1=arrays[0], b1=arrays[1], w2=arrays[2], b2=arrays[3])

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            idx = perm[start : start + batch]
            _, grads = loss_and_gradients(rebuild(), features[idx], targets[idx])
            t += 1
            for i, g in enumerate(grads):
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g
                mhat = m[i] / (1.0 - cfg.adam_beta1**t)
                vhat = v[i] / (1.0 - cfg.adam_beta2**t)
                arrays[i] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.adam_eps)
        loss = _mean_loss(rebuild(), features, targets)
        if not np.isfinite(loss) or not all(np.isfinite(a).all() for a in arrays):
            raise TrainingDivergenceError(f"non-finite loss at epoch {epoch}")
        history.append(loss)
    return rebuild(), history


def predict(
    params: ClassifierParams, image: RasterImage, extra: ExtraChannels, window: int
) -> ProbMap:
    """Softmax probability map for every pixel."""
    features = extract_features(image, extra, window)
    if features.shape[1] != params.feature_dim:
        raise DimensionError(
            f"features have dim {features.shape[1]}, classifier expects {params.feature_dim}"
        )
    probs, _ = _forward(params, features)
    return ProbMap(probs=probs.reshape(image.height, image.width, params.n_classes))


def save_params(path, params: ClassifierParams) -> None:
    arrays = {"w1": params.w1, "b1": params.b1}
    if params.w2 is not None:
        arrays["w2"] = params.w2
        arrays["b2"] = params.b2
    np.savez(path, feature_dim=params.feature_dim, n_classes=params.n_classes, **arrays)


def load_params(path) -> ClassifierParams:
    with np.load(path) as data:
        w2 = data["w2"] if "w2" in data else None
        b2 = data["b2"] if "b2" in data else None
        return ClassifierParams(
            feature_dim=int(data["feature_dim"]),
            n_classes=int(data["n_classes"]),
            w1=data["w1"],
            b1=data["b1"],
            w2=w2,
            b2=b2,
        )


def ingest_probmap(path) -> ProbMap:
    """Load an externally produced probability map from a tensor file.

    Rows whose sum drifts from 1 by at most 1e-3 are renormalized; anything
    worse is rejected.
    """
    from .io import FormatError, read_tensor

    arr = read_tensor(path)
    if arr.ndim != 3:
        raise FormatError(f"probability tensor must be 3-d, got {arr.ndim}-d")
    probs = arr.astype(np.float64)
    if probs.min() < 0.0:
        raise FormatError("probability tensor contains negative entries")
    sums = probs.sum(axis=2)
    if np.abs(sums - 1.0).max() > 1e-3:
        worst = float(np.abs(sums - 1.0).max())
        raise FormatError(f"rows deviate from unit sum by {worst:.4g} (tolerance 1e-3)")
    return ProbMap(probs=probs / sums[:, :, None])
