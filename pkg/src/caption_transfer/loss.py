"""Multi-attribute regression losses with analytic gradients.

Per-head mean squared error, summed over the attribute heads and the
global head, optionally plus an unnormalized object-head term scaled by
``aesthetic_bias``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LossBatch:
    """Predictions and targets for one batch.

    ``attr_pred``/``attr_true`` are ``(m, N, d)``; the global and object
    heads are ``(N, d_global)`` and ``(N, d_object)``.
    """

    attr_pred: np.ndarray
    attr_true: np.ndarray
    global_pred: np.ndarray
    global_true: np.ndarray
    object_pred: Optional[np.ndarray] = None
    object_true: Optional[np.ndarray] = None
    aesthetic_bias: float = 0.0

    def __post_init__(self):
        for name in ("attr_pred", "attr_true", "global_pred", "global_true", "object_pred", "object_true"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=np.float64))
        if self.attr_pred.ndim != 3:
            raise ShapeError(f"attribute arrays must be (m, N, d), got {self.attr_pred.shape}")
        if self.attr_pred.shape != self.attr_true.shape:
            raise ShapeError(f"attribute shapes differ: {self.attr_pred.shape} vs {self.attr_true.shape}")
        if self.global_pred.shape != self.global_true.shape or self.global_pred.ndim != 2:
            raise ShapeError(f"global shapes differ or are not (N, d): {self.global_pred.shape} vs {self.global_true.shape}")
        m, n, _ = self.attr_pred.shape
        if m < 1 or n < 1:
            raise ShapeError("need m >= 1 and N >= 1")
        if self.global_pred.shape[0] != n:
            raise ShapeError("global head batch size differs from attribute heads")
        if (self.object_pred is None) != (self.object_true is None):
            raise ShapeError("object head needs both predictions and targets")
        if self.object_pred is not None:
            if self.object_pred.shape != self.object_true.shape or self.object_pred.ndim != 2:
                raise ShapeError(f"object shapes differ or are not (N, d): {self.object_pred.shape} vs {self.object_true.shape}")
            if self.object_pred.shape[0] != n:
                raise ShapeError("object head batch size differs from attribute heads")
        if not self.aesthetic_bias >= 0:
            raise ShapeError("aesthetic_bias must be >= 0")

    @property
    def n(self) -> int:
        return self.attr_pred.shape[1]

    @property
    def m(self) -> int:
        return self.attr_pred.shape[0]

    @property
    def has_object(self) -> bool:
        return self.object_pred is not None


def mse_half(pred: np.ndarray, true: np.ndarray) -> float:
    """(1/2N) * sum_i ||pred_i - true_i||^2 with N = pred.shape[0]."""
    if pred.shape != true.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {true.shape}")
    diff = pred - true
    return float(np.sum(diff * diff) / (2 * pred.shape[0]))


def attribute_loss(batch: LossBatch, j: int) -> float:
    return mse_half(batch.attr_pred[j], batch.attr_true[j])


def global_loss(batch: LossBatch) -> float:
    return mse_half(batch.global_pred, batch.global_true)


def object_loss(batch: LossBatch, normalized: bool = False) -> float:
    """``aesthetic_bias`` times the summed squared object-head error.

    No batch normalization unless ``normalized``, which applies 1/2N.
    """
    if not batch.has_object:
        raise ShapeError("batch has no object head")
    diff = batch.object_pred - batch.object_true
    sq = float(np.sum(diff * diff))
    if normalized:
        sq /= 2 * batch.n
    return batch.aesthetic_bias * sq


def attribute_losses(batch: LossBatch) -> np.ndarray:
    """All m attribute losses at once, shape ``(m,)``."""
    diff = batch.attr_pred - batch.attr_true
    return np.sum(diff * diff, axis=(1, 2)) / (2 * batch.n)


def base_loss(batch: LossBatch) -> float:
    """Attribute losses plus the global loss."""
    return float(np.sum(attribute_losses(batch))) + global_loss(batch)


def total_loss(batch: LossBatch, include_object: bool = False, normalized: bool = False) -> float:
    loss = base_loss(batch)
    if include_object:
        loss += object_loss(batch, normalized)
    return loss


@dataclass(frozen=True)
class Gradients:
    attr: np.ndarray
    global_: np.ndarray
    object: Optional[np.ndarray] = None

    def __add__(self, other: "Gradients") -> "Gradients":
        if (self.object is None) != (other.object is None):
            raise ShapeError("cannot add gradients with and without an object head")
        obj = None if self.object is None else self.object + other.object
        return Gradients(self.attr + other.attr, self.global_ + other.global_, obj)

    def max_abs(self) -> float:
        parts = [self.attr, self.global_] + ([self.object] if self.object is not None else [])
        return max(float(np.max(np.abs(p))) for p in parts)


def gradients(batch: LossBatch, include_object: bool = False, normalized: bool = False) -> Gradients:
    """d(total_loss)/d(predictions) for every head."""
    n = batch.n
    g_attr = (batch.attr_pred - batch.attr_true) / n
    g_global = (batch.global_pred - batch.global_true) / n
    g_obj = None
    if include_object:
        g_obj = object_gradient(batch, normalized)
    return Gradients(g_attr, g_global, g_obj)


def object_gradient(batch: LossBatch, normalized: bool = False) -> np.ndarray:
    if not batch.has_object:
        raise ShapeError("batch has no object head")
    scale = 1.0 / (2 * batch.n) if normalized else 1.0
    return 2.0 * batch.aesthetic_bias * scale * (batch.object_pred - batch.object_true)


# --- verification -----------------------------------------------------------


def finite_difference_gradients(batch: LossBatch, include_object: bool = False, normalized: bool = False,
                                h: float = 1e-5) -> Gradients:
    """Central differences of ``total_loss`` with respect to every prediction."""

    attr = batch.attr_pred.copy()
    glob = batch.global_pred.copy()
    obj = batch.object_pred.copy() if batch.object_pred is not None else None
    # the working batch shares these arrays, so in-place perturbation is seen
    work = LossBatch(attr, batch.attr_true, glob, batch.global_true, obj, batch.object_true, batch.aesthetic_bias)
    heads = [attr, glob] + ([obj] if include_object else [])
    grads = [np.zeros_like(a) for a in heads]
    for arr, grad in zip(heads, grads):
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = total_loss(work, include_object, normalized)
            flat[i] = orig - h
            down = total_loss(work, include_object, normalized)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
    return Gradients(grads[0], grads[1], grads[2] if include_object else None)


def relative_error(analytic: Gradients, numeric: Gradients) -> float:
    """Largest per-head ``max|a - n| / max(max|a|, max|n|)``.

    Heads whose gradients are both identically zero contribute 0.
    """
    pairs = [(analytic.attr, numeric.attr), (analytic.global_, numeric.global_)]
    if analytic.object is not None:
        pairs.append((analytic.object, numeric.object))
    worst = 0.0
    for a, n in pairs:
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(n))))
        if scale == 0.0:
            continue
        worst = max(worst, float(np.max(np.abs(a - n))) / scale)
    return worst


def random_batch(rng: np.random.Generator, n: int, m: int, dims: int, aesthetic_bias: float | None = None,
                 object_dims: int | None = None) -> LossBatch:
    """Scores drawn uniformly from [0, 10]."""
    od = dims if object_dims is None else object_dims
    bias = float(rng.uniform(0.0, 2.0)) if aesthetic_bias is None else aesthetic_bias
    return LossBatch(
        attr_pred=rng.uniform(0, 10, (m, n, dims)),
        attr_true=rng.uniform(0, 10, (m, n, dims)),
        global_pred=rng.uniform(0, 10, (n, dims)),
        global_true=rng.uniform(0, 10, (n, dims)),
        object_pred=rng.uniform(0, 10, (n, od)),
        object_true=rng.uniform(0, 10, (n, od)),
        aesthetic_bias=bias,
    )


def check_gradients(seed: int, n: int, m: int, dims: int, include_object: bool = True,
                    normalized: bool = False, h: float = 1e-5) -> float:
    """Max relative error between analytic and finite-difference gradients."""
    batch = random_batch(np.random.default_rng(seed), n, m, dims)
    return relative_error(
        gradients(batch, include_object, normalized),
        finite_difference_gradients(batch, include_object, normalized, h),
    )
