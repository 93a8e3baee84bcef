"""Dense math shared by every layer kind: activations, softmax, losses.

Everything is float64. Inputs may be single vectors ``(n,)`` or batches
``(B, n)``; operations are elementwise or act along the last axis.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid")


def apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    """Elementwise transfer function."""
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    raise ValueError(f"unknown activation kind: {kind!r}")


def activation_derivative(kind: str, z: np.ndarray) -> np.ndarray:
    """Elementwise derivative of the transfer function at ``z``.

    relu uses the f'(0) = 0 convention; the kink at 0 has measure zero and
    is excluded from gradient checks (which run with tanh).
    """
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    raise ValueError(f"unknown activation kind: {kind!r}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, target) -> tuple[float, np.ndarray]:
    """Cross-entropy of softmax(logits) against a class index or soft target.

    Returns ``(loss, grad_logits)`` for a single sample: loss is
    ``-sum_i t_i log p_i`` and the gradient is ``p - t``.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError(f"logits must be a non-empty vector, got shape {z.shape}")
    p = softmax(z)
    if np.isscalar(target) or np.ndim(target) == 0:
        k = int(target)
        if not 0 <= k < z.size:
            raise ValueError(f"class index {k} out of range for {z.size} logits")
        t = np.zeros_like(z)
        t[k] = 1.0
    else:
        t = np.asarray(target, dtype=np.float64)
        if t.shape != z.shape:
            raise ValueError(f"target shape {t.shape} != logits shape {z.shape}")
        if np.any(t < 0.0) or abs(t.sum() - 1.0) > 1e-9:
            raise ValueError("soft target must be non-negative and sum to 1")
    # log p via the stabilized form; entries with t_i = 0 contribute nothing
    shifted = z - z.max()
    log_p = shifted - np.log(np.exp(shifted).sum())
    loss = float(-(t * log_p).sum())
    return loss, p - t


def batch_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch and its gradient w.r.t. the logits.

    ``targets`` is either an integer label vector ``(B,)`` or a soft-target
    matrix ``(B, C)``. The returned gradient is ``(p - t) / B``, matching the
    gradient of the mean loss.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] == 0:
        raise ValueError(f"logits must be (batch, classes), got shape {z.shape}")
    b = z.shape[0]
    p = softmax(z)
    if targets.ndim == 1:
        t = np.zeros_like(z)
        t[np.arange(b), targets.astype(int)] = 1.0
    else:
        if targets.shape != z.shape:
            raise ValueError(f"targets shape {targets.shape} != logits shape {z.shape}")
        t = np.asarray(targets, dtype=np.float64)
    shifted = z - z.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-(t * log_p).sum() / b)
    return loss, (p - t) / b
