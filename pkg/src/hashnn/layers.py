"""Layer implementations: dense, hashed weight sharing, edge-removed, low-rank.

Every layer maps activations ``a_prev`` (shape ``(n_in,)`` or ``(B, n_in)``)
to pre-activations ``z`` of width ``n_out`` and provides the matching
backward-error and parameter-gradient operations. Activations themselves are
applied by the network, not the layer.

Dense layers store an ``(n_out, n_in + 1)`` matrix whose column 0 is the
bias, fed by a fixed input of 1. A hashed layer stores only ``bucket_count``
real weights; entry (i, j) of its virtual matrix is derived on demand as
``sign(i, j) * w[bucket(i, j)]``. With ``hash_bias=True`` the bias column
j=0 is hashed along with the rest; with ``hash_bias=False`` the layer
instead carries an uncompressed per-output bias vector (the configuration
used for output layers, whose biases stay free parameters).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hashing
from .core_math import activation_derivative


@dataclass
class ForwardTrace:
    """Per-layer activations and pre-activations of one forward pass.

    ``activations[0]`` is the network input; ``activations[l]`` the
    (possibly dropped-out) output of hidden layer l. ``pre_activations[l]``
    is layer l's linear output z. ``dropout_masks[l]`` is the inverted
    dropout mask applied after hidden layer l, or None.
    """

    activations: list = field(default_factory=list)
    pre_activations: list = field(default_factory=list)
    dropout_masks: list = field(default_factory=list)


@dataclass
class BackwardTrace:
    """Error terms (loss gradient w.r.t. each layer's pre-activations)."""

    deltas: list = field(default_factory=list)


def _check_width(a: np.ndarray, width: int, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != width:
        raise ValueError(f"{what} has width {a.shape[-1]}, expected {width}")
    return a


def _augment(a: np.ndarray) -> np.ndarray:
    """Prepend the fixed bias input 1 along the last axis."""
    if a.ndim == 1:
        return np.concatenate(([1.0], a))
    ones = np.ones((a.shape[0], 1))
    return np.concatenate((ones, a), axis=1)


class StandardLayer:
    """Fully connected layer with a dense weight matrix including bias column."""

    kind = "standard"

    def __init__(self, n_in: int, n_out: int):
        if n_in < 1 or n_out < 1:
            raise ValueError("layer widths must be >= 1")
        self.n_in = n_in
        self.n_out = n_out
        self.weights = np.zeros((n_out, n_in + 1))

    def init_weights(self, init_seed: int) -> None:
        rng = np.random.default_rng(init_seed)
        bound = np.sqrt(6.0 / (self.n_in + self.n_out))
        self.weights[...] = rng.uniform(-bound, bound, size=self.weights.shape)
        self.enforce_constraints()

    def forward(self, a_prev: np.ndarray) -> np.ndarray:
        a = _check_width(a_prev, self.n_in, "input activation")
        return a @ self.weights[:, 1:].T + self.weights[:, 0]

    def backward_error(self, delta_next: np.ndarray, z_prev: np.ndarray,
                       activation_kind: str) -> np.ndarray:
        d = _check_width(delta_next, self.n_out, "delta")
        z = _check_width(z_prev, self.n_in, "previous pre-activation")
        return (d @ self.weights[:, 1:]) * activation_derivative(activation_kind, z)

    def gradient_standard(self, a_prev: np.ndarray, delta_next: np.ndarray) -> np.ndarray:
        a = _check_width(a_prev, self.n_in, "input activation")
        d = _check_width(delta_next, self.n_out, "delta")
        a_aug = _augment(a)
        if a.ndim == 1:
            return np.outer(d, a_aug)
        return d.T @ a_aug

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights}

    def gradients(self, a_prev: np.ndarray, delta_next: np.ndarray) -> dict[str, np.ndarray]:
        return {"weights": self.gradient_standard(a_prev, delta_next)}

    def enforce_constraints(self) -> None:
        pass

    @property
    def param_count(self) -> int:
        return self.weights.size


class EdgeRemovedLayer(StandardLayer):
    """Dense layer with a frozen random sparsity mask drawn at construction.

    Masked entries are exactly zero before, during, and after training;
    their gradients are discarded. Stored parameters are the kept entries.
    """

    kind = "edge_removed"

    def __init__(self, n_in: int, n_out: int, keep_prob: float, mask_seed: int):
        super().__init__(n_in, n_out)
        if not 0.0 < keep_prob <= 1.0:
            raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
        self.keep_prob = keep_prob
        self.mask_seed = mask_seed
        rng = np.random.default_rng(mask_seed)
        self.mask = (rng.random(self.weights.shape) < keep_prob).astype(np.float64)

    def gradient_standard(self, a_prev: np.ndarray, delta_next: np.ndarray) -> np.ndarray:
        return super().gradient_standard(a_prev, delta_next) * self.mask

    def gradients(self, a_prev, delta_next) -> dict[str, np.ndarray]:
        return {"weights": self.gradient_standard(a_prev, delta_next)}

    def enforce_constraints(self) -> None:
        self.weights *= self.mask

    @property
    def param_count(self) -> int:
        return int(self.mask.sum())


class LowRankLayer:
    """Dense layer factored as a frozen Gaussian matrix times a trained one.

    The fixed factor ``B`` (n_out x rank) is drawn once with standard
    deviation 1/sqrt(n_in) and never updated; only ``A`` (rank x (n_in+1))
    trains. Effective weights are ``B @ A``.
    """

    kind = "low_rank"

    def __init__(self, n_in: int, n_out: int, rank: int, b_seed: int):
        if n_in < 1 or n_out < 1:
            raise ValueError("layer widths must be >= 1")
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        self.n_in = n_in
        self.n_out = n_out
        self.rank = rank
        self.b_seed = b_seed
        rng = np.random.default_rng(b_seed)
        self.fixed = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, rank))
        self.factor = np.zeros((rank, n_in + 1))

    def init_weights(self, init_seed: int) -> None:
        rng = np.random.default_rng(init_seed)
        bound = np.sqrt(6.0 / (self.rank + self.n_in))
        self.factor[...] = rng.uniform(-bound, bound, size=self.factor.shape)

    def forward(self, a_prev: np.ndarray) -> np.ndarray:
        a = _check_width(a_prev, self.n_in, "input activation")
        inner = a @ self.factor[:, 1:].T + self.factor[:, 0]
        return inner @ self.fixed.T

    def backward_error(self, delta_next, z_prev, activation_kind) -> np.ndarray:
        d = _check_width(delta_next, self.n_out, "delta")
        z = _check_width(z_prev, self.n_in, "previous pre-activation")
        back = (d @ self.fixed) @ self.factor[:, 1:]
        return back * activation_derivative(activation_kind, z)

    def gradient_standard(self, a_prev: np.ndarray, delta_next: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the trained factor: B^T chained through the virtual grad."""
        a = _check_width(a_prev, self.n_in, "input activation")
        d = _check_width(delta_next, self.n_out, "delta")
        a_aug = _augment(a)
        if a.ndim == 1:
            return np.outer(d @ self.fixed, a_aug)
        return (d @ self.fixed).T @ a_aug

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {"factor": self.factor}

    def gradients(self, a_prev, delta_next) -> dict[str, np.ndarray]:
        return {"factor": self.gradient_standard(a_prev, delta_next)}

    def enforce_constraints(self) -> None:
        pass

    @property
    def param_count(self) -> int:
        return self.factor.size


class HashedLayer:
    """Layer whose virtual weight matrix is backed by K shared weights.

    Bucket indices and sign factors are recomputed from the hash on every
    pass by default; ``precompute=True`` caches them at first use for speed.
    Both modes produce identical results.
    """

    kind = "hashed"

    def __init__(self, n_in: int, n_out: int, bucket_count: int, base_seed: int,
                 layer_index: int = 0, sign_enabled: bool = True,
                 hash_bias: bool = True, precompute: bool = False):
        if n_in < 1 or n_out < 1:
            raise ValueError("layer widths must be >= 1")
        self.n_in = n_in
        self.n_out = n_out
        self.spec = hashing.HashSpec(base_seed, layer_index, bucket_count)
        self.sign_enabled = sign_enabled
        self.hash_bias = hash_bias
        self.precompute = precompute
        self.weights = np.zeros(bucket_count)
        self.free_bias = None if hash_bias else np.zeros(n_out)
        self._cache = None

    @property
    def bucket_count(self) -> int:
        return self.spec.bucket_count

    @property
    def _first_j(self) -> int:
        return 0 if self.hash_bias else 1

    def indices_and_signs(self) -> tuple[np.ndarray, np.ndarray]:
        """Bucket-index and sign grids over the layer's key range.

        Shapes are ``(n_out, n_cols)`` where columns correspond to keys
        j = 0..n_in (bias hashed) or j = 1..n_in. Signs are all +1 when the
        sign hash is disabled.
        """
        if self._cache is not None:
            return self._cache
        n_cols = self.n_in + 1 - self._first_j
        ii = np.repeat(np.arange(self.n_out), n_cols)
        jj = np.tile(np.arange(self._first_j, self.n_in + 1), self.n_out)
        idx = hashing.bucket_indices(self.spec, ii, jj).reshape(self.n_out, n_cols)
        if self.sign_enabled:
            sgn = hashing.sign_factors(self.spec, ii, jj).reshape(self.n_out, n_cols)
        else:
            sgn = np.ones((self.n_out, n_cols))
        if self.precompute:
            self._cache = (idx, sgn)
        return idx, sgn

    def virtual_weight(self, i: int, j: int) -> float:
        """Entry (i, j) of the virtual matrix, derived without materializing it."""
        if not 0 <= i < self.n_out:
            raise ValueError(f"output index {i} out of range")
        if not self._first_j <= j <= self.n_in:
            raise ValueError(f"input index {j} out of range")
        w = self.weights[hashing.hash_index(self.spec, i, j)]
        if self.sign_enabled:
            w = w * hashing.hash_sign(self.spec, i, j)
        return float(w)

    def _virtual_matrix(self) -> np.ndarray:
        """Transient gather of the full matrix for one pass (never stored)."""
        idx, sgn = self.indices_and_signs()
        return self.weights[idx] * sgn

    def forward(self, a_prev: np.ndarray) -> np.ndarray:
        a = _check_width(a_prev, self.n_in, "input activation")
        v = self._virtual_matrix()
        if self.hash_bias:
            z = a @ v[:, 1:].T + v[:, 0]
        else:
            z = a @ v.T + self.free_bias
        return z

    def backward_error(self, delta_next, z_prev, activation_kind) -> np.ndarray:
        d = _check_width(delta_next, self.n_out, "delta")
        z = _check_width(z_prev, self.n_in, "previous pre-activation")
        v = self._virtual_matrix()
        v_in = v[:, 1:] if self.hash_bias else v
        return (d @ v_in) * activation_derivative(activation_kind, z)

    def gradient_shared(self, a_prev: np.ndarray, delta_next: np.ndarray) -> np.ndarray:
        """Gradient of the loss w.r.t. the K shared weights.

        Each virtual gradient a_j * delta_i lands, sign-adjusted, in the
        bucket of its connection; collisions accumulate.
        """
        a = _check_width(a_prev, self.n_in, "input activation")
        d = _check_width(delta_next, self.n_out, "delta")
        a_cols = _augment(a) if self.hash_bias else a
        if a.ndim == 1:
            grad_virtual = np.outer(d, a_cols)
        else:
            grad_virtual = d.T @ a_cols
        idx, sgn = self.indices_and_signs()
        return np.bincount(idx.ravel(), weights=(grad_virtual * sgn).ravel(),
                           minlength=self.bucket_count)

    def gradient_free_bias(self, delta_next: np.ndarray) -> np.ndarray:
        d = _check_width(delta_next, self.n_out, "delta")
        return d.copy() if d.ndim == 1 else d.sum(axis=0)

    def init_weights(self, init_seed: int) -> None:
        rng = np.random.default_rng(init_seed)
        bound = np.sqrt(6.0 / (self.n_in + self.n_out))
        self.weights[...] = rng.uniform(-bound, bound, size=self.bucket_count)
        if self.free_bias is not None:
            self.free_bias[...] = 0.0

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        arrays = {"weights": self.weights}
        if self.free_bias is not None:
            arrays["free_bias"] = self.free_bias
        return arrays

    def gradients(self, a_prev, delta_next) -> dict[str, np.ndarray]:
        grads = {"weights": self.gradient_shared(a_prev, delta_next)}
        if self.free_bias is not None:
            grads["free_bias"] = self.gradient_free_bias(delta_next)
        return grads

    def enforce_constraints(self) -> None:
        pass

    @property
    def param_count(self) -> int:
        return self.bucket_count + (0 if self.free_bias is None else self.n_out)
