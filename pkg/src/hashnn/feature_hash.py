"""Feature-hashing view of a shared-weight layer; the equivalence oracle.

A hashed layer can equivalently be described as hashing the incoming
activation vector once per output unit — signed bucket sums ``phi_i`` —
and taking inner products with the single shared weight vector. This module
implements that formulation directly and deliberately slowly (explicit
loops, two-stage error propagation) so it can serve as an independent check
of the fused layer operations. It is test-facing and never on the training
hot path.

It is also the home of the statistical properties of signed bucket sums:
inner products are preserved in expectation over the choice of hash seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_math import activation_derivative
from .hashing import HashSpec, bucket_indices, hash_index, hash_sign, sign_factors


@dataclass(frozen=True)
class PhiMap:
    """Signed bucket-sum projection for one output unit.

    ``i`` selects the per-output hash stream; entry t of an input vector is
    hashed under key j = j_offset + t (j_offset 0 when a leading bias entry
    is part of the vector, 1 otherwise). ``signed=False`` drops the sign
    factor, matching layers built without it.
    """

    spec: HashSpec
    i: int
    j_offset: int = 1
    signed: bool = True


def phi(pm: PhiMap, a: np.ndarray) -> np.ndarray:
    """Project ``a`` into the K-dimensional bucket space.

    Bucket k receives the sign-weighted sum of all entries hashed to it.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"expected a vector, got shape {a.shape}")
    out = np.zeros(pm.spec.bucket_count)
    for t, value in enumerate(a):
        j = pm.j_offset + t
        k = hash_index(pm.spec, pm.i, j)
        s = hash_sign(pm.spec, pm.i, j) if pm.signed else 1
        out[k] += s * value
    return out


def hashed_dot(w: np.ndarray, pm: PhiMap, a: np.ndarray) -> float:
    """Inner product between the shared weights and the hashed input."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (pm.spec.bucket_count,):
        raise ValueError(f"weight vector shape {w.shape} != ({pm.spec.bucket_count},)")
    return float(w @ phi(pm, a))


def forward_oracle(spec: HashSpec, w: np.ndarray, a: np.ndarray,
                   n_out: int, hash_bias: bool = True, signed: bool = True) -> np.ndarray:
    """Layer output built unit-by-unit from hashed inner products.

    Excludes any uncompressed bias; callers add it separately.
    """
    a = np.asarray(a, dtype=np.float64)
    j_offset = 0 if hash_bias else 1
    a_cols = np.concatenate(([1.0], a)) if hash_bias else a
    z = np.empty(n_out)
    for i in range(n_out):
        z[i] = hashed_dot(w, PhiMap(spec, i, j_offset, signed), a_cols)
    return z


def error_term_oracle(spec: HashSpec, w: np.ndarray, delta_next: np.ndarray,
                      z_prev: np.ndarray, activation_kind: str,
                      signed: bool = True) -> np.ndarray:
    """Backward error terms via literal two-stage propagation.

    First forms the error of every bucket of every per-output hash space
    (``mid[i, k] = w[k] * delta_next[i]``), then scatters those back through
    the hash assignments onto the input units. The fused single-stage rule
    must agree with this.
    """
    w = np.asarray(w, dtype=np.float64)
    delta_next = np.asarray(delta_next, dtype=np.float64)
    z_prev = np.asarray(z_prev, dtype=np.float64)
    mid = np.outer(delta_next, w)
    fprime = activation_derivative(activation_kind, z_prev)
    delta_prev = np.zeros(z_prev.shape[0])
    for t in range(z_prev.shape[0]):
        j = 1 + t  # input units carry keys 1..n_in; key 0 is the bias
        total = 0.0
        for i in range(delta_next.shape[0]):
            s = hash_sign(spec, i, j) if signed else 1
            total += s * mid[i, hash_index(spec, i, j)]
        delta_prev[t] = total * fprime[t]
    return delta_prev


def gradient_oracle(spec: HashSpec, a: np.ndarray, delta_next: np.ndarray,
                    hash_bias: bool = True, signed: bool = True) -> np.ndarray:
    """Shared-weight gradient as the phi-weighted sum of output errors.

    ``grad[k] = sum_i phi_{i,k}(a) * delta_i``, one phi map per output unit.
    """
    a = np.asarray(a, dtype=np.float64)
    delta_next = np.asarray(delta_next, dtype=np.float64)
    j_offset = 0 if hash_bias else 1
    a_cols = np.concatenate(([1.0], a)) if hash_bias else a
    grad = np.zeros(spec.bucket_count)
    for i in range(delta_next.shape[0]):
        grad += phi(PhiMap(spec, i, j_offset, signed), a_cols) * delta_next[i]
    return grad


def unbiasedness_trial(x: np.ndarray, x2: np.ndarray, bucket_count: int,
                       n_seeds: int, base_seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of the hashed inner product over hash draws.

    Projects both vectors with the same map under ``n_seeds`` different
    seeds and returns the mean of ``phi(x) . phi(x2)`` and its standard
    error. The mean converges to the plain inner product ``x . x2``.
    """
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape or x.ndim != 1:
        raise ValueError("x and x2 must be vectors of the same length")
    if n_seeds < 100:
        raise ValueError(f"need at least 100 seeds, got {n_seeds}")
    jj = np.arange(1, x.size + 1)
    ii = np.zeros(x.size, dtype=np.int64)
    dots = np.empty(n_seeds)
    for s in range(n_seeds):
        spec = HashSpec((base_seed + s) & 0xFFFFFFFFFFFFFFFF, 0, bucket_count)
        idx = bucket_indices(spec, ii, jj)
        sgn = sign_factors(spec, ii, jj)
        px = np.bincount(idx, weights=sgn * x, minlength=bucket_count)
        px2 = np.bincount(idx, weights=sgn * x2, minlength=bucket_count)
        dots[s] = px @ px2
    mean = float(dots.mean())
    stderr = float(dots.std(ddof=1) / np.sqrt(n_seeds)) if n_seeds > 1 else 0.0
    return mean, stderr


def run_equivalence_suite(n_layers: int = 50, max_width: int = 32,
                          max_buckets: int = 64, seed: int = 0) -> dict[str, float]:
    """Compare random shared-weight layers against the oracles in this module.

    Draws layers with mixed sign/bias/caching settings and random inputs,
    and returns the worst absolute deviation seen for each of the three
    operations (all should sit at floating round-off, ~1e-15).
    """
    from .layers import HashedLayer  # deferred: layers is a consumer of this module

    rng = np.random.default_rng(seed)
    worst = {"forward": 0.0, "backward_error": 0.0, "gradient": 0.0}
    for _ in range(n_layers):
        n_in = int(rng.integers(1, max_width + 1))
        n_out = int(rng.integers(1, max_width + 1))
        buckets = int(rng.integers(1, max_buckets + 1))
        sign_enabled = bool(rng.integers(2))
        hash_bias = bool(rng.integers(2))
        layer = HashedLayer(n_in, n_out, buckets,
                            base_seed=int(rng.integers(0, 2**63)),
                            layer_index=int(rng.integers(0, 4)),
                            sign_enabled=sign_enabled, hash_bias=hash_bias,
                            precompute=bool(rng.integers(2)))
        layer.init_weights(int(rng.integers(0, 2**31)))
        if layer.free_bias is not None:
            layer.free_bias[...] = rng.standard_normal(n_out)
        a = rng.standard_normal(n_in)
        delta = rng.standard_normal(n_out)
        z_prev = rng.standard_normal(n_in)

        z_oracle = forward_oracle(layer.spec, layer.weights, a, n_out,
                                  hash_bias=hash_bias, signed=sign_enabled)
        if layer.free_bias is not None:
            z_oracle = z_oracle + layer.free_bias
        worst["forward"] = max(worst["forward"],
                               float(np.max(np.abs(layer.forward(a) - z_oracle))))

        d_oracle = error_term_oracle(layer.spec, layer.weights, delta, z_prev,
                                     "tanh", signed=sign_enabled)
        d_layer = layer.backward_error(delta, z_prev, "tanh")
        worst["backward_error"] = max(worst["backward_error"],
                                      float(np.max(np.abs(d_layer - d_oracle))))

        g_oracle = gradient_oracle(layer.spec, a, delta,
                                   hash_bias=hash_bias, signed=sign_enabled)
        g_layer = layer.gradient_shared(a, delta)
        worst["gradient"] = max(worst["gradient"],
                                float(np.max(np.abs(g_layer - g_oracle))))
    return worst
