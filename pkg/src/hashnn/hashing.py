"""Seeded, deterministic hashing of connection keys to buckets and signs.

Every virtual connection (i, j) of a compressed layer is mapped to a bucket
index in {0, ..., K-1} and a sign in {-1, +1} by two independent streams of
a 64-bit hash. The mapping is a pure function of (base_seed, layer_index,
i, j, K): stored models depend on it, so the algorithm and key encoding
below are frozen.

Frozen conventions:
  * Hash algorithm: XXH64. A scalar implementation over arbitrary byte
    strings is provided as ``xxh64``; bulk key hashing uses a vectorized
    specialization for the fixed-size key.
  * Key encoding: 12 bytes, the little-endian concatenation of
    (layer_index: u32, i: u32, j: u32).
  * Seed streams: bucket indices hash with seed ``base_seed + 2*layer_index``
    and signs with ``base_seed + 2*layer_index + 1`` (mod 2**64), so the two
    streams of one layer and the streams of different layers are all
    distinct.
  * Bucket reduction: plain ``hash % K``. Against a 64-bit hash the modulo
    bias is below 2**-44 for any K <= 2**20 and is ignored.
  * Sign rule: +1 when the hash value is even, -1 when odd.
  * Buckets are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

_P1 = 0x9E3779B185EBCA87
_P2 = 0xC2B2AE3D27D4EB4F
_P3 = 0x165667B19E3779F9
_P4 = 0x85EBCA77C2B2AE63
_P5 = 0x27D4EB2F165667C5


def _rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (64 - r))) & _MASK64


def _round(acc: int, lane: int) -> int:
    acc = (acc + lane * _P2) & _MASK64
    return (_rotl(acc, 31) * _P1) & _MASK64


def xxh64(data: bytes, seed: int = 0) -> int:
    """XXH64 of ``data`` with ``seed``, as an unsigned 64-bit integer.

    Scalar implementation covering arbitrary input lengths; kept simple so
    it can be audited against the published algorithm description.
    """
    seed &= _MASK64
    n = len(data)
    pos = 0

    if n >= 32:
        acc1 = (seed + _P1 + _P2) & _MASK64
        acc2 = (seed + _P2) & _MASK64
        acc3 = seed
        acc4 = (seed - _P1) & _MASK64
        while n - pos >= 32:
            acc1 = _round(acc1, int.from_bytes(data[pos:pos + 8], "little"))
            acc2 = _round(acc2, int.from_bytes(data[pos + 8:pos + 16], "little"))
            acc3 = _round(acc3, int.from_bytes(data[pos + 16:pos + 24], "little"))
            acc4 = _round(acc4, int.from_bytes(data[pos + 24:pos + 32], "little"))
            pos += 32
        acc = (_rotl(acc1, 1) + _rotl(acc2, 7) + _rotl(acc3, 12) + _rotl(acc4, 18)) & _MASK64
        for lane in (acc1, acc2, acc3, acc4):
            acc = ((acc ^ _round(0, lane)) * _P1 + _P4) & _MASK64
    else:
        acc = (seed + _P5) & _MASK64

    acc = (acc + n) & _MASK64

    while n - pos >= 8:
        lane = int.from_bytes(data[pos:pos + 8], "little")
        acc = ((_rotl(acc ^ _round(0, lane), 27) * _P1) + _P4) & _MASK64
        pos += 8
    if n - pos >= 4:
        lane = int.from_bytes(data[pos:pos + 4], "little")
        acc = ((_rotl(acc ^ (lane * _P1 & _MASK64), 23) * _P2) + _P3) & _MASK64
        pos += 4
    while pos < n:
        acc = (_rotl(acc ^ (data[pos] * _P5 & _MASK64), 11) * _P1) & _MASK64
        pos += 1

    acc ^= acc >> 33
    acc = (acc * _P2) & _MASK64
    acc ^= acc >> 29
    acc = (acc * _P3) & _MASK64
    acc ^= acc >> 32
    return acc


def key_bytes(layer_index: int, i: int, j: int) -> bytes:
    """Canonical 12-byte encoding of a connection key."""
    return (layer_index.to_bytes(4, "little")
            + i.to_bytes(4, "little")
            + j.to_bytes(4, "little"))


# uint64 constants for the vectorized path
_U = np.uint64
_V1 = _U(_P1)
_V2 = _U(_P2)
_V3 = _U(_P3)
_V4 = _U(_P4)
_V5 = _U(_P5)


def _vrotl(x: np.ndarray, r: int) -> np.ndarray:
    return (x << _U(r)) | (x >> _U(64 - r))


def _hash_keys(seed: int, layer_index: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorized XXH64 over canonical 12-byte keys (one u64 lane + one u32 lane)."""
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lane8 = _U(layer_index & 0xFFFFFFFF) | (i << _U(32))
    lane4 = j

    acc = _U((seed + _P5 + 12) & _MASK64) + np.zeros_like(i)
    # 8-byte chunk
    acc ^= _vrotl(lane8 * _V2, 31) * _V1
    acc = _vrotl(acc, 27) * _V1 + _V4
    # 4-byte chunk
    acc ^= lane4 * _V1
    acc = _vrotl(acc, 23) * _V2 + _V3
    # avalanche
    acc ^= acc >> _U(33)
    acc *= _V2
    acc ^= acc >> _U(29)
    acc *= _V3
    acc ^= acc >> _U(32)
    return acc


@dataclass(frozen=True)
class HashSpec:
    """Identifies the two hash streams of one layer.

    ``bucket_count`` is the number of shared-weight slots K; bucket outputs
    lie in {0, ..., K-1} and sign outputs in {-1, +1}.
    """

    base_seed: int
    layer_index: int
    bucket_count: int

    def __post_init__(self):
        if self.bucket_count < 1:
            raise ValueError(f"bucket_count must be >= 1, got {self.bucket_count}")
        if self.layer_index < 0:
            raise ValueError(f"layer_index must be >= 0, got {self.layer_index}")
        if not 0 <= self.base_seed <= _MASK64:
            raise ValueError("base_seed must fit in 64 bits")

    @property
    def index_seed(self) -> int:
        return (self.base_seed + 2 * self.layer_index) & _MASK64

    @property
    def sign_seed(self) -> int:
        return (self.base_seed + 2 * self.layer_index + 1) & _MASK64


def _check_key(i: int, j: int) -> None:
    if not 0 <= i < 2**32 or not 0 <= j < 2**32:
        raise ValueError(f"key components must be u32, got ({i}, {j})")


def hash_index(spec: HashSpec, i: int, j: int) -> int:
    """Bucket index of connection (i, j) in {0, ..., K-1}."""
    _check_key(i, j)
    return xxh64(key_bytes(spec.layer_index, i, j), spec.index_seed) % spec.bucket_count


def hash_sign(spec: HashSpec, i: int, j: int) -> int:
    """Sign factor of connection (i, j): +1 for even hash, -1 for odd."""
    _check_key(i, j)
    h = xxh64(key_bytes(spec.layer_index, i, j), spec.sign_seed)
    return 1 - 2 * (h & 1)


def bucket_indices(spec: HashSpec, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorized ``hash_index`` over arrays of key components."""
    h = _hash_keys(spec.index_seed, spec.layer_index, i, j)
    return (h % _U(spec.bucket_count)).astype(np.int64)


def sign_factors(spec: HashSpec, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorized ``hash_sign``; returns a float64 array of +-1."""
    h = _hash_keys(spec.sign_seed, spec.layer_index, i, j)
    return 1.0 - 2.0 * (h & _U(1)).astype(np.float64)


def find_injective_seed(n_out: int, n_cols: int, bucket_count: int,
                        layer_index: int = 0, start_seed: int = 0,
                        max_tries: int = 2_000_000) -> int:
    """Search for a base seed whose bucket hash is injective over the key range.

    Keys are (i, j) for i < n_out, j < n_cols; requires
    bucket_count >= n_out * n_cols. Used to build collision-free layers that
    reduce exactly to a dense layer.
    """
    n_keys = n_out * n_cols
    if bucket_count < n_keys:
        raise ValueError("bucket_count smaller than key range; injectivity impossible")
    ii, jj = np.divmod(np.arange(n_keys), n_cols)
    for seed in range(start_seed, start_seed + max_tries):
        spec = HashSpec(seed & _MASK64, layer_index, bucket_count)
        idx = bucket_indices(spec, ii, jj)
        if len(np.unique(idx)) == n_keys:
            return seed & _MASK64
    raise RuntimeError(f"no injective seed found in {max_tries} tries")
