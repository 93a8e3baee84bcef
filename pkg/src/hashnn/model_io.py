"""Model checkpoints: a canonical JSON document with base64 weight blobs.

The file is self-describing (layer kinds, widths, hash seeds, bucket
counts) and byte-stable: identical models serialize to identical bytes, and
reloading reproduces bit-identical parameters and virtual matrices. Masks
and fixed factors are stored outright rather than re-derived, so a
checkpoint never depends on the RNG that built it.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .layers import EdgeRemovedLayer, HashedLayer, LowRankLayer, StandardLayer
from .training import Network

FORMAT_NAME = "hashnn-model"
FORMAT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).copy()


def _layer_record(layer) -> dict:
    rec = {"kind": layer.kind, "n_in": layer.n_in, "n_out": layer.n_out}
    if isinstance(layer, HashedLayer):
        rec.update(bucket_count=layer.bucket_count,
                   base_seed=layer.spec.base_seed,
                   layer_index=layer.spec.layer_index,
                   sign_enabled=layer.sign_enabled,
                   hash_bias=layer.hash_bias,
                   weights=_encode_array(layer.weights))
        if layer.free_bias is not None:
            rec["free_bias"] = _encode_array(layer.free_bias)
    elif isinstance(layer, EdgeRemovedLayer):
        rec.update(keep_prob=layer.keep_prob,
                   mask=_encode_array(layer.mask),
                   weights=_encode_array(layer.weights))
    elif isinstance(layer, LowRankLayer):
        rec.update(rank=layer.rank,
                   fixed=_encode_array(layer.fixed),
                   factor=_encode_array(layer.factor))
    elif isinstance(layer, StandardLayer):
        rec["weights"] = _encode_array(layer.weights)
    else:
        raise ValueError(f"cannot serialize layer kind {layer.kind!r}")
    return rec


def _layer_from_record(rec: dict):
    kind = rec["kind"]
    n_in, n_out = rec["n_in"], rec["n_out"]
    if kind == "hashed":
        layer = HashedLayer(n_in, n_out, rec["bucket_count"], rec["base_seed"],
                            layer_index=rec["layer_index"],
                            sign_enabled=rec["sign_enabled"],
                            hash_bias=rec["hash_bias"])
        layer.weights[...] = _decode_array(rec["weights"])
        if layer.free_bias is not None:
            layer.free_bias[...] = _decode_array(rec["free_bias"])
        return layer
    if kind == "edge_removed":
        layer = EdgeRemovedLayer(n_in, n_out, rec["keep_prob"], mask_seed=0)
        layer.mask = _decode_array(rec["mask"])
        layer.weights = _decode_array(rec["weights"])
        return layer
    if kind == "low_rank":
        layer = LowRankLayer(n_in, n_out, rec["rank"], b_seed=0)
        layer.fixed = _decode_array(rec["fixed"])
        layer.factor = _decode_array(rec["factor"])
        return layer
    if kind == "standard":
        layer = StandardLayer(n_in, n_out)
        layer.weights = _decode_array(rec["weights"])
        return layer
    raise ValueError(f"unknown layer kind in model file: {kind!r}")


def model_bytes(net: Network) -> bytes:
    doc = {"format": FORMAT_NAME,
           "version": FORMAT_VERSION,
           "hidden_activation": net.hidden_activation,
           "widths": list(net.widths),
           "layers": [_layer_record(l) for l in net.layers]}
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("ascii")


def save_model(net: Network, path) -> None:
    with open(str(path), "wb") as f:
        f.write(model_bytes(net))


def load_model(path) -> Network:
    with open(str(path), "rb") as f:
        doc = json.loads(f.read().decode("ascii"))
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')}")
    layers = [_layer_from_record(rec) for rec in doc["layers"]]
    return Network(layers, hidden_activation=doc["hidden_activation"])
