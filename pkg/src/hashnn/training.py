"""Networks, mini-batch SGD with momentum and dropout, distillation, grad checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import budget as budget_mod
from .core_math import ACTIVATIONS, apply_activation, batch_cross_entropy, softmax
from .data import Dataset
from .hashing import xxh64
from .layers import (BackwardTrace, EdgeRemovedLayer, ForwardTrace, HashedLayer,
                     LowRankLayer, StandardLayer)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.0
    dropout_rate: float = 0.0
    batch_size: int = 50
    epochs: int = 10
    rng_seed: int = 0
    dk_temperature: float = 2.0
    dk_mix: float = 0.5

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not self.dk_temperature > 0.0:
            raise ValueError("dk_temperature must be positive")
        if not 0.0 <= self.dk_mix <= 1.0:
            raise ValueError("dk_mix must be in [0, 1]")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_err: float
    test_err: float


def derive_seed(master_seed: int, label: str) -> int:
    """Deterministic named sub-seed so independent streams never collide."""
    return xxh64(label.encode("utf-8"), master_seed & 0xFFFFFFFFFFFFFFFF)


class Network:
    """Feed-forward stack of layers with softmax output.

    Hidden layers share one activation kind; the final layer's
    pre-activations are the logits.
    """

    def __init__(self, layers: list, hidden_activation: str = "relu"):
        if len(layers) < 1:
            raise ValueError("network needs at least one layer")
        if hidden_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation kind: {hidden_activation!r}")
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(
                    f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        self.layers = layers
        self.hidden_activation = hidden_activation

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.layers[0].n_in,) + tuple(l.n_out for l in self.layers)

    @property
    def param_count(self) -> int:
        return sum(l.param_count for l in self.layers)

    def forward_trace(self, x: np.ndarray, dropout_rate: float = 0.0,
                      rng: np.random.Generator | None = None) -> ForwardTrace:
        """Run the network, recording activations and pre-activations.

        With a positive dropout rate (training mode) each hidden activation
        is masked and rescaled by 1/(1-p) so inference needs no rescaling;
        the masks are recorded for the backward pass.
        """
        trace = ForwardTrace(activations=[np.asarray(x, dtype=np.float64)])
        for pos, layer in enumerate(self.layers):
            z = layer.forward(trace.activations[-1])
            trace.pre_activations.append(z)
            if pos == len(self.layers) - 1:
                break
            a = apply_activation(self.hidden_activation, z)
            if dropout_rate > 0.0:
                if rng is None:
                    raise ValueError("dropout requires an rng")
                mask = (rng.random(a.shape) >= dropout_rate) / (1.0 - dropout_rate)
                a = a * mask
                trace.dropout_masks.append(mask)
            else:
                trace.dropout_masks.append(None)
            trace.activations.append(a)
        return trace

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward_trace(x).pre_activations[-1]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=-1)

    def backward_trace(self, ftrace: ForwardTrace, grad_logits: np.ndarray) -> BackwardTrace:
        """Propagate the loss gradient back to every layer's pre-activations."""
        deltas = [None] * len(self.layers)
        deltas[-1] = np.asarray(grad_logits, dtype=np.float64)
        for pos in range(len(self.layers) - 2, -1, -1):
            delta = self.layers[pos + 1].backward_error(
                deltas[pos + 1], ftrace.pre_activations[pos], self.hidden_activation)
            mask = ftrace.dropout_masks[pos]
            if mask is not None:
                delta = delta * mask
            deltas[pos] = delta
        return BackwardTrace(deltas=deltas)

    def gradients(self, ftrace: ForwardTrace, btrace: BackwardTrace) -> list[dict]:
        return [layer.gradients(ftrace.activations[pos], btrace.deltas[pos])
                for pos, layer in enumerate(self.layers)]


def evaluate(net: Network, dataset: Dataset) -> tuple[float, float]:
    """Mean hard-label cross-entropy and misclassification rate."""
    logits = net.logits(dataset.samples)
    loss, _ = batch_cross_entropy(logits, dataset.labels)
    err = float(np.mean(np.argmax(logits, axis=1) != dataset.labels))
    return loss, err


def _training_targets(dataset: Dataset, config: TrainConfig) -> np.ndarray:
    """One-hot labels, blended with soft targets when the dataset carries them."""
    onehot = np.zeros((len(dataset), dataset.n_classes))
    onehot[np.arange(len(dataset)), dataset.labels] = 1.0
    if dataset.soft_targets is None:
        return onehot
    lam = config.dk_mix
    return lam * onehot + (1.0 - lam) * dataset.soft_targets


def train(net: Network, train_set: Dataset, config: TrainConfig,
          test_set: Dataset | None = None) -> list[EpochStats]:
    """Mini-batch SGD with momentum; returns per-epoch statistics.

    Fully deterministic given ``config.rng_seed``: the epoch permutations
    and dropout masks come from one seeded generator. The velocity update is
    v <- momentum*v - lr*grad; w <- w + v. Aborts with ``DivergenceError``
    on a non-finite batch loss.
    """
    rng = np.random.default_rng(config.rng_seed)
    targets = _training_targets(train_set, config)
    velocity = {(pos, name): np.zeros_like(arr)
                for pos, layer in enumerate(net.layers)
                for name, arr in layer.trainable_arrays().items()}
    stats: list[EpochStats] = []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            pick = perm[start:start + config.batch_size]
            ftrace = net.forward_trace(train_set.samples[pick],
                                       dropout_rate=config.dropout_rate, rng=rng)
            loss, grad_logits = batch_cross_entropy(
                ftrace.pre_activations[-1], targets[pick])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}")
            batch_losses.append(loss)
            btrace = net.backward_trace(ftrace, grad_logits)
            for pos, layer in enumerate(net.layers):
                grads = layer.gradients(ftrace.activations[pos], btrace.deltas[pos])
                arrays = layer.trainable_arrays()
                for name, grad in grads.items():
                    v = velocity[(pos, name)]
                    v *= config.momentum
                    v -= config.learning_rate * grad
                    arrays[name] += v
                layer.enforce_constraints()
        _, train_err = evaluate(net, train_set)
        test_err = evaluate(net, test_set)[1] if test_set is not None else float("nan")
        stats.append(EpochStats(epoch, float(np.mean(batch_losses)), train_err, test_err))
    return stats


def distill_targets(teacher: Network, dataset: Dataset, temperature: float) -> np.ndarray:
    """Teacher's temperature-softened softmax outputs, one row per sample."""
    if not temperature > 0.0:
        raise ValueError("temperature must be positive")
    return softmax(teacher.logits(dataset.samples) / temperature)


def grad_check(net: Network, x: np.ndarray, target, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs with tanh hidden activations (swapped in for the duration) and no
    dropout; relu's kink would break the comparison. Gradient entries below
    1e-4 in both routes are compared on an absolute scale of 1e-4 so
    finite-difference round-off cannot dominate the ratio.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("grad_check takes a single sample")
    saved_kind = net.hidden_activation
    net.hidden_activation = "tanh"
    try:
        def loss_at() -> float:
            logits = net.logits(x[None, :])
            loss, _ = batch_cross_entropy(logits, np.asarray([target]))
            return loss

        ftrace = net.forward_trace(x[None, :])
        loss, grad_logits = batch_cross_entropy(
            ftrace.pre_activations[-1], np.asarray([target]))
        btrace = net.backward_trace(ftrace, grad_logits)
        analytic = net.gradients(ftrace, btrace)

        worst = 0.0
        for pos, layer in enumerate(net.layers):
            arrays = layer.trainable_arrays()
            for name, arr in arrays.items():
                ga = analytic[pos][name]
                flat = arr.reshape(-1)
                ga_flat = ga.reshape(-1)
                for k in range(flat.size):
                    saved = flat[k]
                    flat[k] = saved + epsilon
                    up = loss_at()
                    flat[k] = saved - epsilon
                    down = loss_at()
                    flat[k] = saved
                    gn = (up - down) / (2.0 * epsilon)
                    denom = max(abs(ga_flat[k]), abs(gn), 1e-4)
                    worst = max(worst, abs(ga_flat[k] - gn) / denom)
        return worst
    finally:
        net.hidden_activation = saved_kind


def build_network(plan: budget_mod.CompressionPlan, master_seed: int,
                  hidden_activation: str = "relu",
                  precompute_hash: bool = True) -> Network:
    """Construct and initialize a network from a sizing plan.

    Per-layer seeds derive from ``master_seed`` by name, so two networks
    built from the same seed are identical and independent streams never
    interact. Hashed layers share one base hash seed; their layer index
    separates the streams.
    """
    widths = plan.widths
    n_layers = len(widths) - 1
    layers = []
    hash_base = derive_seed(master_seed, "hash")
    for pos in range(n_layers):
        n_in, n_out = widths[pos], widths[pos + 1]
        if plan.method == "standard":
            layer = StandardLayer(n_in, n_out)
        elif plan.method == "hashed":
            layer = HashedLayer(
                n_in, n_out, plan.bucket_counts[pos], hash_base, layer_index=pos,
                hash_bias=(pos < n_layers - 1), precompute=precompute_hash)
        elif plan.method == "edge_removed":
            layer = EdgeRemovedLayer(n_in, n_out, plan.keep_probs[pos],
                                     derive_seed(master_seed, f"mask/{pos}"))
        elif plan.method == "low_rank":
            layer = LowRankLayer(n_in, n_out, plan.ranks[pos],
                                 derive_seed(master_seed, f"fixed/{pos}"))
        else:
            raise ValueError(f"unknown layer kind: {plan.method!r}")
        layer.init_weights(derive_seed(master_seed, f"init/{pos}"))
        layers.append(layer)
    return Network(layers, hidden_activation=hidden_activation)
