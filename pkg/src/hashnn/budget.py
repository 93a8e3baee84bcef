"""Parameter counting and the equivalent-size shrinkage solve.

Compares storage between a compressed network (per-layer shared-weight
budgets scaled by the compression factor c) and a plain network whose
hidden widths are shrunk by a factor r. Hidden layers count their bias
column inside the compressed budget; the output layer's biases are never
compressed and always add ``n_L`` free parameters.

Real-valued counts are rounded to integers at layer granularity
(round-half-up, floored at 1 bucket); the closed-form solve works in reals
and the leftover is bounded by the documented rounding slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class InfeasibleBudgetError(ValueError):
    """The requested budget admits no valid configuration."""


class DegenerateArchitectureError(ValueError):
    """A shrinkage factor produced a non-positive hidden width."""


@dataclass(frozen=True)
class Architecture:
    """Layer widths n_1..n_L plus the network-wide compression factor.

    ``compression`` <= 1 compresses; > 1 expands (more virtual than stored
    weights).
    """

    widths: tuple[int, ...]
    compression: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"widths must be >= 1, got {self.widths}")
        if not self.compression > 0.0:
            raise InfeasibleBudgetError(
                f"compression factor must be positive, got {self.compression}")

    @property
    def depth(self) -> int:
        return len(self.widths)


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero (x >= 0)."""
    return int(math.floor(x + 0.5))


def layer_bucket_counts(arch: Architecture, c: float | None = None) -> list[int]:
    """Shared-weight budget per layer under compression c, rounded, min 1.

    Hidden layers budget ``c*(n_l + 1)*n_{l+1}`` (bias hashed in); the last
    layer budgets ``c*n_{L-1}*n_L`` with its biases kept as free parameters
    outside these counts.
    """
    c = arch.compression if c is None else c
    if not c > 0.0:
        raise InfeasibleBudgetError(f"compression factor must be positive, got {c}")
    n = arch.widths
    counts = [max(1, round_half_up(c * (n[l] + 1) * n[l + 1]))
              for l in range(arch.depth - 2)]
    counts.append(max(1, round_half_up(c * n[-2] * n[-1])))
    return counts


def param_count_hashed(arch: Architecture, c: float | None = None) -> int:
    """Stored parameters of the compressed network: bucket counts plus output biases."""
    return sum(layer_bucket_counts(arch, c)) + arch.widths[-1]


def hidden_widths(arch: Architecture, r: float) -> list[int]:
    """Widths after shrinking hidden layers by r (input/output unshrunk).

    Rounded half-up and floored at 1 so any positive r yields a runnable
    architecture.
    """
    if not r > 0.0:
        raise DegenerateArchitectureError(
            f"shrinkage factor must be positive, got {r}")
    n = arch.widths
    return [n[0]] + [max(1, round_half_up(r * w)) for w in n[1:-1]] + [n[-1]]


def param_count_standard(arch: Architecture, r: float) -> int:
    """Stored parameters of a plain network with hidden widths shrunk by r.

    Hidden layers carry bias columns; the output layer contributes
    ``m_{L-1}*m_L`` weights plus ``m_L`` biases.
    """
    m = hidden_widths(arch, r)
    total = sum((m[l] + 1) * m[l + 1] for l in range(len(m) - 2))
    total += m[-2] * m[-1] + m[-1]
    return total


def _quadratic_coefficients(arch: Architecture) -> tuple[int, int, int]:
    """Coefficients (A, B, C) of A r^2 + B r - c C = 0 in exact integers."""
    n = arch.widths
    big_l = arch.depth
    a = sum(n[l] * n[l + 1] for l in range(1, big_l - 2))
    b = sum(n[l + 1] for l in range(big_l - 2)) + n[0] * n[1] + n[-2] * n[-1]
    c = sum((n[l] + 1) * n[l + 1] for l in range(big_l - 2)) + n[-2] * n[-1]
    return a, b, c


@dataclass(frozen=True)
class CompressionPlan:
    """Everything needed to build one size-budgeted network.

    ``widths`` are the (virtual) layer widths to construct. Exactly one of
    the per-layer fields is set, matching ``method``: bucket counts for
    hashed layers, keep probabilities for edge removal, ranks for the
    low-rank factorization; a plain network sets none and records the
    shrinkage factor used to size it, if any.
    """

    method: str
    widths: tuple[int, ...]
    compression: float = 1.0
    expansion: float = 1.0
    bucket_counts: tuple[int, ...] | None = None
    keep_probs: tuple[float, ...] | None = None
    ranks: tuple[int, ...] | None = None
    shrink_factor: float | None = None


def _low_rank_ranks(widths, budgets) -> tuple[int, ...]:
    """Rank per layer so stored plus fixed factor entries fit the budget."""
    ranks = []
    for pos, stored in enumerate(budgets):
        n_in, n_out = widths[pos], widths[pos + 1]
        rank = int(stored) // (n_out + n_in + 1)
        if rank < 1:
            raise InfeasibleBudgetError(
                f"layer {pos}: budget {stored} admits no rank-1 factorization")
        ranks.append(rank)
    return tuple(ranks)


def plan_compression(widths, c: float, method: str) -> CompressionPlan:
    """Size a network of the given widths at compression factor c.

    The plain-network baseline instead shrinks its hidden widths by the
    equivalent-size factor r so its storage matches the hashed budget.
    """
    arch = Architecture(tuple(widths), c)
    if method == "standard":
        if c == 1.0:
            return CompressionPlan("standard", arch.widths, compression=1.0,
                                   shrink_factor=1.0)
        r = solve_shrinkage(arch, c)
        return CompressionPlan("standard", tuple(hidden_widths(arch, r)),
                               compression=c, shrink_factor=r)
    if method == "hashed":
        return CompressionPlan("hashed", arch.widths, compression=c,
                               bucket_counts=tuple(layer_bucket_counts(arch, c)))
    if method == "edge_removed":
        if c > 1.0:
            raise InfeasibleBudgetError(
                "edge removal cannot keep more weights than exist; use the expansion axis")
        return CompressionPlan("edge_removed", arch.widths, compression=c,
                               keep_probs=tuple([c] * (arch.depth - 1)))
    if method == "low_rank":
        budgets = [c * (arch.widths[l] + 1) * arch.widths[l + 1]
                   for l in range(arch.depth - 1)]
        return CompressionPlan("low_rank", arch.widths, compression=c,
                               ranks=_low_rank_ranks(arch.widths, budgets))
    raise ValueError(f"unknown method: {method!r}")


def plan_expansion(widths, factor: float, method: str) -> CompressionPlan:
    """Inflate hidden widths by ``factor`` while storage stays at the base size.

    The per-layer budget is the base architecture's dense parameter count;
    the plain-network baseline is the base network itself, unchanged.
    """
    if not factor >= 1.0:
        raise InfeasibleBudgetError(f"expansion factor must be >= 1, got {factor}")
    base = Architecture(tuple(widths))
    inflated = tuple([base.widths[0]]
                     + [max(1, round_half_up(factor * w)) for w in base.widths[1:-1]]
                     + [base.widths[-1]])
    if method == "standard":
        return CompressionPlan("standard", base.widths, expansion=factor,
                               shrink_factor=1.0)
    if method == "hashed":
        return CompressionPlan("hashed", inflated, compression=1.0 / factor,
                               expansion=factor,
                               bucket_counts=tuple(layer_bucket_counts(base, 1.0)))
    dense_base = [(base.widths[l] + 1) * base.widths[l + 1]
                  for l in range(base.depth - 1)]
    dense_inflated = [(inflated[l] + 1) * inflated[l + 1]
                      for l in range(len(inflated) - 1)]
    if method == "edge_removed":
        keep = tuple(min(1.0, b / v) for b, v in zip(dense_base, dense_inflated))
        return CompressionPlan("edge_removed", inflated, compression=1.0 / factor,
                               expansion=factor, keep_probs=keep)
    if method == "low_rank":
        return CompressionPlan("low_rank", inflated, compression=1.0 / factor,
                               expansion=factor,
                               ranks=_low_rank_ranks(inflated, dense_base))
    raise ValueError(f"unknown method: {method!r}")


def solve_shrinkage(arch: Architecture, c: float | None = None) -> float:
    """Shrinkage factor r making the plain network's size match the budget.

    Solves the size-match equation in reals: the positive root of the
    quadratic, or the linear solution when the quadratic term vanishes
    (3-layer networks, where r = c exactly). c > 1 yields r > 1 (expansion).
    """
    c = arch.compression if c is None else c
    if not c > 0.0:
        raise InfeasibleBudgetError(f"compression factor must be positive, got {c}")
    if arch.depth < 3:
        raise ValueError("shrinkage solve needs at least one hidden layer")
    qa, qb, qc = _quadratic_coefficients(arch)
    if qa == 0:
        return c * (qc / qb)
    disc = qb * qb + 4.0 * qa * qc * c
    if disc < 0.0:
        raise InfeasibleBudgetError("size-match equation has no real root")
    r = (-qb + math.sqrt(disc)) / (2.0 * qa)
    if not r > 0.0:
        raise InfeasibleBudgetError("size-match equation has no positive root")
    return r
