"""Neural-network compression via seeded random weight sharing.

Layers store a small vector of shared weights; a deterministic hash maps
every virtual connection to one of them (with a second sign hash removing
collision bias). The package also ships the size-matched baselines (plain,
edge-removed, low-rank), the equivalent-size budget calculus, training
machinery, and a sweep CLI.
"""

from .budget import (Architecture, CompressionPlan, DegenerateArchitectureError,
                     InfeasibleBudgetError, param_count_hashed,
                     param_count_standard, plan_compression, plan_expansion,
                     solve_shrinkage)
from .data import Dataset, load_idx, save_idx, synth_blobs
from .feature_hash import PhiMap, hashed_dot, phi, run_equivalence_suite, unbiasedness_trial
from .hashing import HashSpec, hash_index, hash_sign, xxh64
from .layers import (BackwardTrace, EdgeRemovedLayer, ForwardTrace, HashedLayer,
                     LowRankLayer, StandardLayer)
from .model_io import load_model, save_model
from .training import (DivergenceError, EpochStats, Network, TrainConfig,
                       build_network, distill_targets, evaluate, grad_check, train)

__version__ = "0.1.0"
