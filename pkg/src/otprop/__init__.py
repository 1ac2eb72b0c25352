"""Transductive label propagation through entropic optimal transport."""

__version__ = "0.1.0"

from .core import (
    PSEUDO,
    SEED,
    UNLABELED,
    Dataset,
    DiscreteMeasure,
    IndexOverlap,
    MissingRepresentative,
    OTPropError,
    PartitionState,
    PropagationTrace,
    TransportPlan,
    validate_partition,
)
from .data_io import SplitSpec, load_builtin, load_csv, make_split, standardize
from .metrics import ari, contingency, nmi
from .ot_solver import (
    CostMatrix,
    NotConverged,
    SinkhornConfig,
    exact_ot_bruteforce,
    sinkhorn,
    squared_euclidean_cost,
)
from .propagation import OtpConfig, certainty_scores, run_otp

__all__ = [
    "PSEUDO", "SEED", "UNLABELED",
    "CostMatrix", "Dataset", "DiscreteMeasure", "OtpConfig", "PartitionState",
    "PropagationTrace", "SinkhornConfig", "SplitSpec", "TransportPlan",
    "IndexOverlap", "MissingRepresentative", "NotConverged", "OTPropError",
    "ari", "certainty_scores", "contingency", "exact_ot_bruteforce", "load_builtin",
    "load_csv", "make_split", "nmi", "run_otp", "sinkhorn", "squared_euclidean_cost",
    "standardize", "validate_partition",
]
