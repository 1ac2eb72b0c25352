"""Domain types shared across the package.

Arrays are stored as read-only numpy arrays so instances can be shared
between threads; successors are built with ``dataclasses.replace`` or the
helper methods below rather than mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

UNLABELED = -1
"""Sentinel used in :attr:`Dataset.labels` for rows without a label."""

SEED = "seed"
PSEUDO = "pseudo"


class OTPropError(Exception):
    """Base class for input-validation errors raised by this package."""


class MissingRepresentative(OTPropError):
    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} has no labeled representative")
        self.class_id = class_id


class IndexOverlap(OTPropError):
    def __init__(self, indices: Sequence[int]):
        super().__init__(f"indices present in both labeled and unlabeled sets: {list(indices)}")
        self.indices = list(indices)


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with optional per-row class ids.

    Parameters
    ----------
    features : array_like, shape (N, d)
    labels : array_like of int, shape (N,), optional
        Class id per row, ``UNLABELED`` (-1) where unknown. ``None`` when the
        dataset carries no labels at all.
    class_names : sequence of str
        Ordered names, ``class_names[k]`` is the name of class id ``k``.
    feature_names : sequence of str, optional
    """

    features: np.ndarray
    labels: np.ndarray | None
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = _frozen(self.features, np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 2 or d < 1:
            raise ValueError(f"need N >= 2 and d >= 1, got N={n}, d={d}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or infinite entries")
        object.__setattr__(self, "features", X)

        names = tuple(str(c) for c in self.class_names)
        if len(names) < 2:
            raise ValueError(f"need at least 2 classes, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError("class_names must be unique")
        object.__setattr__(self, "class_names", names)

        if self.labels is not None:
            y = _frozen(self.labels, np.int64)
            if y.shape != (n,):
                raise ValueError(f"labels must have shape ({n},), got {y.shape}")
            if np.any(y >= len(names)) or np.any(y < UNLABELED):
                raise ValueError(f"label ids must lie in [0, {len(names) - 1}] or be {UNLABELED}")
            object.__setattr__(self, "labels", y)

        fnames = tuple(str(f) for f in self.feature_names) or tuple(f"x{i}" for i in range(d))
        if len(fnames) != d:
            raise ValueError(f"expected {d} feature names, got {len(fnames)}")
        object.__setattr__(self, "feature_names", fnames)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def fully_labeled(self) -> bool:
        return self.labels is not None and bool(np.all(self.labels != UNLABELED))


@dataclass(frozen=True, eq=False)
class PartitionState:
    """Split of dataset rows into a labeled set and an unlabeled set.

    ``certainty`` and ``iteration`` record, per labeled index, the score at
    which a pseudo-label was assigned and the iteration that assigned it.
    Seed labels carry certainty 1 and iteration 0.
    """

    labeled_idx: np.ndarray
    labels: np.ndarray
    unlabeled_idx: np.ndarray
    origin: tuple[str, ...] = ()
    certainty: np.ndarray | None = None
    iteration: np.ndarray | None = None

    def __post_init__(self):
        li = _frozen(self.labeled_idx, np.int64).reshape(-1)
        ui = _frozen(self.unlabeled_idx, np.int64).reshape(-1)
        y = _frozen(self.labels, np.int64).reshape(-1)
        if y.shape != li.shape:
            raise ValueError(f"{len(y)} labels for {len(li)} labeled indices")
        origin = tuple(self.origin) or (SEED,) * len(li)
        if len(origin) != len(li) or not set(origin) <= {SEED, PSEUDO}:
            raise ValueError("origin must hold one of 'seed'/'pseudo' per labeled index")
        cert = np.ones(len(li)) if self.certainty is None else self.certainty
        it = np.zeros(len(li), dtype=np.int64) if self.iteration is None else self.iteration
        object.__setattr__(self, "labeled_idx", li)
        object.__setattr__(self, "unlabeled_idx", ui)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "certainty", _frozen(cert, np.float64))
        object.__setattr__(self, "iteration", _frozen(it, np.int64))

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "PartitionState":
        """Seed state taken from the dataset's own labels (unlabeled rows form X_U)."""
        if dataset.labels is None:
            raise ValueError("dataset has no labels")
        mask = dataset.labels != UNLABELED
        idx = np.arange(dataset.n_samples)
        return cls(idx[mask], dataset.labels[mask], idx[~mask])

    @property
    def n_labeled(self) -> int:
        return len(self.labeled_idx)

    @property
    def n_unlabeled(self) -> int:
        return len(self.unlabeled_idx)

    def advance(self, positions, classes, scores, t: int) -> "PartitionState":
        """Move unlabeled ``positions`` into the labeled set with pseudo-labels.

        Newly labeled rows are appended in the order given; the remaining
        unlabeled rows keep their relative order.
        """
        positions = np.asarray(positions, dtype=np.int64)
        keep = np.ones(self.n_unlabeled, dtype=bool)
        keep[positions] = False
        return PartitionState(
            labeled_idx=np.concatenate([self.labeled_idx, self.unlabeled_idx[positions]]),
            labels=np.concatenate([self.labels, np.asarray(classes, dtype=np.int64)]),
            unlabeled_idx=self.unlabeled_idx[keep],
            origin=self.origin + (PSEUDO,) * len(positions),
            certainty=np.concatenate([self.certainty, np.asarray(scores, dtype=np.float64)]),
            iteration=np.concatenate([self.iteration, np.full(len(positions), t, dtype=np.int64)]),
        )

    def full_labels(self, n_samples: int) -> np.ndarray:
        """Label per dataset row, ``UNLABELED`` for rows still in X_U."""
        out = np.full(n_samples, UNLABELED, dtype=np.int64)
        out[self.labeled_idx] = self.labels
        return out


def validate_partition(dataset: Dataset, state: PartitionState) -> PartitionState:
    """Check a partition against its dataset and return it unchanged.

    Raises
    ------
    IndexOverlap
        If some row is both labeled and unlabeled.
    MissingRepresentative
        If some class has no labeled row; the label matrix could never give
        that class any mass.
    ValueError
        On out-of-range indices, duplicates or incomplete coverage.
    """
    n = dataset.n_samples
    li, ui = state.labeled_idx, state.unlabeled_idx
    both = np.concatenate([li, ui])
    if both.size and (both.min() < 0 or both.max() >= n):
        raise ValueError(f"indices must lie in [0, {n - 1}]")
    overlap = np.intersect1d(li, ui)
    if overlap.size:
        raise IndexOverlap(overlap.tolist())
    if len(np.unique(li)) != len(li) or len(np.unique(ui)) != len(ui):
        raise ValueError("duplicate indices in partition")
    if both.size != n:
        raise ValueError(f"partition covers {both.size} of {n} rows")
    if state.labels.size and (state.labels.min() < 0 or state.labels.max() >= dataset.n_classes):
        raise ValueError("labels out of range")
    present = np.bincount(state.labels, minlength=dataset.n_classes)
    for k in range(dataset.n_classes):
        if present[k] == 0:
            raise MissingRepresentative(k)
    return state


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability vector on a finite support."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights, np.float64).reshape(-1)
        if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a non-empty nonnegative finite vector")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling of ``row_marginal`` and ``col_marginal``.

    ``potentials`` holds the dual vectors ``(f, g)`` when the plan comes from
    the entropic solver, so that a related problem can be warm-started.
    """

    plan: np.ndarray
    row_marginal: DiscreteMeasure
    col_marginal: DiscreteMeasure
    transport_cost: float
    iterations_used: int
    potentials: tuple[np.ndarray, np.ndarray] | None = None

    def marginal_violation(self) -> tuple[float, float]:
        """L1 distance of (row sums, column sums) to the prescribed marginals."""
        rows = np.abs(self.plan.sum(axis=1) - self.row_marginal.weights).sum()
        cols = np.abs(self.plan.sum(axis=0) - self.col_marginal.weights).sum()
        return float(rows), float(cols)


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Left-stochastic l x u matrix: column j is a distribution over labeled points."""

    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """Right-stochastic u x K matrix of class probabilities."""

    probs: np.ndarray


@dataclass(frozen=True)
class IterationRecord:
    t: int
    m_t: int
    n_t: int
    zeta_t: int
    alpha_effective: float
    rescue_applied: bool


@dataclass
class PropagationTrace:
    """Sizes of the labeled/unlabeled sets across propagation iterations.

    ``m0`` and ``n0`` are the initial sizes (l and u).
    """

    m0: int
    n0: int
    iterations: list[IterationRecord] = field(default_factory=list)

    def check(self) -> None:
        """Raise ``AssertionError`` if the size bookkeeping is inconsistent."""
        total = self.m0 + self.n0
        m_prev, n_prev = self.m0, self.n0
        for rec in self.iterations:
            assert rec.m_t + rec.n_t == total, f"t={rec.t}: m_t + n_t != {total}"
            assert rec.m_t == m_prev + rec.zeta_t, f"t={rec.t}: m_t != m_(t-1) + zeta_t"
            assert rec.n_t == n_prev - rec.zeta_t, f"t={rec.t}: n_t != n_(t-1) - zeta_t"
            assert rec.zeta_t >= 1, f"t={rec.t}: no progress"
            assert 0.0 <= rec.alpha_effective <= 1.0
            m_prev, n_prev = rec.m_t, rec.n_t
        assert n_prev == 0, f"{n_prev} points left unlabeled"

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    def to_records(self) -> list[dict]:
        return [
            {
                "t": r.t,
                "m_t": r.m_t,
                "n_t": r.n_t,
                "zeta_t": r.zeta_t,
                "alpha_effective": r.alpha_effective,
                "rescue_applied": r.rescue_applied,
            }
            for r in self.iterations
        ]
