"""Agreement between two partitions: NMI and ARI from a contingency table."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """``counts[i, j]`` = number of points in predicted group i and true group j.

    Rows and columns follow the sorted distinct ids of each partition.
    """

    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(pred, truth) -> ContingencyTable:
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {truth.size} ground-truth labels")
    if pred.size == 0:
        raise ValueError("empty partitions")
    _, p = np.unique(pred, return_inverse=True)
    _, q = np.unique(truth, return_inverse=True)
    counts = np.zeros((p.max() + 1, q.max() + 1), dtype=np.int64)
    np.add.at(counts, (p, q), 1)
    return ContingencyTable(counts)


def _as_table(table_or_pred, truth=None) -> ContingencyTable:
    if truth is None:
        return table_or_pred
    return contingency(table_or_pred, truth)


def nmi(table, truth=None) -> float:
    """Normalized mutual information, ``2 I(P', P) / (H(P') + H(P))``.

    Accepts a :class:`ContingencyTable` or two label vectors. Two
    single-group partitions score 1; if exactly one is single-group the
    score is 0.
    """
    t = _as_table(table, truth)
    n = t.counts.astype(np.float64)
    N = float(t.total)
    b = t.row_sums.astype(np.float64)
    d = t.col_sums.astype(np.float64)
    hb = -np.sum(b * np.log(b / N))
    hd = -np.sum(d * np.log(d / N))
    if len(b) == len(d) == np.count_nonzero(n):
        # same partition up to relabeling
        return 1.0
    denom = hb + hd
    if denom <= 0.0:
        return 0.0
    i, j = np.nonzero(n)
    mi = np.sum(n[i, j] * np.log(n[i, j] * N / (b[i] * d[j])))
    return float(min(max(2.0 * mi / denom, 0.0), 1.0))


def _pairs(x) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.ravel(x))


def ari(table, truth=None) -> float:
    """Adjusted Rand index with exact integer pair counts.

    Returns 1 when the index is undefined (both partitions single-group or
    both all-singletons, which means they coincide) and for N < 2.
    """
    t = _as_table(table, truth)
    total = _pairs([t.total])
    if total == 0:
        return 1.0
    index = _pairs(t.counts)
    sb, sd = _pairs(t.row_sums), _pairs(t.col_sums)
    expected = Fraction(sb * sd, total)
    maximum = Fraction(sb + sd, 2)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))
