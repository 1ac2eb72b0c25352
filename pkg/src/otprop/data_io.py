"""CSV datasets, standardization, reproducible labeled/unlabeled splits and output files.

CSV dialect everywhere: comma separator, ``.`` decimal point, UTF-8, one
header row.

Splits are driven by :class:`SplitMix64` rather than numpy's generators so
that a (dataset, fraction, seed) triple maps to the same split on any
platform and numpy version, and can be reproduced outside Python.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import UNLABELED, Dataset, OTPropError, PartitionState, PropagationTrace

MASK64 = (1 << 64) - 1
MAX_SPLIT_ATTEMPTS = 100
BUILTIN_DATASETS = {"iris": "species", "heart": "diagnosis", "ionosphere": "radar_return"}


class ParseError(OTPropError):
    def __init__(self, row: int, column: str, value: str = ""):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a finite number")
        self.row = row
        self.column = column


class MissingColumn(OTPropError):
    def __init__(self, column: str):
        super().__init__(f"label column {column!r} not found in header")
        self.column = column


class EmptyDataset(OTPropError):
    pass


class InfeasibleSplit(OTPropError):
    pass


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014).

    State advances by ``0x9E3779B97F4A7C15``; each output is the state passed
    through the xor-shift-multiply finalizer below.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle in place, swapping from the last slot down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


@dataclass(frozen=True)
class SplitSpec:
    labeled_fraction: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.labeled_fraction < 1.0:
            raise ValueError(f"labeled_fraction must lie in (0, 1), got {self.labeled_fraction}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(row, column, text) from None
    if not math.isfinite(v):
        raise ParseError(row, column, text)
    return v


def load_csv(path, label_column: str) -> Dataset:
    """Read a dataset whose non-label columns are all numeric.

    Class ids follow the order in which label values first appear. An empty
    label cell leaves that row unlabeled. ``ParseError`` rows are 1-based
    data-row numbers (the header is row 0).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path}: no header row")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingColumn(label_column)
        li = header.index(label_column)
        fcols = [i for i in range(len(header)) if i != li]

        rows, labels, names = [], [], {}
        for r, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(r, header[min(len(rec), len(header) - 1)], ",".join(rec))
            rows.append([_parse_float(rec[i].strip(), r, header[i]) for i in fcols])
            name = rec[li].strip()
            if name:
                labels.append(names.setdefault(name, len(names)))
            else:
                labels.append(UNLABELED)
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    return Dataset(
        features=np.array(rows, dtype=np.float64).reshape(len(rows), len(fcols)),
        labels=np.array(labels, dtype=np.int64),
        class_names=tuple(names),
        feature_names=tuple(header[i] for i in fcols),
    )


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write ``dataset`` so that :func:`load_csv` reads it back identically.

    Floats are written with ``repr`` (shortest round-trip form). Class ids
    must appear in first-appearance order for the round trip to preserve them.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [label_column])
        for i, x in enumerate(dataset.features):
            y = UNLABELED if dataset.labels is None else dataset.labels[i]
            name = "" if y == UNLABELED else dataset.class_names[y]
            w.writerow([repr(float(v)) for v in x] + [name])


def builtin_path(name: str) -> Path:
    """Path of a bundled CSV (``iris``, ``heart`` or ``ionosphere``)."""
    if name not in BUILTIN_DATASETS:
        raise KeyError(f"unknown dataset {name!r}; choose from {sorted(BUILTIN_DATASETS)}")
    return Path(str(resources.files("otprop") / "datasets" / f"{name}.csv"))


def load_builtin(name: str) -> Dataset:
    return load_csv(builtin_path(name), BUILTIN_DATASETS[name])


def standardize(dataset: Dataset) -> Dataset:
    """Zero mean and unit population standard deviation per column.

    Constant columns become all-zero.
    """
    X = dataset.features
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    Z = np.zeros_like(X)
    ok = sd > 0
    Z[:, ok] = (X[:, ok] - mu[ok]) / sd[ok]
    return Dataset(Z, dataset.labels, dataset.class_names, dataset.feature_names)


def make_split(dataset: Dataset, spec: SplitSpec) -> PartitionState:
    """Hide most ground-truth labels, keeping about ``labeled_fraction`` of rows.

    Stratified mode keeps ``ceil(fraction * size)`` rows of every class.
    Otherwise ``ceil(fraction * N)`` rows are drawn at random, redrawing (up
    to ``MAX_SPLIT_ATTEMPTS`` times) until every class is represented. Both
    index lists are returned sorted.

    Raises
    ------
    InfeasibleSplit
        If ``fraction * N < K``, if no row would stay unlabeled, or if no draw
        represents every class.
    """
    if not dataset.fully_labeled:
        raise InfeasibleSplit("splits need a fully labeled dataset")
    N, K = dataset.n_samples, dataset.n_classes
    y = dataset.labels
    if spec.labeled_fraction * N < K:
        raise InfeasibleSplit(
            f"fraction {spec.labeled_fraction} of {N} rows cannot cover {K} classes"
        )
    rng = SplitMix64(spec.seed)

    if spec.stratified:
        chosen = []
        for k in range(K):
            members = np.flatnonzero(y == k).tolist()
            if not members:
                raise InfeasibleSplit(f"class {k} has no rows")
            take = math.ceil(spec.labeled_fraction * len(members))
            chosen.extend(rng.shuffle(members)[:take])
    else:
        take = math.ceil(spec.labeled_fraction * N)
        for _ in range(MAX_SPLIT_ATTEMPTS):
            chosen = rng.shuffle(list(range(N)))[:take]
            if len(set(y[chosen].tolist())) == K:
                break
        else:
            raise InfeasibleSplit(f"no draw in {MAX_SPLIT_ATTEMPTS} attempts represented every class")

    labeled = np.sort(np.array(chosen, dtype=np.int64))
    if labeled.size >= N:
        raise InfeasibleSplit("split leaves no unlabeled rows")
    unlabeled = np.setdiff1d(np.arange(N), labeled)
    return PartitionState(labeled, y[labeled], unlabeled)


def fingerprint(path) -> str:
    """SHA-256 of the file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


PREDICTION_COLUMNS = (
    "row_index",
    "predicted_label",
    "certainty_at_assignment",
    "iteration_assigned",
    "origin",
)


def write_predictions(path, dataset: Dataset, state: PartitionState) -> None:
    """One row per dataset row, sorted by ``row_index``.

    Seed rows report certainty 1 and iteration 0.
    """
    order = np.argsort(state.labeled_idx, kind="stable")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for p in order:
            w.writerow([
                int(state.labeled_idx[p]),
                dataset.class_names[state.labels[p]],
                repr(float(state.certainty[p])),
                int(state.iteration[p]),
                state.origin[p],
            ])


def read_predictions(path) -> dict[int, str]:
    """``row_index -> predicted_label`` from a predictions CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"row_index", "predicted_label"} - set(reader.fieldnames or ())
        if missing:
            raise MissingColumn(sorted(missing)[0])
        out = {}
        for r, rec in enumerate(reader, start=1):
            try:
                idx = int(rec["row_index"])
            except ValueError:
                raise ParseError(r, "row_index", rec["row_index"]) from None
            if idx in out:
                raise OTPropError(f"duplicate row_index {idx}")
            out[idx] = rec["predicted_label"]
    return out


def write_trace(path, trace: PropagationTrace, config: dict) -> None:
    payload = {"config": config, "m0": trace.m0, "n0": trace.n0, "iterations": trace.to_records()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
