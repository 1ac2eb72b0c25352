"""Incremental label propagation through entropic transport plans.

Each outer iteration transports a measure on the labeled points onto the
uniform measure on the unlabeled points, reads class probabilities off the
column-normalized plan, and pseudo-labels every unlabeled point whose
entropy-based certainty clears the threshold. When nobody clears it, the
threshold is lowered just enough to admit the most certain point(s) for that
iteration only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AffinityMatrix,
    Dataset,
    DiscreteMeasure,
    IterationRecord,
    LabelMatrix,
    PartitionState,
    PropagationTrace,
    TransportPlan,
    validate_partition,
)
from .ot_solver import SinkhornConfig, sinkhorn, squared_euclidean_cost

log = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-9
MIN_CLASS_MASS = 0.5
WEIGHTINGS = ("class_matched", "uniform")


class DegenerateColumn(ArithmeticError):
    pass


@dataclass(frozen=True)
class OtpConfig:
    """Propagation settings.

    ``labeled_weights`` selects the measure put on the labeled points at
    each iteration: ``"uniform"`` gives every labeled point mass ``1/l``;
    ``"class_matched"`` (see :func:`labeled_measure`) rebalances class masses
    toward the expected class make-up of the points still unlabeled.
    ``warm_start`` seeds each transport solve with the column potentials of
    the previous iteration; the solution is the same up to the solver
    tolerance.
    """

    alpha: float = 0.8
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    labeled_weights: str = "class_matched"
    warm_start: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.labeled_weights not in WEIGHTINGS:
            raise ValueError(f"labeled_weights must be one of {WEIGHTINGS}")


@dataclass(frozen=True, eq=False)
class CertaintyScores:
    scores: np.ndarray

    def __len__(self) -> int:
        return self.scores.size


def labeled_measure(
    state: PartitionState, class_prior: np.ndarray, mode: str = "class_matched"
) -> DiscreteMeasure:
    """Weights of the labeled points for the next transport problem.

    With ``mode="class_matched"`` class ``k`` receives total mass
    proportional to ``max(prior_k * (l + u) - l_k, MIN_CLASS_MASS)``, the
    number of class-``k`` points expected to remain unlabeled, spread evenly
    over its ``l_k`` labeled points. Transport is balanced, so every unit of
    labeled mass must land somewhere in X_U; with plain uniform weights a
    class that has been mostly pseudo-labeled already would push its surplus
    onto points of other classes.
    """
    if mode == "uniform":
        return DiscreteMeasure.uniform(state.n_labeled)
    counts = np.bincount(state.labels, minlength=len(class_prior))
    total = state.n_labeled + state.n_unlabeled
    remaining = np.maximum(class_prior * total - counts, MIN_CLASS_MASS)
    w = (remaining / remaining.sum())[state.labels] / counts[state.labels]
    return DiscreteMeasure(w / w.sum())


def affinity_from_plan(plan: TransportPlan | np.ndarray) -> AffinityMatrix:
    """Column-normalize a transport plan.

    Column ``j`` of the result is the distribution over labeled points of
    the mass received by unlabeled point ``j``.
    """
    gamma = plan.plan if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    colsum = gamma.sum(axis=0)
    if np.any(colsum < 1e-300):
        bad = np.flatnonzero(colsum < 1e-300).tolist()
        raise DegenerateColumn(f"transport plan columns {bad} carry no mass")
    return AffinityMatrix(gamma / colsum[None, :])


def label_matrix(affinity: AffinityMatrix, state: PartitionState, n_classes: int) -> LabelMatrix:
    """Class probabilities per unlabeled point: affinity mass summed over each class.

    Rows of ``affinity`` must follow ``state.labeled_idx``.
    """
    W = affinity.weights
    if W.shape[0] != state.n_labeled:
        raise ValueError(f"affinity has {W.shape[0]} rows for {state.n_labeled} labeled points")
    onehot = np.zeros((state.n_labeled, n_classes))
    onehot[np.arange(state.n_labeled), state.labels] = 1.0
    return LabelMatrix(W.T @ onehot)


def certainty_scores(U: LabelMatrix | np.ndarray) -> CertaintyScores:
    """``1 - H / log2(K)`` per row, with ``H`` the base-2 Shannon entropy.

    ``0 log 0`` is taken as 0. Results are clipped to [0, 1] against
    rounding.
    """
    P = U.probs if isinstance(U, LabelMatrix) else np.asarray(U, dtype=np.float64)
    K = P.shape[1]
    if K < 2:
        raise ValueError("certainty needs at least 2 classes")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log2(P), 0.0)
    H = -terms.sum(axis=1)
    return CertaintyScores(np.clip(1.0 - H / np.log2(K), 0.0, 1.0))


def assign_pseudo_labels(
    U: LabelMatrix | np.ndarray, scores: CertaintyScores | np.ndarray, alpha: float
) -> list[tuple[int, int]]:
    """``(position, class)`` for every unlabeled position with score strictly above ``alpha``.

    The class is the argmax of the row, ties going to the lowest class id.
    """
    P = U.probs if isinstance(U, LabelMatrix) else np.asarray(U)
    s = scores.scores if isinstance(scores, CertaintyScores) else np.asarray(scores)
    if len(P) != len(s):
        raise ValueError(f"{len(P)} label rows for {len(s)} scores")
    picked = np.flatnonzero(s > alpha)
    # np.argmax returns the first maximum, i.e. the lowest class id
    classes = np.argmax(P[picked], axis=1) if picked.size else np.array([], dtype=int)
    return [(int(j), int(k)) for j, k in zip(picked, classes)]


def alpha_rescue(scores: CertaintyScores | np.ndarray, alpha: float) -> list[int]:
    """Positions admitted when the threshold drops by ``min_j (alpha - s_j)``.

    The lowered threshold equals the largest score, so the returned positions
    are exactly the ones tied at that maximum. Callers label them and keep
    using the original ``alpha`` afterwards.
    """
    s = scores.scores if isinstance(scores, CertaintyScores) else np.asarray(scores)
    if s.size == 0:
        raise ValueError("no scores to rescue from")
    # alpha - min(alpha - s) is max(s) in exact arithmetic; compare against
    # max(s) directly since the rounded subtraction can land just above it
    return np.flatnonzero(s == s.max()).tolist()


def run_otp(
    dataset: Dataset,
    seed_state: PartitionState,
    cfg: OtpConfig = OtpConfig(),
    check: bool = True,
) -> tuple[PartitionState, PropagationTrace]:
    """Propagate labels until no unlabeled point remains.

    Parameters
    ----------
    dataset : Dataset
        Only ``features`` and ``n_classes`` are used; ground-truth labels of
        unlabeled rows are never read.
    seed_state : PartitionState
        Initial split; validated before the first iteration. Its class
        frequencies serve as the class prior for ``"class_matched"`` weights.
    cfg : OtpConfig
    check : bool
        Assert the stochasticity of the affinity and label matrices at every
        iteration and the size bookkeeping at the end.

    Returns
    -------
    state : PartitionState
        Final split, with ``unlabeled_idx`` empty. Seed rows come first, in
        their original order, followed by pseudo-labeled rows in order of
        assignment.
    trace : PropagationTrace

    Raises
    ------
    NotConverged
        Propagated from the transport solver.
    """
    state = validate_partition(dataset, seed_state)
    K = dataset.n_classes
    prior = np.bincount(state.labels, minlength=K) / state.n_labeled
    trace = PropagationTrace(m0=state.n_labeled, n0=state.n_unlabeled)

    t = 0
    warm = None
    while state.n_unlabeled > 0:
        t += 1
        cost = squared_euclidean_cost(dataset, state)
        plan = sinkhorn(
            cost,
            labeled_measure(state, prior, cfg.labeled_weights),
            DiscreteMeasure.uniform(state.n_unlabeled),
            cfg.sinkhorn,
            init_g=warm,
        )
        W = affinity_from_plan(plan)
        U = label_matrix(W, state, K)
        s = certainty_scores(U)
        if check:
            assert np.allclose(W.weights.sum(axis=0), 1.0, rtol=0, atol=STOCHASTIC_TOL)
            assert np.allclose(U.probs.sum(axis=1), 1.0, rtol=0, atol=STOCHASTIC_TOL)

        picks = assign_pseudo_labels(U, s, cfg.alpha)
        alpha_eff = cfg.alpha
        rescued = not picks
        if rescued:
            positions = alpha_rescue(s, cfg.alpha)
            alpha_eff = float(s.scores[positions[0]])
            classes = np.argmax(U.probs[positions], axis=1)
            picks = [(j, int(k)) for j, k in zip(positions, classes)]

        positions = [j for j, _ in picks]
        if plan.potentials is not None and cfg.warm_start:
            # column potentials scale with log(1/u); shift for the smaller X_U
            keep = np.ones(state.n_unlabeled, dtype=bool)
            keep[positions] = False
            n_left = int(keep.sum())
            if n_left:
                shift = cfg.sinkhorn.epsilon * np.log(state.n_unlabeled / n_left)
                warm = plan.potentials[1][keep] + shift
        state = state.advance(positions, [k for _, k in picks], s.scores[positions], t)
        trace.iterations.append(
            IterationRecord(
                t=t,
                m_t=state.n_labeled,
                n_t=state.n_unlabeled,
                zeta_t=len(picks),
                alpha_effective=alpha_eff,
                rescue_applied=rescued,
            )
        )
        log.debug(
            "iteration %d: labeled %d (rescue=%s), %d left, sinkhorn iterations %d",
            t, len(picks), rescued, state.n_unlabeled, plan.iterations_used,
        )

    if check:
        trace.check()
    return state, trace
