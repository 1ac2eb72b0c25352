"""Entropic optimal transport between labeled and unlabeled points.

The solver works on the dual potentials ``f, g`` instead of the scalings
``u = exp(f / eps)``, ``v = exp(g / eps)`` so that small ``eps`` does not
underflow the Gibbs kernel.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import Dataset, DiscreteMeasure, PartitionState, TransportPlan

MAX_BRUTEFORCE = 8
CHECK_EVERY = 10
EPS_SCALING_FACTOR = 0.5
STAGE_TOL = 1e-3
NEWTON_AFTER = 200
NEWTON_STEP_CAP = 4.0
ABSORB_BOUND = 1e8


class NotConverged(RuntimeError):
    """Sinkhorn ran out of iterations before meeting the feasibility tolerance."""

    def __init__(self, violation: float, iterations: int, tol: float):
        super().__init__(
            f"marginal L1 violation {violation:.3e} > {tol:.1e} after {iterations} iterations"
        )
        self.violation = violation
        self.iterations = iterations
        self.tol = tol


class DimensionMismatch(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Nonnegative cost matrix normalized so its largest entry is 1.

    ``scale`` is the maximum of the raw costs (1 for an all-zero matrix);
    ``costs * scale`` recovers the raw values.
    """

    costs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=np.float64))

    @classmethod
    def normalized(cls, raw) -> "CostMatrix":
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2:
            raise DimensionMismatch(f"cost must be 2-D, got shape {raw.shape}")
        if not np.all(np.isfinite(raw)) or np.any(raw < 0):
            raise ValueError("costs must be finite and nonnegative")
        top = float(raw.max()) if raw.size else 0.0
        if top == 0.0:
            return cls(np.zeros_like(raw), 1.0)
        return cls(raw / top, top)

    @property
    def shape(self) -> tuple[int, int]:
        return self.costs.shape


@dataclass(frozen=True)
class SinkhornConfig:
    epsilon: float = 0.005
    max_iterations: int = 10_000
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.feasibility_tol > 0:
            raise ValueError(f"feasibility_tol must be > 0, got {self.feasibility_tol}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


def squared_euclidean_cost(dataset: Dataset, state: PartitionState) -> CostMatrix:
    """Squared distances from labeled rows (matrix rows) to unlabeled rows (columns).

    Computed as an explicit difference rather than through the
    ``|x|^2 + |y|^2 - 2 x.y`` expansion, which can go slightly negative.
    """
    XL = dataset.features[state.labeled_idx]
    XU = dataset.features[state.unlabeled_idx]
    diff = XL[:, None, :] - XU[None, :, :]
    return CostMatrix.normalized(np.einsum("ijk,ijk->ij", diff, diff))


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.exp(x - m).sum(axis=axis))


def _lse_sweep(neg_C, g, log_a, log_b, eps):
    f = eps * (log_a - _lse(neg_C + g[None, :] / eps, axis=1))
    g = eps * (log_b - _lse(neg_C + f[:, None] / eps, axis=0))
    return f, g


def _safe_div(w, s):
    return np.divide(w, s, out=np.zeros_like(w), where=s > 0)


def _drifted(x) -> bool:
    return bool(x.size) and (x.max() > ABSORB_BOUND or x.min() < 1.0 / ABSORB_BOUND)


def _violation(plan, a, b) -> float:
    rows = np.abs(plan.sum(axis=1) - a).sum()
    cols = np.abs(plan.sum(axis=0) - b).sum()
    return float(max(rows, cols))


def _eps_schedule(eps: float) -> list[float]:
    # costs are normalized to [0, 1], so annealing starts at eps = 1
    stages = []
    e = 1.0
    while e > eps:
        stages.append(e)
        e *= EPS_SCALING_FACTOR
    return stages + [eps]


def _newton_step(C, f, g, a, b, eps):
    """One damped Newton step on the dual, the last entry of ``g`` held fixed.

    The negative Hessian of the dual is ``[[diag(P 1), P], [P^T, diag(P^T 1)]] / eps``;
    it is solved after symmetric diagonal scaling. The step is capped at
    ``NEWTON_STEP_CAP * eps`` per coordinate and halved until the marginal
    violation decreases.
    """
    l, u = C.shape
    P = np.exp((f[:, None] + g[None, :] - C) / eps)
    r, c = P.sum(axis=1), P.sum(axis=0)
    grad = np.concatenate([a - r, (b - c)[:-1]])
    M = np.zeros((l + u - 1, l + u - 1))
    M[:l, :l] = np.diag(r)
    M[l:, l:] = np.diag(c[:-1])
    M[:l, l:] = P[:, :-1]
    M[l:, :l] = P[:, :-1].T
    d = np.sqrt(np.diag(M))
    Ms = M / d[:, None] / d[None, :]
    Ms[np.diag_indices_from(Ms)] += 1e-12
    step = eps * np.linalg.solve(Ms, grad / d) / d
    big = np.abs(step).max()
    if big > NEWTON_STEP_CAP * eps:
        step *= NEWTON_STEP_CAP * eps / big
    v0 = np.abs(grad).sum() + abs(b[-1] - c[-1])
    t = 1.0
    for _ in range(60):
        f1 = f + t * step[:l]
        g1 = g.copy()
        g1[:-1] += t * step[l:]
        P1 = np.exp((f1[:, None] + g1[None, :] - C) / eps)
        v1 = np.abs(P1.sum(axis=1) - a).sum() + np.abs(P1.sum(axis=0) - b).sum()
        if v1 < v0:
            return f1, g1
        t *= 0.5
    return f, g


def sinkhorn(
    cost: CostMatrix,
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    cfg: SinkhornConfig = SinkhornConfig(),
    init_g: np.ndarray | None = None,
) -> TransportPlan:
    """Entropic OT plan between ``a`` and ``b`` for the (normalized) ``cost``.

    The plan is ``exp((f_i + g_j - C_ij) / eps)`` for dual potentials
    ``f, g`` reached by the fixed point ``u = a / (K v)``,
    ``v = b / (K^T u)``, ``K = exp(-C / eps)``, starting from ``g = 0``.
    Iterates are kept stable in the log domain: a log-sum-exp sweep

        f = eps * log a - eps * LSE_j((g_j - C_ij) / eps)
        g = eps * log b - eps * LSE_i((f_i - C_ij) / eps)

    re-centres the kernel on the current potentials, cheap scaling updates
    run against that kernel, and the scalings are absorbed back into
    ``f, g`` (followed by a fresh sweep) whenever they leave
    ``[1 / ABSORB_BOUND, ABSORB_BOUND]``.

    Two accelerations leave the fixed point unchanged:

    * when ``cfg.epsilon < 1`` and no ``init_g`` is given, the potentials are
      warm-started on the regularizations ``1, 1/2, 1/4, ...`` (each solved
      to ``STAGE_TOL``);
    * if the final stage has not converged after ``NEWTON_AFTER`` iterations
      (typical for well separated clusters, whose mutual kernel entries are
      tiny), the remaining budget is spent on damped Newton steps on the dual
      potentials, each followed by one Sinkhorn sweep.

    ``init_g`` replaces the zero starting value of ``g``, typically the
    column potentials of a previous, closely related problem.

    Feasibility is checked every ``CHECK_EVERY`` iterations;
    ``iterations_used`` counts Sinkhorn sweeps and Newton steps over all
    stages.

    Raises
    ------
    DimensionMismatch
        If ``cost`` is not ``len(a) x len(b)``.
    NotConverged
        If either marginal L1 violation still exceeds ``cfg.feasibility_tol``
        after ``cfg.max_iterations`` iterations in total.
    """
    C = cost.costs
    if C.shape != (len(a), len(b)):
        raise DimensionMismatch(f"cost shape {C.shape} vs marginals ({len(a)}, {len(b)})")

    if not np.any(C):
        plan = np.outer(a.weights, b.weights)
        return TransportPlan(plan, a, b, 0.0, 0, None)

    with np.errstate(divide="ignore"):
        log_a = np.log(a.weights)
        log_b = np.log(b.weights)
    newton_ok = bool(np.all(a.weights > 0) and np.all(b.weights > 0))
    f = np.zeros(C.shape[0])
    if init_g is None:
        g = np.zeros(C.shape[1])
        stages = _eps_schedule(cfg.epsilon)
    else:
        g = np.array(init_g, dtype=np.float64)
        if g.shape != (C.shape[1],):
            raise DimensionMismatch(f"init_g has shape {g.shape}, expected ({C.shape[1]},)")
        stages = [cfg.epsilon]

    sa, sb = a.weights > 0, b.weights > 0
    it = 0
    violation = np.inf
    for stage, eps in enumerate(stages):
        final = stage == len(stages) - 1
        tol = cfg.feasibility_tol if final else max(cfg.feasibility_tol, STAGE_TOL)
        neg_C = -C / eps
        stage_it = 0
        # scaling iterations run against the kernel re-centred on (f, g);
        # u and v are folded back into the potentials once they drift
        f, g = _lse_sweep(neg_C, g, log_a, log_b, eps)
        K = np.exp(neg_C + (f[:, None] + g[None, :]) / eps)
        u, v = sa.astype(float), sb.astype(float)
        it += 1
        stage_it += 1
        while True:
            if it % CHECK_EVERY == 0 or it >= cfg.max_iterations or stage_it > NEWTON_AFTER:
                violation = _violation(u[:, None] * K * v[None, :], a.weights, b.weights)
                if violation <= tol or it >= cfg.max_iterations:
                    break
            it += 1
            stage_it += 1
            if final and newton_ok and stage_it > NEWTON_AFTER:
                f, g = f + eps * np.log(u), g + eps * np.log(v)
                f, g = _newton_step(C, f, g, a.weights, b.weights, eps)
                f, g = _lse_sweep(neg_C, g, log_a, log_b, eps)
                K = np.exp(neg_C + (f[:, None] + g[None, :]) / eps)
                u, v = sa.astype(float), sb.astype(float)
                continue
            u = _safe_div(a.weights, K @ v)
            v = _safe_div(b.weights, K.T @ u)
            if _drifted(u[sa]) or _drifted(v[sb]):
                with np.errstate(divide="ignore"):
                    f, g = f + eps * np.log(u), g + eps * np.log(v)
                f, g = _lse_sweep(neg_C, g, log_a, log_b, eps)
                K = np.exp(neg_C + (f[:, None] + g[None, :]) / eps)
                u, v = sa.astype(float), sb.astype(float)
        if violation > tol:
            raise NotConverged(violation, it, cfg.feasibility_tol)
        with np.errstate(divide="ignore"):
            f, g = f + eps * np.log(u), g + eps * np.log(v)

    plan = u[:, None] * K * v[None, :]
    return TransportPlan(plan, a, b, float(np.sum(plan * C)), it, (f, g))


def exact_ot_bruteforce(cost: CostMatrix, n: int | None = None) -> tuple[float, TransportPlan]:
    """Exact OT between two uniform measures of equal size by enumerating permutations.

    With uniform marginals on ``n`` points each, an optimal plan is a
    permutation matrix scaled by ``1/n``, so the minimum over all ``n!``
    permutations is the LP optimum. Ties keep the lexicographically first
    permutation.

    Returns
    -------
    optimal_cost : float
        ``<plan, C>`` for the normalized cost.
    plan : TransportPlan
    """
    C = cost.costs
    if n is None:
        n = C.shape[0]
    if C.shape != (n, n):
        raise DimensionMismatch(f"need a square {n}x{n} cost, got {C.shape}")
    if n > MAX_BRUTEFORCE:
        raise TooLarge(f"n={n} exceeds brute-force limit {MAX_BRUTEFORCE}")

    rows = np.arange(n)
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        total = C[rows, perm].sum()
        if total < best:
            best, best_perm = total, perm
    plan = np.zeros((n, n))
    plan[rows, best_perm] = 1.0 / n
    u = DiscreteMeasure.uniform(n)
    optimal = float(best / n)
    return optimal, TransportPlan(plan, u, u, optimal, 0)
