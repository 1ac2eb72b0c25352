"""Entropic transport between two small point clouds, and how eps shapes the plan."""

import numpy as np

from otprop import CostMatrix, DiscreteMeasure, SinkhornConfig, exact_ot_bruteforce, sinkhorn

np.set_printoptions(precision=4, suppress=True)

# Four source points on a line, four targets shifted by 0.3
src = np.array([0.0, 1.0, 2.0, 3.0])
dst = src + 0.3
raw = (src[:, None] - dst[None, :]) ** 2
cost = CostMatrix.normalized(raw)  # largest entry becomes 1
u = DiscreteMeasure.uniform(4)

# Large eps blurs the plan toward the product measure; small eps
# approaches a permutation (here the identity, scaled by 1/4).
for eps in (1.0, 0.1, 0.01, 0.001):
    p = sinkhorn(cost, u, u, SinkhornConfig(epsilon=eps))
    print(f"eps={eps:<6} cost={p.transport_cost:.6f} sweeps={p.iterations_used}")
    print(p.plan)

best, plan = exact_ot_bruteforce(cost)
print("exact optimum over all permutations:", best)

# Marginals are met to the configured tolerance even when they are uneven
a = DiscreteMeasure(np.array([0.7, 0.1, 0.1, 0.1]))
p = sinkhorn(cost, a, u)
print("row sums", p.plan.sum(axis=1), "column sums", p.plan.sum(axis=0))
print("L1 violations", p.marginal_violation())
