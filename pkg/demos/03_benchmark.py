"""The benchmark protocol: labeled fractions 5-35%, ten seeds each.

Equivalent to ``otprop bench --data iris --data heart --data ionosphere``.
Takes around half a minute.
"""

import numpy as np

from otprop import SplitSpec, ari, load_builtin, make_split, nmi, run_otp, standardize

for name in ("iris", "heart", "ionosphere"):
    ds = standardize(load_builtin(name))
    print(f"\n{name}: N={ds.n_samples}, d={ds.n_features}, K={ds.n_classes}")
    for frac in (0.05, 0.15, 0.25, 0.35):
        scores = []
        for seed in range(10):
            final, _ = run_otp(ds, make_split(ds, SplitSpec(frac, seed)))
            pred = final.full_labels(ds.n_samples)
            scores.append((nmi(pred, ds.labels), ari(pred, ds.labels)))
        m, s = np.mean(scores, axis=0), np.std(scores, axis=0)
        print(f"  {frac:.2f}  NMI {m[0]:.3f} ± {s[0]:.3f}   ARI {m[1]:.3f} ± {s[1]:.3f}")
