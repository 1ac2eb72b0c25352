"""NMI and ARI on a few hand-made partitions."""

from otprop import ari, contingency, nmi

truth = [0, 0, 0, 1, 1, 1, 2, 2, 2]
cases = {
    "identical": truth,
    "renamed": [2, 2, 2, 0, 0, 0, 1, 1, 1],
    "one mistake": [0, 0, 1, 1, 1, 1, 2, 2, 2],
    "merged 1+2": [0, 0, 0, 1, 1, 1, 1, 1, 1],
    "one cluster": [0] * 9,
    "crosswise": [0, 1, 2, 0, 1, 2, 0, 1, 2],
}
for name, pred in cases.items():
    print(f"{name:12s} NMI={nmi(pred, truth):.4f} ARI={ari(pred, truth):+.4f}")

# Both metrics are functions of the contingency table alone
t = contingency(cases["one mistake"], truth)
print(t.counts)
print(nmi(t), ari(t))
