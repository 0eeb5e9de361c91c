"""
Entropy, equipartition and typical strings
==========================================
"""

import math

from rbseq import dist, generate
from rbseq.likelihood import (
    entropy_summary,
    log_likelihood,
    max_entropy_bound,
    typical_set_count,
)
from rbseq.inverse import figure_spec, invert_spec

models = {
    "fair coin": dist.geometric(2.0),
    "gamma=2": invert_spec(figure_spec("polynomial", 2.0), 20_000).distribution,
    "beta=1/2": invert_spec(figure_spec("stretched", 0.5), 20_000).distribution,
}

# all three have mean waiting time 2, so the geometric law has the most entropy
print(f"entropy bound at mean 2: {max_entropy_bound(2.0):.6f}")
for name, w in models.items():
    e = entropy_summary(w, 10_000)
    print(f"{name:10s} H(p) {e.H_p:.6f}  rate {e.entropy_rate:.6f}  H(pi_t)/t {e.H_pi_t / e.t:.6f}")

# -(mu/t) ln pi_t settles at H(p) along a single sampled path
w = models["gamma=2"]
hp = entropy_summary(w, 1).H_p
seq = generate(w, 10**6, seed=3)
for t in (10**3, 10**4, 10**5, 10**6):
    ll = log_likelihood(w, seq.bits[:t])
    print(f"t={t:>8d}  statistic {ll.aep_statistic:.4f}  (H(p) = {hp:.4f})")

# typical strings of length 16: fewer than 2^16, more than the lower bound
for eps in (0.1, 0.3, 0.6):
    ts = typical_set_count(w, 16, eps)
    print(f"eps={eps}: {ts.count} of {2**16} strings, mass {ts.mass:.3f}, "
          f"bound e^((t/mu)(H-eps)) = {ts.lower_bound:.0f}")
print(f"(fair coin: every string is typical, ln 2^16 = {16 * math.log(2):.3f})")
