"""
How far out can the waiting-time law be estimated?
==================================================

One sequence of length 10^6 from the gamma = 2 model. Small waiting times are
seen often and their estimates sit inside the 2-sigma band; large ones are so
rare that the count is zero or one and the relative error explodes.
"""

import numpy as np

from rbseq import generate
from rbseq.estimators import estimate_waiting_time
from rbseq.inverse import figure_spec, invert_spec

w = invert_spec(figure_spec("polynomial", 2.0), 20_000).distribution
t = 10**6
seq = generate(w, t, seed=0)
print(f"{seq.renewal_count} renewals in {t} steps, rough reach 1.56 t^(1/4) = {1.56 * t**0.25:.0f}")

print("\n   s     p(s)      estimate   rel err  inside band")
for s in (1, 2, 5, 10, 20, 40, 80, 120, 160, 200):
    r = estimate_waiting_time(seq, w, s)
    rel = abs(r.estimate - r.true_value) / r.true_value
    inside = abs(r.estimate - r.true_value) <= r.half_width
    print(f"{s:4d}  {r.true_value:.3e}  {r.estimate:.3e}  {rel:7.3f}  {inside}")

# the band covers the truth about 95% of the time at any fixed s, yet the
# relative width sqrt(v_s / t) / p(s) grows without bound as p(s) shrinks
s = np.arange(1, 201)
rel_width = np.array([estimate_waiting_time(seq, w, k).half_width for k in s]) / w.density[s]
print("\nfirst s where the band is wider than 50% of p(s):", int(s[np.argmax(rel_width > 0.5)]))
