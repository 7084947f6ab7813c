"""Exact d_W(Y_n / b_n, Exp(1)) against n, compared with the bound shape.

For the symmetric example with delta_n = n^-1/2 the distance should decay
like n^-1/2, so dw * sqrt(n) stays bounded.

Run: python3 demos/03_wasserstein_rates.py
"""

import math

import gwve
from gwve.exact import conditional_law_auto

env = gwve.symmetric_example(0.5)
track = gwve.moment_sequences(env, 400)
r = gwve.rn_batch(track)
print(f"{'n':>5} {'K':>7} {'d_W':>10} {'thm4 shape':>11} {'d_W*sqrt(n)':>12}")
for n in (25, 50, 100, 200, 400):
    pmf, b = conditional_law_auto(env, n)
    dw = gwve.dw_scaled_pmf_vs_exp(pmf, b, mean=b)
    shape = gwve.theorem4_shape(track, r[n], n)
    print(f"{n:5d} {pmf.K:7d} {dw.value:10.5f} {shape:11.5f} {dw.value * math.sqrt(n):12.5f}")
