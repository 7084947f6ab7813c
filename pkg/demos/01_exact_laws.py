"""Exact law of Z_n and of the conditioned variable Y_n = (Z_n | Z_n > 0).

Run: python3 demos/01_exact_laws.py
"""

import numpy as np

import gwve

env = gwve.symmetric_example(0.5)
n, K = 50, 1 << 12

law = gwve.law_of_Zn(env, n, K)
cond, b = gwve.conditional_law(env, n, K)
k = np.arange(K)

print(f"environment: {env.name}, generation n = {n}, truncation K = {K}")
print(f"P[Z_n = 0]          = {law.probs[0]:.6f}")
print(f"P[Z_n > 0]          = {gwve.survival_prob(env, 0, n):.6f}")
print(f"E[Z_n]              = {(k * law.probs).sum():.6f}")
print(f"b_n = E[Y_n]        = {b:.6f}   (check: {(k * cond.probs).sum():.6f})")
print(f"tail mass of Y_n    = {cond.tail_mass:.2e}")
print("first ten P[Y_n = k]:", np.array2string(cond.probs[:10], precision=5))
