"""Moment ledger and rate quantities r_n, s_n with the three bound shapes.

Run: python3 demos/02_rate_bounds.py
"""

import gwve

for env in (gwve.symmetric_example(0.5), gwve.poisson_increasing(), gwve.linear_fractional_constant()):
    rep = gwve.rate_bound_report(env, 1000)
    print(f"\n{env.name}")
    print(f"{'n':>6} {'mu*rho':>10} {'r_n':>10} {'s_n':>10} {'thm4':>10} {'thm5':>10} {'cor':>10}")
    for i in (0, 8, 98, 998):
        print(
            f"{rep.n[i]:6d} {rep.mu_rho[i]:10.4g} {rep.r_n[i]:10.4g} {rep.s_n[i]:10.4g}"
            f" {rep.thm4_shape[i]:10.4g} {rep.thm5_shape[i]:10.4g} {rep.cor_shape[i]:10.4g}"
        )
    for w in rep.warnings:
        print("  warning:", w)
