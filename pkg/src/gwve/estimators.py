"""Monte Carlo estimators built on the spine simulator.

Each estimator compares simulated quantities with exact values from
:mod:`gwve.exact` and :mod:`gwve.bounds`:

* :func:`estimate_spine_law` -- law of ``Zdot_n`` against the size-biased law
  of ``Z_n``, and ``Zdot_n`` given ``L_n = 0`` against ``Y_n``;
* :func:`estimate_equilibrium_identity` -- ``R_n - U`` against the
  equilibrium law of ``Y_n`` (Kolmogorov sup-distance);
* :func:`estimate_meanYYe_rhs` -- the spine upper bound on
  ``d_W(Y_n/b_n, Exp)``;
* :func:`check_step_inequalities` -- the four per-split inequalities used to
  turn that bound into explicit rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import moment_sequences
from .environments import Environment
from .exact import (
    composed_shape,
    conditional_law_auto,
    equilibrium_cdf,
    prob_no_left_descendants,
    size_biased_law,
    survival_prob_accurate,
)
from .spine import (
    CHUNK,
    DEFAULT_CAP,
    RejectionBudgetExceeded,
    run_chunks,
    sample_conditioned_right,
    sample_gw_paths,
    sample_spine_batch,
)
from .wasserstein import tv_pmf_vs_array

__all__ = [
    "estimate_spine_law",
    "estimate_equilibrium_identity",
    "estimate_meanYYe_rhs",
    "check_step_inequalities",
    "estimate_mean_zdot",
    "StepReport",
]

# tags separating the random streams of independent sub-simulations
_TAG_SURVIVAL = 7
STEP_IV_CONSTANT = 4.0  # from phi(s) >= phi(1)/2 for every offspring law


def _pad_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size < b.size:
        a, b = b, a
    out = a.copy()
    out[: b.size] += b
    return out


def _mean_se(s1: float, s2: float, M: int) -> tuple[float, float]:
    mean = s1 / M
    var = max(0.0, s2 / M - mean * mean) * M / max(M - 1, 1)
    return mean, math.sqrt(var / M)


# --- spine law -------------------------------------------------------------------


def estimate_spine_law(env: Environment, n: int, M: int, seed: int, workers: int = 1, cap: int = DEFAULT_CAP) -> dict:
    """Histogram of ``Zdot_n`` (all samples and those with ``L_n = 0``) and
    TV distances to the exact size-biased law and to ``Y_n``."""

    def chunk(size, g):
        b = sample_spine_batch(env, n, size, g, cap)
        b.check_invariants()
        z = b.zdot
        cond = z[b.l == 0]
        return np.bincount(z), np.bincount(cond), float(z.sum()), float((z.astype(float) ** 2).sum())

    res = run_chunks(chunk, M, seed, workers)
    hist = np.zeros(1, dtype=np.int64)
    hist_c = np.zeros(1, dtype=np.int64)
    s1 = s2 = 0.0
    for h, hc, a, q in res:
        hist = _pad_add(hist, h)
        hist_c = _pad_add(hist_c, hc)
        s1 += a
        s2 += q
    Y, b_n = conditional_law_auto(env, n)
    sb = size_biased_law(Y, mean=b_n)
    M_c = int(hist_c.sum())
    track = moment_sequences(env, max(n, 1))
    mean, se = _mean_se(s1, s2, M)
    return {
        "n": n,
        "M": M,
        "seed": seed,
        "tv_size_biased": tv_pmf_vs_array(sb, hist / M),
        "tv_size_biased_threshold": 5 / math.sqrt(M),
        "M_conditioned": M_c,
        "tv_conditioned": tv_pmf_vs_array(Y, hist_c / M_c) if M_c else float("nan"),
        "tv_conditioned_threshold": 5 / math.sqrt(M_c) if M_c else float("nan"),
        "p_left_empty": M_c / M,
        "p_left_empty_exact": 1.0 / b_n,
        "mean_zdot": mean,
        "mean_zdot_stderr": se,
        "mean_zdot_exact": 1.0 + (float(track.mu_rho[n]) if n else 0.0),
        "histogram": hist.tolist(),
        "histogram_conditioned": hist_c.tolist(),
    }


def estimate_mean_zdot(env: Environment, n: int, M: int, seed: int) -> tuple[float, float]:
    r = estimate_spine_law(env, n, M, seed)
    return r["mean_zdot"], r["mean_zdot_stderr"]


# --- equilibrium identity ------------------------------------------------------


def ks_gap(samples: np.ndarray, cdf) -> float:
    """Kolmogorov distance between the empirical law of ``samples`` and a
    continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    M = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, M + 1)
    return float(max(np.max(i / M - F), np.max(F - (i - 1) / M)))


def estimate_equilibrium_identity(env: Environment, n: int, M: int, seed: int, workers: int = 1, cap: int = DEFAULT_CAP) -> dict:
    """Sup-distance between the empirical CDF of ``R_n - U`` and the CDF of the
    equilibrium law of ``Y_n``."""

    def chunk(size, g):
        if n == 0:
            r = np.ones(size)
        else:
            r = sample_spine_batch(env, n, size, g, cap).r.astype(float)
        return r - g.random(size)

    x = np.concatenate(run_chunks(chunk, M, seed, workers))
    Y, b_n = conditional_law_auto(env, n)
    gap = ks_gap(x, lambda t: equilibrium_cdf(Y, t, mean=b_n))
    return {"n": n, "M": M, "seed": seed, "ks_gap": gap, "ks_threshold_2_over_sqrtM": 2 / math.sqrt(M)}


# --- spine bound on d_W(Y_n/b_n, Exp) -------------------------------------------


def _split_statistics(env, n, cap, budget):
    """Chunk function returning per-split sums needed by the bound and steps."""

    def chunk(size, g):
        b = sample_spine_batch(env, n, size, g, cap)
        Ac = b.lj != 0
        rt = np.zeros_like(b.rj)
        failures = 0
        for j in range(1, n + 1):
            idx = np.nonzero(Ac[:, j - 1])[0]
            if idx.size:
                draws, fail = sample_conditioned_right(env, j, n, idx.size, g, cap, budget)
                rt[idx, j - 1] = draws
                failures += fail
        X1 = np.where(Ac, rt, 0).astype(float)  # R~ 1_{A^c}
        X2 = np.where(Ac, b.rj, 0).astype(float)  # R 1_{A^c}
        total = (X1 + X2).sum(axis=1)
        return {
            "Ac": Ac.sum(axis=0).astype(float),
            "X1": X1.sum(axis=0),
            "X1sq": (X1**2).sum(axis=0),
            "X2": X2.sum(axis=0),
            "X2sq": (X2**2).sum(axis=0),
            "T": float(total.sum()),
            "Tsq": float((total**2).sum()),
            "failures": failures,
        }

    return chunk


def _merge(parts: list[dict]) -> dict:
    out = {}
    for p in parts:
        for k, v in p.items():
            out[k] = out.get(k, 0) + v
    return out


def estimate_meanYYe_rhs(
    env: Environment, n: int, M: int, seed: int, workers: int = 1, cap: int = DEFAULT_CAP,
    budget: int = 10**4, allow_partial: bool = False,
) -> dict:
    """Estimate ``(2/b_n)(E[U] + sum_j E[R~_{n,j} 1_{A^c} + R_{n,j} 1_{A^c}])``
    with ``E[U] = 1/2`` exactly and ``b_n`` from the exact engine."""
    _, b_n = conditional_law_auto(env, n)
    if n == 0:
        return {"estimate": 1.0 / b_n, "stderr": 0.0, "M": M, "seed": seed, "b_n": b_n, "rejection_failures": 0}
    tot = _merge(run_chunks(_split_statistics(env, n, cap, budget), M, seed, workers))
    mean, se = _mean_se(tot["T"], tot["Tsq"], M)
    out = {
        "estimate": 2.0 / b_n * (0.5 + mean),
        "stderr": 2.0 / b_n * se,
        "M": M,
        "seed": seed,
        "b_n": b_n,
        "rejection_failures": int(tot["failures"]),
        "partial": bool(tot["failures"]),
    }
    if tot["failures"] and not allow_partial:
        raise RejectionBudgetExceeded(
            f"{tot['failures']} conditioned draws exceeded the retry budget", tot["failures"], out
        )
    return out


# --- step inequalities -----------------------------------------------------------


@dataclass
class StepReport:
    n: int
    M: int
    seed: int
    rows: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [r for r in self.rows if r["flag"]]

    def to_dict(self) -> dict:
        return {"n": self.n, "M": self.M, "seed": self.seed, "violations": len(self.violations), "rows": self.rows}


def _row(step, j, lhs, se, rhs, **extra):
    excess = lhs - rhs
    flag = excess > 3 * se if se > 0 else excess > 1e-12 * max(1.0, abs(rhs))
    return {"step": step, "j": j, "lhs": lhs, "stderr": se, "rhs": rhs, "flag": bool(flag), **extra}


def check_step_inequalities(
    env: Environment, n: int, M: int, seed: int, workers: int = 1, cap: int = DEFAULT_CAP, budget: int = 10**4
) -> StepReport:
    """Monte Carlo left sides against exact right sides, per split ``j``:

    * I:   ``E[R~_{n,j} 1_{A^c}] <= mu_n (nu_j/mu_{j-1}) P[A^c_{n,j}]``
    * II:  ``E[R_{n,j} 1_{A^c}] <= (mu_n/mu_j) ((f_j''' + f_j'')/f_j') P[Z^{Q_j}_{n-j} > 0]``
    * III: ``P[A^c_{n,j}] <= (f_j''/f_j') P[Z^{Q_j}_{n-j} > 0]``
    * IV:  ``P[Z^{Q_j}_{n-j} > 0] <= C / (mu_j (rho_{0,n} - rho_{0,j}))`` for
      ``j < n`` (and ``= 1`` at ``j = n``).  Since every shape function obeys
      ``phi(s) >= phi(1)/2``, the identity
      ``P = (mu_j/mu_n + phi_{j,n}(0))^{-1}`` gives ``C = 4``; the identity is
      checked to 1e-9 and the implied constant ``P mu_j (rho_{0,n} - rho_{0,j})``
      is reported.

    ``A_{n,j} = {L_{n,j} = 0}``.  A row is flagged when its estimate exceeds the
    right side by more than three standard errors.
    """
    tr = moment_sequences(env, n)
    tot = _merge(run_chunks(_split_statistics(env, n, cap, budget), M, seed, workers))
    if tot["failures"]:
        raise RejectionBudgetExceeded(f"{tot['failures']} conditioned draws exceeded the retry budget", tot["failures"])
    rep = StepReport(n, M, seed)
    mu = tr.mu
    for j in range(1, n + 1):
        f1, f2, f3 = tr.f1[j - 1], tr.f2[j - 1], tr.f3[j - 1]
        surv = survival_prob_accurate(env, j, n)
        pA_c_exact = 1.0 - prob_no_left_descendants(env, j, n)
        pAc, se_pAc = _mean_se(tot["Ac"][j - 1], tot["Ac"][j - 1], M)
        m1, se1 = _mean_se(tot["X1"][j - 1], tot["X1sq"][j - 1], M)
        m2, se2 = _mean_se(tot["X2"][j - 1], tot["X2sq"][j - 1], M)
        rep.rows.append(_row("I", j, m1, se1, mu[n] * tr.nu_over_mu[j] * pA_c_exact))
        rep.rows.append(_row("II", j, m2, se2, mu[n] / mu[j] * (f3 + f2) / f1 * surv))
        rep.rows.append(_row("III", j, pAc, se_pAc, f2 / f1 * surv, lhs_exact=pA_c_exact))

    # Step IV: simulate the shifted process from generation j to n
    shifted = {}
    for j in range(1, n + 1):
        sub = env.shift(j)

        def chunk(size, g, sub=sub, steps=n - j):
            z = sample_gw_paths(sub, steps, size, g, cap)[:, -1]
            return float(np.count_nonzero(z))

        alive = sum(run_chunks(chunk, M, seed, workers, tag=_TAG_SURVIVAL + j))
        shifted[j] = alive
    for j in range(1, n + 1):
        p_mc, se = _mean_se(shifted[j], shifted[j], M)
        exact = survival_prob_accurate(env, j, n)
        if j < n:
            via_shape = 1.0 / (mu[j] / mu[n] + composed_shape(env, j, n, 0.0))
            gap = tr.rho[n] - tr.rho[j]
            bound = STEP_IV_CONSTANT / (mu[j] * gap) if gap > 0 else math.inf
            implied_C = exact * mu[j] * gap
        else:
            via_shape, bound, implied_C = 1.0, 1.0, float("nan")
        row = _row("IV", j, p_mc, se, bound, exact=exact, via_shape=via_shape, implied_C=implied_C)
        row["identity_rel_err"] = abs(via_shape - exact) / exact
        row["flag"] = bool(row["flag"] or exact > bound * (1 + 1e-12) or row["identity_rel_err"] > 1e-9)
        rep.rows.append(row)
    return rep
