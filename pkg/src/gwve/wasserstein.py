"""Wasserstein-1 distances to the standard exponential.

In one dimension ``d_W(X, Y) = int |F_X - F_Y|``.  For a step CDF the
integrand against ``1 - e^{-x}`` on a piece where ``P[X > x] = t`` is
``|e^{-x} - t|``, which integrates in closed form after splitting at
``x* = -log t``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exact import TruncatedPMF

__all__ = [
    "TailTooHeavy",
    "EmptySample",
    "DistanceResult",
    "dw_scaled_pmf_vs_exp",
    "dw_empirical_vs_exp",
    "dw_step_vs_exp",
    "dw_scaled_pmfs",
    "tv_distance",
    "tv_pmf_vs_array",
    "stein_bound_terms",
]

TAIL_LIMIT = 1e-6


class TailTooHeavy(ValueError):
    pass


class EmptySample(ValueError):
    pass


@dataclass(frozen=True)
class DistanceResult:
    value: float
    method: str  # "exact-piecewise" | "empirical-cdf"
    knots_used: int
    truncation_bound: float
    rigorous_tail: bool = True

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "truncation_bound": self.truncation_bound}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _exp_diff(a, b):
    """``e^{-a} - e^{-b}`` for ``a <= b`` (``b`` may be infinite), without cancellation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inf = np.isinf(b)
    gap = np.where(inf, 0.0, b - a)
    return np.where(inf, np.exp(-a), -np.exp(-a) * np.expm1(-gap))


def _abs_integral(x0, x1, t):
    """``int_{x0}^{x1} |e^{-x} - t| dx`` elementwise, for ``0 <= t <= 1``.

    ``x1`` may be infinite only where ``t == 0``.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    t = np.asarray(t, dtype=float)
    pos = t > 0
    with np.errstate(divide="ignore"):
        xs = np.where(pos, -np.log(np.where(pos, t, 1.0)), np.inf)
    xm = np.clip(xs, x0, x1)
    # e^{-x} >= t on [x0, xm], below it on [xm, x1]
    with np.errstate(invalid="ignore"):
        above = _exp_diff(x0, xm) - np.where(pos, t * (xm - x0), 0.0)
        below = np.where(pos, t * (x1 - xm) - _exp_diff(xm, x1), 0.0)
    return np.maximum(above, 0.0) + np.maximum(below, 0.0)


def dw_step_vs_exp(knots: np.ndarray, survival: np.ndarray) -> float:
    """``int_0^inf |S(x) - e^{-x}|`` for a step survival function equal to
    ``survival[i]`` on ``[knots[i], knots[i+1])`` (the last piece extends to
    infinity and must have ``survival[-1] == 0``).  ``knots[0]`` must be 0."""
    knots = np.asarray(knots, dtype=float)
    survival = np.asarray(survival, dtype=float)
    x1 = np.append(knots[1:], np.inf)
    return float(np.sum(_abs_integral(knots, x1, survival)))


def dw_scaled_pmf_vs_exp(pmf: TruncatedPMF, b: float, mean: float | None = None) -> DistanceResult:
    """``d_W(X/b, Exp(1))`` for ``X`` with the truncated law ``pmf``.

    The CDF of ``X/b`` is exact on ``[0, K/b)``; beyond it the law is treated
    as exhausted, and the error of doing so is bounded by
    ``E[(X - K)^+]/b <= (E[X] - sum_{k<K} k p_k)/b``, which needs the exact
    mean ``mean`` of ``X``.  Without it a geometric-tail heuristic is reported
    and ``rigorous_tail`` is False.
    """
    if not b > 0:
        raise ValueError("scale b must be positive")
    if pmf.tail_mass >= TAIL_LIMIT:
        raise TailTooHeavy(f"tail mass {pmf.tail_mass:.3e} >= {TAIL_LIMIT:g}")
    if pmf.K == 0 or (pmf.probs[0] == 1.0 and pmf.tail_mass == 0.0):
        raise ValueError("law concentrated at 0 has nothing to rescale")
    K = pmf.K
    t = pmf.tail_probs()  # P[X > k]
    knots = np.arange(K + 1) / b
    val = float(np.sum(_abs_integral(knots[:-1], knots[1:], np.minimum(t, 1.0))))
    val += math.exp(-K / b)  # remainder if no mass lay beyond K
    if mean is not None:
        beyond = max(0.0, float(mean) - pmf.mean()) / b
        rigorous = True
    else:
        beyond = pmf.tail_mass * (K / b + 1.0) * 2.0
        rigorous = pmf.tail_mass == 0.0
    return DistanceResult(val, "exact-piecewise", K, beyond, rigorous)


def dw_empirical_vs_exp(samples) -> DistanceResult:
    """``d_W`` between the empirical law of nonnegative ``samples`` and Exp(1)."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    M = x.size
    if M < 2:
        raise EmptySample("need at least two samples")
    if x[0] < 0 or not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite and nonnegative")
    knots = np.concatenate(([0.0], x))
    survival = 1.0 - np.arange(M + 1) / M
    survival[-1] = 0.0
    return DistanceResult(dw_step_vs_exp(knots, survival), "empirical-cdf", M, 0.0)


def dw_scaled_pmfs(p: TruncatedPMF, bp: float, q: TruncatedPMF, bq: float) -> float:
    """``d_W(X/bp, Y/bq)`` between two truncated laws over the covered range."""
    kp = np.arange(p.K + 1) / bp
    kq = np.arange(q.K + 1) / bq
    knots = np.union1d(kp, kq)
    knots = knots[knots <= min(kp[-1], kq[-1])]
    mid = (knots[:-1] + knots[1:]) / 2
    sp = p.tail_probs()[np.minimum(np.floor(mid * bp).astype(np.int64), p.K - 1)]
    sq = q.tail_probs()[np.minimum(np.floor(mid * bq).astype(np.int64), q.K - 1)]
    return float(np.sum(np.abs(sp - sq) * np.diff(knots)))


def tv_distance(p: TruncatedPMF, q: TruncatedPMF) -> float:
    """``(1/2) sum |p_k - q_k| + (1/2) |tail_p - tail_q|`` over the union support."""
    K = max(p.K, q.K)
    return 0.5 * float(np.sum(np.abs(p.padded(K) - q.padded(K)))) + 0.5 * abs(p.tail_mass - q.tail_mass)


def tv_pmf_vs_array(p: TruncatedPMF, emp: np.ndarray) -> float:
    """TV between a truncated law and an empirical frequency vector; empirical
    mass at ``k >= K`` and the law's tail mass are compared as one bin."""
    emp = np.asarray(emp, dtype=float)
    K = p.K
    e = np.zeros(K)
    m = min(K, emp.size)
    e[:m] = emp[:m]
    e_tail = float(emp[K:].sum()) if emp.size > K else 0.0
    return 0.5 * float(np.sum(np.abs(p.probs - e))) + 0.5 * abs(p.tail_mass - e_tail)


def stein_bound_terms(values, probs) -> tuple[float, float]:
    """Both sides of ``d_W(X, Exp) <= 2 E|X - X^e| + |E X - 1|`` for a discrete
    ``X >= 0`` with ``X^e = U * Xdot`` drawn independently of ``X``.

    ``E|x - U y| = x - y/2`` if ``x >= y`` and ``x^2/y + y/2 - x`` otherwise.
    """
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    order = np.argsort(v)
    v, p = v[order], p[order]
    m = float(np.dot(v, p))
    if not m > 0:
        raise ValueError("mean must be positive")
    # left side: step survival function of X
    uniq, inv = np.unique(v, return_inverse=True)
    pu = np.bincount(inv, weights=p)
    surv = 1.0 - np.cumsum(pu)
    surv = np.clip(surv, 0.0, 1.0)
    surv[-1] = 0.0
    if uniq[0] > 0:
        knots = np.concatenate(([0.0], uniq))
        survival = np.concatenate(([1.0], surv))
    else:
        knots, survival = uniq, surv
    lhs = dw_step_vs_exp(knots, survival)
    # right side: size-biased weights
    w = v * p / m
    X = v[:, None]
    Y = v[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        small = X * X / np.where(Y > 0, Y, 1.0) + Y / 2 - X
    e = np.where(X >= Y, X - Y / 2, small)
    rhs = 2.0 * float(p @ e @ w) + abs(m - 1.0)
    return lhs, rhs
