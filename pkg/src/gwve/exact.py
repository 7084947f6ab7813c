"""Exact finite-n laws from generating functions.

The law of ``Z_n`` is recovered by evaluating ``f_{0,n}`` on roots of unity
and inverting the discrete Fourier transform.  Two slower oracles exist for
cross-checking: repeated power-series composition truncated at ``K``
(:func:`law_of_Zn_convolution`) and exhaustive enumeration of family trees
for laws supported on ``{0, 1, 2}`` (:func:`law_of_Zn_enumeration`).

Conditional laws are computed in "complement space": instead of ``f_{0,n}(s)``
we iterate ``u -> 1 - f_k(1 - u)`` starting from ``u = 1 - s``.  This keeps
full relative precision in ``P[Z_n > 0]`` even when it is far below machine
epsilon, which is what makes decaying environments tractable.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .environments import Environment
from .laws import ExplicitPMF, LinearFractional, OffspringLaw, ZeroMeanError

__all__ = [
    "TruncationError",
    "NegativeMassError",
    "DegenerateLawError",
    "FamilyMismatch",
    "TruncatedPMF",
    "ShapeEval",
    "compose_pgf",
    "compose_complement",
    "survival_prob",
    "survival_prob_accurate",
    "law_of_Zn",
    "law_of_Zn_convolution",
    "law_of_Zn_enumeration",
    "law_of_Zn_iterates",
    "conditional_law",
    "conditional_law_iterates",
    "conditional_law_auto",
    "size_biased_law",
    "equilibrium_cdf",
    "shape_function",
    "shape_values",
    "composed_shape",
    "composed_shape_direct",
    "prob_no_left_descendants",
]

log = logging.getLogger(__name__)

DEFAULT_TAIL_TOL = 1e-8
CLIP_FLOOR = -1e-12
SHAPE_SWITCH = 1e-7
FAST_PATH_SURVIVAL = 1e-3


class TruncationError(ArithmeticError):
    """The mass beyond the truncation point exceeds the tolerance."""

    def __init__(self, tail_mass: float, K: int, tol: float):
        self.tail_mass = tail_mass
        self.K = K
        self.tol = tol
        super().__init__(
            f"tail mass {tail_mass:.3e} beyond K={K} exceeds tolerance {tol:.1e}; "
            f"try K={4 * K} or larger"
        )


class NegativeMassError(ArithmeticError):
    """Transform round-off produced a probability below the clipping floor."""


class DegenerateLawError(ValueError):
    pass


class FamilyMismatch(ValueError):
    pass


@dataclass
class TruncatedPMF:
    """``probs[k] = P[X = k]`` for ``k < K``; ``tail_mass = P[X >= K]``."""

    probs: np.ndarray
    tail_mass: float
    provenance: str
    max_clip: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < 0):
            raise NegativeMassError("negative probability in TruncatedPMF")
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be nonnegative")

    @property
    def K(self) -> int:
        return self.probs.size

    def mean(self) -> float:
        return float(np.dot(np.arange(self.K), self.probs))

    def factorial_moment2(self) -> float:
        k = np.arange(self.K, dtype=float)
        return float(np.dot(k * (k - 1), self.probs))

    def tail_probs(self) -> np.ndarray:
        """``P[X > k]`` for ``k < K``, without cancellation."""
        rev = np.cumsum(self.probs[::-1])[::-1]
        return np.append(rev[1:], 0.0) + self.tail_mass

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        m = min(size, self.K)
        out[:m] = self.probs[:m]
        return out

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "prob"])
        for k, p in enumerate(self.probs):
            w.writerow([k, repr(float(p))])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text

    def to_dict(self) -> dict:
        return {
            "probs": self.probs.tolist(),
            "tail_mass": self.tail_mass,
            "provenance": self.provenance,
            "max_clip": self.max_clip,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TruncatedPMF":
        return cls(np.asarray(d["probs"], dtype=float), float(d["tail_mass"]), d["provenance"], d.get("max_clip", 0.0))


@dataclass(frozen=True)
class ShapeEval:
    s: float
    value: float


# --- compositions -------------------------------------------------------


def compose_pgf(env: Environment, m: int, n: int, s):
    """``f_{m,n}(s) = f_{m+1}(f_{m+2}(... f_n(s)))``; ``f_{n,n}(s) = s``."""
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    for k in range(n, m, -1):
        s = env.law(k).pgf(s)
    return s


def compose_complement(env: Environment, m: int, n: int, u):
    """``1 - f_{m,n}(1 - u)``, iterated in complement form."""
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    for k in range(n, m, -1):
        u = env.law(k).one_minus_pgf(u)
    return u


def survival_prob(env: Environment, j: int, n: int) -> float:
    """``P[Z^{Q_j}_{n-j} > 0] = 1 - f_{j,n}(0)``."""
    return 1.0 - compose_pgf(env, j, n, 0.0)


def survival_prob_accurate(env: Environment, j: int, n: int) -> float:
    """Same quantity as :func:`survival_prob`, with full relative precision
    when it is tiny."""
    return float(compose_complement(env, j, n, 1.0))


# --- law of Z_n -----------------------------------------------------------


def _roots(K: int) -> np.ndarray:
    # K+1 of the 2K-th roots of unity: the half spectrum of a length-2K DFT
    return np.exp(2j * np.pi * np.arange(K + 1) / (2 * K))


def _check_pow2(K: int):
    if K < 1 or K & (K - 1):
        raise ValueError(f"K must be a power of two, got {K}")


def _invert(values: np.ndarray, K: int, provenance: str, tol: float) -> TruncatedPMF:
    """Recover ``p[0..K-1]`` from a generating function sampled on the
    half spectrum of the 2K-th roots of unity.

    Sampling at 2K points makes mass at ``k >= K`` alias first onto the
    discarded upper half, so the kept entries are contaminated only by mass
    beyond ``2K``.
    """
    p = np.fft.irfft(np.conj(values), n=2 * K)[:K]
    worst = float(p.min()) if p.size else 0.0
    if worst < CLIP_FLOOR:
        raise NegativeMassError(f"transform produced {worst:.3e} < {CLIP_FLOOR}")
    max_clip = max(0.0, -worst)
    if max_clip > 0:
        log.debug("clipped negative round-off up to %.3e", max_clip)
    p = np.maximum(p, 0.0)
    tail = max(0.0, 1.0 - math.fsum(p))
    if tail > tol:
        raise TruncationError(tail, K, tol)
    return TruncatedPMF(p, tail, provenance, max_clip)


def _delta(k: int, K: int, provenance: str) -> TruncatedPMF:
    p = np.zeros(K)
    if k < K:
        p[k] = 1.0
    return TruncatedPMF(p, 0.0 if k < K else 1.0, provenance)


def law_of_Zn(env: Environment, n: int, K: int, tol: float = DEFAULT_TAIL_TOL, method: str = "dft") -> TruncatedPMF:
    """Truncated law of ``Z_n`` (started from ``Z_0 = 1``).

    ``method`` is ``"dft"`` (default), ``"convolution"``, or
    ``"closed-form"`` (linear-fractional environments only).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if method == "convolution":
        return law_of_Zn_convolution(env, n, K, tol)
    if method == "closed-form":
        return _lf_law(env, n, K, tol)
    if method != "dft":
        raise ValueError(f"unknown method {method!r}")
    _check_pow2(K)
    if n == 0:
        return _delta(1, K, "dft")
    return _invert(compose_pgf(env, 0, n, _roots(K)), K, "dft", tol)


def law_of_Zn_iterates(env: Environment, ns: Iterable[int], K: int, tol: float = DEFAULT_TAIL_TOL) -> Iterator[tuple[int, TruncatedPMF]]:
    """Laws of ``Z_n`` for increasing ``n`` in a constant environment, sharing
    the forward iteration ``F_n = f(F_{n-1})`` (identical arithmetic to
    :func:`compose_pgf`)."""
    if not env.is_constant:
        for n in ns:
            yield n, law_of_Zn(env, n, K, tol)
        return
    _check_pow2(K)
    f = env.law(1)
    vals = _roots(K)
    cur = 0
    for n in sorted(ns):
        while cur < n:
            vals = f.pgf(vals)
            cur += 1
        yield n, (_delta(1, K, "dft") if n == 0 else _invert(vals, K, "dft", tol))


def law_of_Zn_convolution(env: Environment, n: int, K: int, tol: float = DEFAULT_TAIL_TOL) -> TruncatedPMF:
    """Oracle: compose truncated power series backwards,
    ``P <- f_k(P)`` for ``k = n, ..., 1`` starting from ``P(s) = s``."""
    P = np.zeros(K)
    if K > 1:
        P[1] = 1.0
    for k in range(n, 0, -1):
        P = env.law(k).compose_series(P)
    P = np.maximum(P, 0.0)
    tail = max(0.0, 1.0 - math.fsum(P))
    if n == 0:
        tail = 0.0 if K > 1 else 1.0
    if tail > tol:
        raise TruncationError(tail, K, tol)
    return TruncatedPMF(P, tail, "convolution")


def law_of_Zn_enumeration(env: Environment, n: int) -> dict[int, float]:
    """Oracle: enumerate every offspring configuration, generation by
    generation, for laws supported on ``{0, 1, 2}``.  Practical for ``n <= 4``."""
    dist = {1: 1.0}
    for k in range(1, n + 1):
        law = env.law(k)
        q = law.pmf(4)
        if not isinstance(law, ExplicitPMF) or q[3] != 0 or law.probs.size > 3:
            raise ValueError("enumeration oracle needs laws supported on {0, 1, 2}")
        acc: dict[int, list[float]] = defaultdict(list)
        for z, pz in dist.items():
            for combo in itertools.product(range(3), repeat=z):
                pr = pz
                for c in combo:
                    pr *= q[c]
                    if pr == 0.0:
                        break
                if pr:
                    acc[sum(combo)].append(pr)
        dist = {z: math.fsum(v) for z, v in acc.items()}
    return dist


def _lf_params(env: Environment, n: int) -> tuple[float, float]:
    """``(mu_n, rho_{0,n})`` for a linear-fractional environment, in which
    ``1/(1 - f_{0,n}(s)) = 1/(mu_n (1 - s)) + rho_{0,n}/2``."""
    from .bounds import moment_sequences

    if not env.is_linear_fractional(max(n, 1)):
        raise FamilyMismatch("closed form requires a linear-fractional environment")
    if n == 0:
        return 1.0, 0.0
    tr = moment_sequences(env, n)
    return float(tr.mu[n]), float(tr.rho[n])


def _geometric(phat: float, K: int) -> tuple[np.ndarray, float]:
    k = np.arange(K)
    g = phat * np.exp(np.maximum(k - 1, 0) * math.log1p(-phat))
    g[0] = 0.0
    tail = math.exp((K - 1) * math.log1p(-phat)) if K >= 1 else 1.0
    return g, tail


def _lf_law(env, n, K, tol):
    mu, rho = _lf_params(env, n)
    if n == 0:
        return _delta(1, K, "closed-form")
    surv = mu / (1.0 + mu * rho / 2.0)
    phat = 2.0 / (2.0 + mu * rho)
    g, gtail = _geometric(phat, K)
    p = surv * g
    p[0] = 1.0 - surv
    tail = surv * gtail
    if tail > tol:
        raise TruncationError(tail, K, tol)
    return TruncatedPMF(p, tail, "closed-form")


# --- conditional law -------------------------------------------------------


def _cond_invert(U: np.ndarray, surv: float, mu_n: float, K: int, tol: float):
    if not surv > 1e-300:
        raise ArithmeticError(f"survival probability {surv:.3e} too small to condition on")
    h = 1.0 - U / surv
    pmf = _invert(h, K, "dft", tol)
    pmf.probs[0] = 0.0
    return pmf, mu_n / surv


def conditional_law(
    env: Environment, n: int, K: int, tol: float = DEFAULT_TAIL_TOL, method: str = "dft"
) -> tuple[TruncatedPMF, float]:
    """Law of ``Y_n = (Z_n | Z_n > 0)`` and ``b_n = mu_n / P[Z_n > 0]``.

    The generating function ``E[s^Y_n] = 1 - (1 - f_{0,n}(s))/(1 - f_{0,n}(0))``
    is evaluated in complement form, so neither the pmf nor ``b_n`` loses
    precision when survival is rare.
    """
    from .bounds import moment_sequences

    if n == 0:
        return _delta(1, K, method), 1.0
    if method == "closed-form":
        mu, rho = _lf_params(env, n)
        phat = 2.0 / (2.0 + mu * rho)
        g, tail = _geometric(phat, K)
        if tail > tol:
            raise TruncationError(tail, K, tol)
        return TruncatedPMF(g, tail, "closed-form"), (2.0 + mu * rho) / 2.0
    mu_n = float(moment_sequences(env, n).mu[n])
    if method == "convolution":
        Z = law_of_Zn_convolution(env, n, K, tol)
        surv = survival_prob_accurate(env, 0, n)
        p = Z.probs.copy()
        p[0] = 0.0
        return TruncatedPMF(p / surv, Z.tail_mass / surv, "convolution"), mu_n / surv
    if method != "dft":
        raise ValueError(f"unknown method {method!r}")
    _check_pow2(K)
    w = _roots(K)
    surv = survival_prob_accurate(env, 0, n)
    if surv > FAST_PATH_SURVIVAL:
        # survival is not rare: the plain pgf (cheaper per point) loses at most
        # eps/surv absolute accuracy in 1 - f_{0,n}
        U = 1.0 - compose_pgf(env, 0, n, w)
    else:
        U = compose_complement(env, 0, n, 1.0 - w)
    return _cond_invert(U, surv, mu_n, K, tol)


def conditional_law_iterates(
    env: Environment, ns: Iterable[int], K: int, tol: float = DEFAULT_TAIL_TOL
) -> Iterator[tuple[int, TruncatedPMF, float]]:
    """``(n, Y_n, b_n)`` for increasing ``n``; constant environments share one
    forward iteration."""
    ns = sorted(ns)
    if not env.is_constant:
        for n in ns:
            pmf, b = conditional_law(env, n, K, tol)
            yield n, pmf, b
        return
    _check_pow2(K)
    law = env.law(1)
    f1 = law.mean
    U = 1.0 - _roots(K)
    surv = 1.0
    cur = 0
    for n in ns:
        while cur < n:
            U = law.one_minus_pgf(U)
            surv = float(law.one_minus_pgf(surv))
            cur += 1
        if n == 0:
            yield 0, _delta(1, K, "dft"), 1.0
        else:
            pmf, b = _cond_invert(U, surv, f1**n, K, tol)
            yield n, pmf, b


def suggest_K(b: float, tol: float = DEFAULT_TAIL_TOL, k_min: int = 64) -> int:
    """Power of two large enough for an approximately exponential law with
    mean ``b`` to leave less than ``tol`` beyond it."""
    target = max(k_min, b * (math.log(1.0 / tol) + 4.0) + 16)
    return 1 << math.ceil(math.log2(target))


def conditional_law_auto(env: Environment, n: int, tol: float = DEFAULT_TAIL_TOL, K_max: int = 1 << 22):
    """:func:`conditional_law` with ``K`` chosen from ``b_n`` and doubled on
    :class:`TruncationError` up to ``K_max``."""
    from .bounds import moment_sequences

    if n == 0:
        return conditional_law(env, 0, 64, tol)
    b = float(moment_sequences(env, n).mu[n]) / survival_prob_accurate(env, 0, n)
    K = min(suggest_K(b, tol), K_max)
    while True:
        try:
            return conditional_law(env, n, K, tol)
        except TruncationError:
            if K >= K_max:
                raise
            K *= 2


# --- transforms ---------------------------------------------------------


def size_biased_law(pmf: TruncatedPMF, mean: float | None = None) -> TruncatedPMF:
    """``k p[k] / m``.  With ``mean`` (the exact mean) given, the unseen
    size-biased mass beyond the truncation is reported as ``tail_mass``."""
    k = np.arange(pmf.K)
    w = k * pmf.probs
    m_trunc = math.fsum(w)
    if not m_trunc > 0:
        raise ZeroMeanError("size-biasing needs a positive mean")
    m = m_trunc if mean is None else float(mean)
    out = w / m
    tail = 0.0 if mean is None else max(0.0, 1.0 - math.fsum(out))
    return TruncatedPMF(out, tail, pmf.provenance)


def equilibrium_cdf(pmf: TruncatedPMF, x, mean: float | None = None):
    """CDF of ``U * Xdot``: ``F^e(x) = (1/m) int_0^x P[X > t] dt``, which is
    piecewise linear with knots at the integers."""
    m = pmf.mean() if mean is None else float(mean)
    if not m > 0:
        raise ZeroMeanError("equilibrium law needs a positive mean")
    S = pmf.tail_probs()  # P[X > k], k < K
    cum = np.concatenate(([0.0], np.cumsum(S)))  # int_0^k P[X > t] dt
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    fl = np.minimum(np.floor(x).astype(np.int64), pmf.K)
    S_ext = np.append(S, pmf.tail_mass)
    integral = cum[fl] + (x - fl) * S_ext[np.minimum(fl, pmf.K)]
    out = np.minimum(integral / m, 1.0)
    return out if out.ndim else float(out)


# --- shape functions ----------------------------------------------------


def _is_dirac_one(law: OffspringLaw) -> bool:
    return isinstance(law, ExplicitPMF) and law.probs.size == 2 and law.probs[1] == 1.0


def shape_values(law: OffspringLaw, u) -> np.ndarray:
    """``phi(1 - u)`` for an array of ``u = 1 - s`` in ``[0, 1]``.

    For ``u < 1e-7`` the two reciprocals cancel catastrophically; there the
    first-order expansion ``phi(1-u) = f''/(2f'^2) + (A^2 - B) u / f'`` with
    ``A = f''/(2f')``, ``B = f'''/(6f')`` is used instead.
    """
    if _is_dirac_one(law):
        raise DegenerateLawError("shape function undefined for the law with one child a.s.")
    f1, f2, f3 = law.moments()
    u = np.asarray(u, dtype=float)
    small = u < SHAPE_SWITCH
    out = np.empty_like(u)
    A, B = f2 / (2 * f1), f3 / (6 * f1)
    out[small] = f2 / (2 * f1**2) + (A * A - B) * u[small] / f1
    ub = u[~small]
    g = law.one_minus_pgf(ub)
    out[~small] = 1.0 / g - 1.0 / (f1 * ub)
    return out


def shape_function(law: OffspringLaw, s: float) -> ShapeEval:
    """``phi(s) = 1/(1 - f(s)) - 1/(f'(1)(1 - s))``, extended continuously to
    ``phi(1) = f''(1)/(2 f'(1)^2)``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return ShapeEval(float(s), float(shape_values(law, np.array([1.0 - s]))[0]))


def composed_shape(env: Environment, k: int, n: int, s: float) -> float:
    """Shape function of ``f_{k,n}`` via
    ``phi_{k,n}(s) = mu_k sum_{l=k+1}^{n} phi_l(f_{l,n}(s)) / mu_{l-1}``."""
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    u = 1.0 - s
    terms = []
    for l in range(n, k, -1):
        law = env.law(l)
        # mu_k / mu_{l-1} = 1 / (f'_{k+1} ... f'_{l-1})
        ratio = 1.0
        for i in range(k + 1, l):
            ratio /= env.law(i).mean
        if not _is_dirac_one(law):  # f(s) = s contributes phi = 0 to the sum
            terms.append(ratio * float(shape_values(law, np.array([u]))[0]))
        u = float(law.one_minus_pgf(u))
    return math.fsum(terms)


def composed_shape_direct(env: Environment, k: int, n: int, s: float) -> float:
    """``1/(1 - f_{k,n}(s)) - mu_k / (mu_n (1 - s))`` for ``s < 1``."""
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    u = 1.0 - s
    U = float(compose_complement(env, k, n, u))
    ratio = 1.0
    for i in range(k + 1, n + 1):
        ratio *= env.law(i).mean
    return 1.0 / U - 1.0 / (ratio * u)


def prob_no_left_descendants(env: Environment, j: int, n: int) -> float:
    """``P[L_{n,j} = 0]``: none of the siblings born to the left of the spine
    at generation ``j`` has descendants at generation ``n``.

    With ``x = f_{j,n}(0)`` and a uniformly placed mark among ``k`` children
    drawn size-biased, ``P = (1 - f_j(x)) / (f_j'(1)(1 - x))``.
    """
    if not 1 <= j <= n:
        raise ValueError("need 1 <= j <= n")
    law = env.law(j)
    u = survival_prob_accurate(env, j, n)  # 1 - x
    return float(law.one_minus_pgf(u)) / (law.mean * u)
