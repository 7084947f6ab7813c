"""One-generation offspring laws.

Each law knows its pgf ``f``, the complement ``g(u) = 1 - f(1 - u)`` (evaluated
without cancellation near ``s = 1``), its first three factorial moments, a
truncated pmf, exact samplers, and how to compose itself with a truncated
power series (used by the convolution oracle in :mod:`gwve.exact`).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "LawValidationError",
    "ZeroMeanError",
    "OffspringLaw",
    "ExplicitPMF",
    "SymmetricPerturbation",
    "Poisson",
    "LinearFractional",
    "dirac",
    "offspring_moments",
    "pgf_eval",
]

MASS_TOL = 1e-12


class LawValidationError(ValueError):
    pass


class ZeroMeanError(ValueError):
    pass


class OffspringLaw(ABC):
    """Reproduction law of one generation."""

    kind: str = ""

    @abstractmethod
    def moments(self) -> tuple[float, float, float]:
        """Factorial moments ``(f'(1), f''(1), f'''(1))``."""

    @abstractmethod
    def pgf(self, s):
        """``f(s) = sum_k q[k] s^k`` for real or complex ``s`` (array-friendly)."""

    @abstractmethod
    def one_minus_pgf(self, u):
        """``1 - f(1 - u)``, accurate when ``u`` is small."""

    @abstractmethod
    def pmf(self, size: int) -> np.ndarray:
        """First ``size`` entries ``q[0..size-1]``."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size=None):
        pass

    @abstractmethod
    def sample_sum(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Total offspring of ``counts[i]`` independent parents, per entry."""

    @abstractmethod
    def sample_size_biased(self, rng: np.random.Generator, size=None):
        """Draw from ``k q[k] / f'(1)``."""

    @abstractmethod
    def compose_series(self, inner: np.ndarray) -> np.ndarray:
        """Coefficients of ``f(P(s))`` truncated to ``len(inner)``, where
        ``inner`` holds the coefficients of a pgf ``P``."""

    @property
    def mean(self) -> float:
        return self.moments()[0]

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ExplicitPMF(OffspringLaw):
    """Finite-support law given by its probability vector."""

    probs: np.ndarray
    kind: str = field(default="pmf", init=False)

    def __post_init__(self):
        q = np.array(self.probs, dtype=float)
        if q.ndim != 1 or q.size == 0:
            raise LawValidationError("probs must be a non-empty 1-d vector")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise LawValidationError("probs must be finite and nonnegative")
        if abs(math.fsum(q) - 1.0) > MASS_TOL:
            raise LawValidationError(f"probs sum to {math.fsum(q)!r}, not 1")
        nz = np.nonzero(q)[0]
        q = q[: nz[-1] + 1]
        q.setflags(write=False)
        object.__setattr__(self, "probs", q)
        if self.moments()[0] <= 0:
            raise LawValidationError("offspring mean must be strictly positive")

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and self.probs.shape == other.probs.shape
            and bool(np.all(self.probs == other.probs))
        )

    def __hash__(self):
        return hash((type(self).__name__, self.probs.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}({self.probs.tolist()})"

    def moments(self):
        k = np.arange(self.probs.size, dtype=float)
        q = self.probs
        return (
            math.fsum(k * q),
            math.fsum(k * (k - 1) * q),
            math.fsum(k * (k - 1) * (k - 2) * q),
        )

    def pgf(self, s):
        # Horner, highest degree first
        s = np.asarray(s)
        acc = np.zeros_like(s, dtype=np.result_type(s, float)) + self.probs[-1]
        for c in self.probs[-2::-1]:
            acc = acc * s + c
        return acc if acc.ndim else acc[()]

    def one_minus_pgf(self, u):
        # 1 - f(s) = (1 - s) * sum_j P(X > j) s^j
        u = np.asarray(u)
        s = 1.0 - u
        tail = np.cumsum(self.probs[::-1])[::-1][1:]  # P(X > j), j = 0..d-1
        if tail.size == 0:
            return u * 0.0
        tail = np.minimum(tail, 1.0)
        acc = np.zeros_like(s, dtype=np.result_type(s, float)) + tail[-1]
        for c in tail[-2::-1]:
            acc = acc * s + c
        out = u * acc
        return out if out.ndim else out[()]

    def pmf(self, size):
        out = np.zeros(size)
        m = min(size, self.probs.size)
        out[:m] = self.probs[:m]
        return out

    def sample(self, rng, size=None):
        cdf = np.cumsum(self.probs)
        u = rng.random(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), self.probs.size - 1)

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        if self.probs.size == 1:
            return np.zeros_like(counts)
        if self.probs.size == 2:
            return rng.binomial(counts, self.probs[1])
        draws = rng.multinomial(counts, self.probs)
        return draws @ np.arange(self.probs.size, dtype=np.int64)

    def sample_size_biased(self, rng, size=None):
        k = np.arange(self.probs.size)
        w = k * self.probs
        cdf = np.cumsum(w / w.sum())
        u = rng.random(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), self.probs.size - 1)

    def compose_series(self, inner):
        K = inner.size
        acc = np.zeros(K)
        acc[0] = self.probs[-1]
        for c in self.probs[-2::-1]:
            acc = np.convolve(acc, inner)[:K]
            acc[0] += c
        return acc

    def to_dict(self):
        return {"kind": "pmf", "probs": self.probs.tolist()}


class SymmetricPerturbation(ExplicitPMF):
    """``q[0] = q[2] = delta/2``, ``q[1] = 1 - delta``; critical for every delta."""

    def __init__(self, delta: float):
        delta = float(delta)
        if not 0.0 < delta <= 1.0:
            raise LawValidationError(f"delta must lie in (0, 1], got {delta}")
        object.__setattr__(self, "delta", delta)
        super().__init__(np.array([delta / 2, 1.0 - delta, delta / 2]))
        object.__setattr__(self, "kind", "symmetric")

    def __repr__(self):
        return f"SymmetricPerturbation(delta={self.delta!r})"

    def moments(self):
        return (1.0, self.delta, 0.0)

    def to_dict(self):
        return {"kind": "symmetric", "delta": self.delta}


def dirac(k: int = 1) -> ExplicitPMF:
    q = np.zeros(k + 1)
    q[k] = 1.0
    return ExplicitPMF(q)


def _negbin_failures(m, p, rng):
    """Failures before ``m`` successes; ``m`` may contain zeros."""
    m = np.asarray(m, dtype=np.int64)
    out = np.zeros_like(m)
    pos = m > 0
    if np.any(pos):
        out[pos] = rng.negative_binomial(m[pos], p)
    return out


@dataclass(frozen=True)
class Poisson(OffspringLaw):
    lam: float
    kind: str = field(default="poisson", init=False)

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise LawValidationError(f"Poisson parameter must be positive, got {self.lam}")

    def moments(self):
        lam = self.lam
        return (lam, lam**2, lam**3)

    def pgf(self, s):
        return np.exp(self.lam * (np.asarray(s) - 1.0))

    def one_minus_pgf(self, u):
        return -np.expm1(-self.lam * np.asarray(u))

    def pmf(self, size):
        return stats.poisson.pmf(np.arange(size), self.lam)

    def sample(self, rng, size=None):
        return rng.poisson(self.lam, size)

    def sample_sum(self, counts, rng):
        return rng.poisson(self.lam * np.asarray(counts, dtype=float))

    def sample_size_biased(self, rng, size=None):
        return 1 + rng.poisson(self.lam, size)

    def compose_series(self, inner):
        # G = exp(H), H = lam (P - 1): k g_k = sum_{j=1}^k j h_j g_{k-j}
        K = inner.size
        jh = self.lam * inner * np.arange(K)
        g = np.zeros(K)
        g[0] = math.exp(self.lam * (inner[0] - 1.0))
        for k in range(1, K):
            g[k] = np.dot(jh[1 : k + 1], g[k - 1 :: -1]) / k
        return g

    def to_dict(self):
        return {"kind": "poisson", "lambda": self.lam}


@dataclass(frozen=True)
class LinearFractional(OffspringLaw):
    """``q[0] = 1 - a``, ``q[k] = a p (1-p)^(k-1)`` for ``k >= 1``."""

    a: float
    p: float
    kind: str = field(default="linear_fractional", init=False)

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise LawValidationError(f"a must lie in (0, 1], got {self.a}")
        if not 0.0 < self.p < 1.0:
            raise LawValidationError(f"p must lie in (0, 1), got {self.p}")

    def moments(self):
        a, p = self.a, self.p
        f1 = a / p
        return (f1, 2 * a * (1 - p) / p**2, 6 * a * (1 - p) ** 2 / p**3)

    def pgf(self, s):
        s = np.asarray(s)
        return 1.0 - self.a * (1.0 - s) / (1.0 - (1.0 - self.p) * s)

    def one_minus_pgf(self, u):
        u = np.asarray(u)
        return self.a * u / (self.p + (1.0 - self.p) * u)

    def pmf(self, size):
        k = np.arange(size)
        out = self.a * self.p * (1.0 - self.p) ** np.maximum(k - 1, 0)
        out[0] = 1.0 - self.a
        return out

    def sample(self, rng, size=None):
        alive = rng.random(size) < self.a
        return np.where(alive, rng.geometric(self.p, size), 0)

    def sample_sum(self, counts, rng):
        m = rng.binomial(np.asarray(counts, dtype=np.int64), self.a)
        return m + _negbin_failures(m, self.p, rng)

    def sample_size_biased(self, rng, size=None):
        # k p^2 (1-p)^(k-1): one plus a negative binomial with two successes
        return 1 + rng.negative_binomial(2, self.p, size)

    def compose_series(self, inner):
        # f(P) = (1 - a) + a p W with W = P / (1 - (1-p) P)
        K = inner.size
        c = 1.0 - self.p
        w = np.zeros(K)
        denom = 1.0 - c * inner[0]
        w[0] = inner[0] / denom
        for k in range(1, K):
            w[k] = (inner[k] + c * np.dot(inner[1 : k + 1], w[k - 1 :: -1])) / denom
        out = self.a * self.p * w
        out[0] += 1.0 - self.a
        return out

    def to_dict(self):
        return {"kind": "linear_fractional", "a": self.a, "p": self.p}


def offspring_moments(law: OffspringLaw) -> tuple[float, float, float]:
    return law.moments()


def pgf_eval(law: OffspringLaw, s):
    if np.any(np.abs(s) > 1 + 1e-12):
        raise ValueError("pgf is only evaluated on the closed unit disc")
    return law.pgf(s)
