"""Moment ledger and explicit rate quantities.

For an environment with one-generation factorial moments ``f_n', f_n'', f_n'''``:

* ``mu_n = f_1' ... f_n'`` (``mu_0 = 1``),
* ``nu_n = f_n'' / f_n'^2``,
* ``rho_{0,n} = sum_{k<n} nu_{k+1} / mu_k``,
* ``M_n = max_{k<=n} f_k'``.

From these, the rate sums ``r_n`` and ``s_n`` and the bound shapes (the
expressions that multiply an unknown constant in the convergence
theorems) are built.  Unknown constants are fixed to one and the results
are always called *shapes*.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environments import Environment

__all__ = [
    "DomainError",
    "DivisionByZero",
    "FamilyMismatch",
    "MomentTrack",
    "RateBoundReport",
    "moment_sequences",
    "rn",
    "rn_batch",
    "sn",
    "sn_batch",
    "theorem4_shape",
    "theorem5_shape",
    "theorem5_warnings",
    "corollary_shape",
    "linear_fractional_bound",
    "rate_bound_report",
]

LOG_RANGE = (1e-300, 1e300)
F2_FLOOR = 1e-6


class DomainError(ArithmeticError):
    pass


class DivisionByZero(DomainError, ZeroDivisionError):
    pass


from .exact import FamilyMismatch  # noqa: E402  (shared exception type)


@dataclass(frozen=True)
class MomentTrack:
    """Ledger over generations ``0..N``.

    Arrays ``mu``, ``log_mu``, ``nu``, ``rho``, ``mmax``, ``nu_over_mu`` are
    indexed by ``n`` (entry 0 is ``mu_0 = 1``, ``rho_{0,0} = 0``; ``nu``,
    ``mmax`` and ``nu_over_mu`` are NaN there).  ``f1``, ``f2``, ``f3`` hold
    the one-generation moments for ``n = 1..N`` at index ``n - 1``.
    ``scaled`` marks the generations where ``mu_n`` left
    ``[1e-300, 1e300]`` and the log-space values are authoritative.
    """

    N: int
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    mu: np.ndarray
    log_mu: np.ndarray
    nu: np.ndarray
    nu_over_mu: np.ndarray
    rho: np.ndarray
    mmax: np.ndarray
    scaled: np.ndarray
    linear_fractional: bool = False
    b: np.ndarray | None = None
    log_rho: np.ndarray | None = None

    @property
    def mu_rho(self) -> np.ndarray:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.log_rho is not None:
                lr = self.log_mu + self.log_rho
            else:
                lr = np.where(self.rho > 0, self.log_mu + np.log(np.where(self.rho > 0, self.rho, 1.0)), -np.inf)
            direct = self.mu * self.rho
            use_log = self.scaled | ~np.isfinite(self.rho)
            return np.where(use_log, np.exp(lr), direct)

    def inv_mu(self) -> np.ndarray:
        with np.errstate(over="ignore", divide="ignore"):
            return np.where(self.scaled, np.exp(-self.log_mu), 1.0 / np.where(self.mu > 0, self.mu, 1.0))

    def with_b(self, b) -> "MomentTrack":
        from dataclasses import replace

        return replace(self, b=np.asarray(b, dtype=float))


def moment_sequences(env: Environment, N: int) -> MomentTrack:
    """Build the ledger by the forward recursions
    ``mu_n = mu_{n-1} f_n'`` and ``rho_{0,n} = rho_{0,n-1} + nu_n / mu_{n-1}``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    mom = env.moments(N)
    f1, f2, f3 = (mom[:, i].copy() for i in range(3))
    if np.any(f1 <= 0):
        raise DomainError("offspring means must be positive")
    mu = np.empty(N + 1)
    log_mu = np.empty(N + 1)
    nu = np.full(N + 1, np.nan)
    inc = np.full(N + 1, np.nan)
    rho = np.zeros(N + 1)
    mmax = np.full(N + 1, np.nan)
    scaled = np.zeros(N + 1, dtype=bool)
    log_rho = np.full(N + 1, -np.inf)
    mu[0], log_mu[0] = 1.0, 0.0
    lo, hi = LOG_RANGE
    acc_rho = 0.0
    for n in range(1, N + 1):
        m1 = f1[n - 1]
        nu[n] = f2[n - 1] / (m1 * m1)
        log_mu[n] = log_mu[n - 1] + math.log(m1)
        mu[n] = mu[n - 1] * m1
        log_inc = math.log(nu[n]) - log_mu[n - 1] if nu[n] > 0 else -math.inf
        if scaled[n - 1] or not lo <= mu[n - 1] <= hi:
            inc[n] = math.exp(log_inc) if log_inc < 709 else math.inf
        else:
            inc[n] = nu[n] / mu[n - 1]
        if not lo <= mu[n] <= hi:
            scaled[n] = True
            mu[n] = math.exp(log_mu[n]) if log_mu[n] < 709 else math.inf
        acc_rho += float(inc[n])
        rho[n] = acc_rho
        log_rho[n] = np.logaddexp(log_rho[n - 1], log_inc)
        mmax[n] = m1 if n == 1 else max(mmax[n - 1], m1)
    lf = N >= 1 and env.is_linear_fractional(N)
    return MomentTrack(N, f1, f2, f3, mu, log_mu, nu, inc, rho, mmax, scaled, lf, log_rho=log_rho)


# --- r_n -------------------------------------------------------------------


def _r_weights(track: MomentTrack) -> tuple[np.ndarray, np.ndarray]:
    """``A_j = (nu_j/mu_{j-1})(1 + f_j')/mu_j`` and ``c_j = (nu_j/mu_{j-1})(1 + f_j')``."""
    with np.errstate(over="ignore", invalid="ignore"):
        c = track.nu_over_mu[1:] * (1.0 + track.f1)
        A = c * track.inv_mu()[1:]
    return np.concatenate(([np.nan], A)), np.concatenate(([np.nan], c))


def rn(env: Environment | None, track: MomentTrack, n: int) -> float:
    """``r_n = sum_{j<n} (nu_j/mu_{j-1})(1+f_j')/(mu_j (rho_n - rho_j)) + (nu_n/mu_{n-1})(1+f_n')``
    by direct summation."""
    if n < 2:
        raise ValueError("r_n is defined for n >= 2")
    if n > track.N:
        raise ValueError("n beyond the ledger horizon")
    A, c = _r_weights(track)
    terms = []
    for j in range(1, n):
        gap = track.rho[n] - track.rho[j]
        if A[j] == 0.0:
            continue
        if gap <= 0.0:
            raise DivisionByZero(f"rho_(0,{n}) == rho_(0,{j}) with a nonzero summand")
        terms.append(A[j] / gap)
    terms.append(c[n])
    return math.fsum(terms)


def rn_batch(track: MomentTrack) -> np.ndarray:
    """``r_n`` for ``n = 0..N`` (NaN for ``n < 2``), O(N^2) total."""
    N = track.N
    out = np.full(N + 1, np.nan)
    A, c = _r_weights(track)
    with np.errstate(over="ignore", invalid="ignore"):  # overflowed ledgers yield inf/NaN rows
        for n in range(2, N + 1):
            a = A[1:n]
            gap = track.rho[n] - track.rho[1:n]
            nz = a != 0.0
            if np.any(gap[nz] <= 0.0):
                out[n] = np.nan
                continue
            out[n] = np.sum(a[nz] / gap[nz]) + c[n]
    return out


# --- s_n ---------------------------------------------------------------------


def _s_terms(track: MomentTrack) -> tuple[np.ndarray, np.ndarray]:
    """Summands ``T_k`` (index ``k``) and a flag for negative log factors."""
    N = track.N
    T = np.full(N + 1, np.nan)
    neg = np.zeros(N + 1, dtype=bool)
    inv = track.inv_mu()
    mr = track.mu_rho
    for k in range(2, N + 1):
        if not mr[k] > 0:
            continue
        logs = math.log(mr[k]) + math.log(track.f1[k - 1])
        neg[k] = logs < 0
        with np.errstate(over="ignore", invalid="ignore"):
            T[k] = logs * abs(inv[k - 2] - inv[k])
    return T, neg


def sn(env: Environment | None, track: MomentTrack, n: int) -> float:
    """``s_n = sum_{k=2}^{n-1} (log(rho_{0,k} mu_k) + log f_k') |1/mu_{k-2} - 1/mu_k|``;
    ``s_1 = s_2 = 0`` by convention."""
    if n < 1 or n > track.N:
        raise ValueError("n outside the ledger")
    if n < 3:
        return 0.0
    T, _ = _s_terms(track)
    mr = track.mu_rho
    for k in range(2, n):
        if not mr[k] > 0:
            raise DomainError(f"rho_(0,{k}) mu_{k} must be positive")
    return math.fsum(T[2:n])


def sn_batch(track: MomentTrack) -> tuple[np.ndarray, np.ndarray]:
    """``(s, negative_log_flag)`` for ``n = 0..N``; ``s`` becomes NaN from the
    first ``k`` where the logarithm is undefined.  The flag marks ``n`` whose
    sum contains a term with a negative log factor."""
    T, neg = _s_terms(track)
    N = track.N
    s = np.zeros(N + 1)
    flag = np.zeros(N + 1, dtype=bool)
    for n in range(3, N + 1):
        s[n] = s[n - 1] + T[n - 1]
        flag[n] = flag[n - 1] or neg[n - 1]
    return s, flag


# --- bound shapes -----------------------------------------------------------


def theorem4_shape(track: MomentTrack, r_n: float, n: int) -> float:
    """``1/(mu_n rho_{0,n}) + r_n / rho_{0,n}``."""
    if n < 2:
        raise ValueError("defined for n >= 2")
    rho = track.rho[n]
    if not rho > 0:
        raise DomainError(f"rho_(0,{n}) must be positive")
    return 1.0 / track.mu_rho[n] + r_n / rho


def theorem5_shape(track: MomentTrack, s_n: float, n: int) -> float:
    """``(1 + M_n)^5 ((log(mu_n rho_{0,n}) + log f_n')/(mu_n rho_{0,n}) + s_n/rho_{0,n})``."""
    mr = track.mu_rho[n]
    if not mr > 0:
        raise DomainError(f"mu_{n} rho_(0,{n}) must be positive")
    core = (math.log(mr) + math.log(track.f1[n - 1])) / mr + s_n / track.rho[n]
    return (1.0 + track.mmax[n]) ** 5 * core


def theorem5_warnings(track: MomentTrack, floor: float = F2_FLOOR, eps: float = 0.05) -> list[str]:
    """Hypothesis check for the uniform lower bound on ``f_n''(1)``.

    Besides the absolute floor, a second-moment sequence that is still
    decreasing over the horizon (``f''_N <= (1 - eps) f''_{ceil(N/2)}``) is
    flagged, since a finite horizon cannot certify that it stays bounded away
    from zero.
    """
    out = []
    if track.N == 0:
        return out
    f2 = track.f2
    if f2.min() < floor:
        out.append(f"f''(1) drops to {f2.min():.3g} < {floor:g}: lower-bound hypothesis fails")
    half = math.ceil(track.N / 2)
    if track.N >= 3 and f2[-1] <= (1 - eps) * f2[half - 1]:
        out.append("f''(1) still decreasing over horizon: lower-bound hypothesis not supported")
    return out


def corollary_shape(track: MomentTrack, s_n: float, n: int) -> float:
    """``log(mu_n rho_{0,n})/(mu_n rho_{0,n}) + s_n / rho_{0,n}``."""
    mr = track.mu_rho[n]
    if not mr > 0:
        raise DomainError(f"mu_{n} rho_(0,{n}) must be positive")
    return math.log(mr) / mr + s_n / track.rho[n]


def corollary_warnings(track: MomentTrack, bounds: tuple[float, float]) -> list[str]:
    a, A = bounds
    out = []
    if track.f1.min() < a or track.f1.max() > A:
        out.append(f"f'(1) leaves [{a:g}, {A:g}]")
    if track.f2.min() < a or track.f2.max() > A:
        out.append(f"f''(1) leaves [{a:g}, {A:g}]")
    return out


def linear_fractional_bound(track: MomentTrack, n: int) -> float:
    """``4 / (2 + mu_n rho_{0,n})`` (valid for linear-fractional environments)."""
    if not track.linear_fractional:
        raise FamilyMismatch("the explicit bound holds for linear-fractional environments only")
    return 4.0 / (2.0 + track.mu_rho[n])


# --- batch report -----------------------------------------------------------

COLUMNS = (
    "n",
    "mu",
    "rho",
    "mu_rho",
    "r_n",
    "s_n",
    "thm4_shape",
    "thm5_shape",
    "cor_shape",
    "s_n_negative_log",
)


@dataclass
class RateBoundReport:
    """One row per ``n = 2..N``; ``lf_exact_bound`` present for
    linear-fractional environments."""

    n: np.ndarray
    mu: np.ndarray
    rho: np.ndarray
    mu_rho: np.ndarray
    r_n: np.ndarray
    s_n: np.ndarray
    thm4_shape: np.ndarray
    thm5_shape: np.ndarray
    cor_shape: np.ndarray
    s_n_negative_log: np.ndarray
    lf_exact_bound: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    @property
    def columns(self) -> tuple[str, ...]:
        return COLUMNS + (("lf_exact_bound",) if self.lf_exact_bound is not None else ())

    def rows(self):
        cols = self.columns
        for i in range(self.n.size):
            yield {c: getattr(self, c)[i] for c in cols}

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows():
            w.writerow([_fmt(v) for v in row.values()])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


def rate_bound_report(env: Environment, N: int, track: MomentTrack | None = None) -> RateBoundReport:
    if N < 2:
        raise ValueError("r_n defined for n >= 2")
    track = track or moment_sequences(env, N)
    r = rn_batch(track)
    s, neg = sn_batch(track)
    ns = np.arange(2, N + 1)
    mr = track.mu_rho
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = track.rho[ns]
        thm4 = 1.0 / mr[ns] + r[ns] / rho
        logs = np.log(mr[ns]) + np.log(track.f1[ns - 1])
        core = logs / mr[ns] + s[ns] / rho
        thm5 = (1.0 + track.mmax[ns]) ** 5 * core
        cor = np.log(mr[ns]) / mr[ns] + s[ns] / rho
    bad = ~(rho > 0)
    for arr in (thm4, thm5, cor):
        arr[bad] = np.nan
    lf = 4.0 / (2.0 + mr[ns]) if track.linear_fractional else None
    warnings = theorem5_warnings(track)
    if np.any(bad):
        warnings.append("rho_(0,n) = 0 for some n: shapes undefined (not critical over horizon)")
    if np.any(neg[ns]):
        warnings.append("s_n contains negative log factors (rho mu f' < 1)")
    warnings.append("s_1 = s_2 = 0 by convention; r_1 not applicable")
    return RateBoundReport(
        n=ns,
        mu=track.mu[ns],
        rho=rho,
        mu_rho=mr[ns],
        r_n=r[ns],
        s_n=s[ns],
        thm4_shape=thm4,
        thm5_shape=thm5,
        cor_shape=cor,
        s_n_negative_log=neg[ns],
        lf_exact_bound=lf,
        warnings=warnings,
    )
