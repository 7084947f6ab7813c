"""Monte Carlo for the process and for its size-biased tree with one spine.

The size-biased tree up to generation ``n`` is grown along the spine: at each
generation ``j`` the spine individual has ``S_j + 1`` children drawn from the
size-biased law of ``q_j``, one of them (uniformly chosen) continues the
spine, and the siblings to its left and right found independent ordinary
subtrees evolving under ``q_{j+1}, ..., q_n``.  Their generation-``n``
descendant counts are ``L_{n,j}`` and ``R_{n,j}``.  Then

    Zdot_n = L_n + R_n,  L_n = sum_j L_{n,j},  R_n = 1 + sum_j R_{n,j}.

Everything is vectorised over a batch of independent trees.  Subtree growth
draws each generation's total offspring of ``z`` parents from the exact law of
a sum of ``z`` i.i.d. offspring variables, which has the same joint law as
growing the subtree individual by individual.

Randomness: chunk ``c`` of a run with seed ``s`` uses its own
:class:`RngStream` ``(s, c)``, so results do not depend on how chunks are
distributed over workers.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .environments import Environment
from .laws import OffspringLaw, ZeroMeanError

__all__ = [
    "CapError",
    "RejectionBudgetExceeded",
    "RngStream",
    "SpineSample",
    "SpineBatch",
    "sample_offspring",
    "sample_size_biased_offspring",
    "sample_gw_path",
    "sample_gw_paths",
    "sample_spine_tree",
    "sample_spine_batch",
    "run_chunks",
    "DEFAULT_CAP",
    "CHUNK",
]

DEFAULT_CAP = 10**9
CHUNK = 1 << 16
REJECTION_BUDGET = 10**4


class CapError(RuntimeError):
    """A simulated population exceeded the configured ceiling."""


class RejectionBudgetExceeded(RuntimeError):
    def __init__(self, message: str, failures: int = 0, partial=None):
        self.failures = failures
        self.partial = partial
        super().__init__(message)


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0
    tag: int = 0

    def generator(self) -> np.random.Generator:
        key = (self.stream_id,) if self.tag == 0 else (self.stream_id, self.tag)
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


# --- single draws -------------------------------------------------------------


def sample_offspring(law: OffspringLaw, rng, size=None):
    """Draw from ``q`` (inverse CDF for explicit laws, exact samplers otherwise)."""
    return law.sample(_rng(rng), size)


def sample_size_biased_offspring(law: OffspringLaw, rng, size=None):
    """``(total, marked_index)``: ``total ~ k q[k]/f'(1)``, index uniform on ``1..total``."""
    if not law.mean > 0:
        raise ZeroMeanError("size-biasing needs a positive mean")
    g = _rng(rng)
    total = np.asarray(law.sample_size_biased(g, size))
    idx = 1 + np.floor(g.random(total.shape) * total).astype(np.int64)
    if size is None:
        return int(total), int(idx)
    return total, idx


def _evolve(env: Environment, counts: np.ndarray, start: int, n: int, g, cap: int) -> np.ndarray:
    """Generation-``n`` descendants of ``counts`` individuals living at
    generation ``start``."""
    z = np.asarray(counts, dtype=np.int64)
    for k in range(start + 1, n + 1):
        if not np.any(z):
            break
        z = np.asarray(env.law(k).sample_sum(z, g), dtype=np.int64)
        if z.max(initial=0) > cap:
            raise CapError(f"population {int(z.max())} exceeded cap {cap} at generation {k}")
    return z


def sample_gw_paths(env: Environment, n: int, size: int, rng, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``size`` independent paths ``Z_0..Z_n``, shape ``(size, n + 1)``."""
    g = _rng(rng)
    out = np.zeros((size, n + 1), dtype=np.int64)
    z = np.ones(size, dtype=np.int64)
    out[:, 0] = 1
    for k in range(1, n + 1):
        if np.any(z):
            z = np.asarray(env.law(k).sample_sum(z, g), dtype=np.int64)
            if z.max(initial=0) > cap:
                raise CapError(f"population {int(z.max())} exceeded cap {cap} at generation {k}")
        out[:, k] = z
    return out


def sample_gw_path(env: Environment, n: int, rng, cap: int = DEFAULT_CAP) -> np.ndarray:
    return sample_gw_paths(env, n, 1, rng, cap)[0]


# --- spine trees ------------------------------------------------------------


@dataclass(frozen=True)
class SpineSample:
    n: int
    zdot: int
    l: int
    r: int
    lj: np.ndarray
    rj: np.ndarray
    sj: np.ndarray


@dataclass
class SpineBatch:
    """``M`` independent spine trees; per-split arrays have shape ``(M, n)``
    with column ``j - 1`` for split ``j``."""

    n: int
    lj: np.ndarray
    rj: np.ndarray
    sj: np.ndarray
    ij: np.ndarray

    @property
    def M(self) -> int:
        return self.lj.shape[0]

    @property
    def l(self) -> np.ndarray:
        return self.lj.sum(axis=1)

    @property
    def r(self) -> np.ndarray:
        return 1 + self.rj.sum(axis=1)

    @property
    def zdot(self) -> np.ndarray:
        return self.l + self.r

    def sample(self, i: int) -> SpineSample:
        return SpineSample(
            self.n, int(self.zdot[i]), int(self.l[i]), int(self.r[i]),
            self.lj[i].copy(), self.rj[i].copy(), self.sj[i].copy(),
        )

    def check_invariants(self) -> None:
        l, r, z = self.l, self.r, self.zdot
        assert np.all(z == l + r)
        assert np.all(r >= 1)
        assert np.all(self.lj >= 0) and np.all(self.rj >= 0)
        assert np.all(self.ij >= 1) and np.all(self.ij <= self.sj + 1)


def _split(env: Environment, j: int, n: int, size: int, g, cap: int):
    """One spine split at generation ``j`` for ``size`` trees:
    ``(L_{n,j}, R_{n,j}, S_j, I_j)``."""
    total, idx = sample_size_biased_offspring(env.law(j), g, size)
    left = idx - 1
    right = total - idx
    return _evolve(env, left, j, n, g, cap), _evolve(env, right, j, n, g, cap), total - 1, idx


def sample_spine_batch(env: Environment, n: int, size: int, rng, cap: int = DEFAULT_CAP) -> SpineBatch:
    g = _rng(rng)
    lj = np.zeros((size, n), dtype=np.int64)
    rj = np.zeros((size, n), dtype=np.int64)
    sj = np.zeros((size, n), dtype=np.int64)
    ij = np.ones((size, n), dtype=np.int64)
    for j in range(1, n + 1):
        L, R, S, I = _split(env, j, n, size, g, cap)
        lj[:, j - 1], rj[:, j - 1], sj[:, j - 1], ij[:, j - 1] = L, R, S, I
    return SpineBatch(n, lj, rj, sj, ij)


def sample_spine_tree(env: Environment, n: int, rng, cap: int = DEFAULT_CAP) -> SpineSample:
    return sample_spine_batch(env, n, 1, rng, cap).sample(0)


def sample_conditioned_right(
    env: Environment, j: int, n: int, size: int, g, cap: int = DEFAULT_CAP, budget: int = REJECTION_BUDGET
) -> tuple[np.ndarray, int]:
    """``size`` draws of ``R~_{n,j}``, i.e. ``R_{n,j}`` conditioned on
    ``L_{n,j} = 0``, by redrawing the whole split until it is accepted.

    Returns the draws and the number that hit the retry budget (those are
    left at 0 and must be treated as a failure).
    """
    out = np.zeros(size, dtype=np.int64)
    pending = np.arange(size)
    rounds = 0
    while pending.size and rounds < budget:
        L, R, _, _ = _split(env, j, n, pending.size, g, cap)
        ok = L == 0
        out[pending[ok]] = R[ok]
        pending = pending[~ok]
        rounds += 1
    return out, int(pending.size)


# --- chunked execution --------------------------------------------------------


def chunk_sizes(M: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(M, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(fn: Callable, M: int, seed: int, workers: int = 1, chunk: int = CHUNK, tag: int = 0) -> list:
    """Call ``fn(size, rng)`` once per chunk with stream ``(seed, chunk_index)``
    and return the results in chunk order, whatever the worker count."""
    sizes = chunk_sizes(M, chunk)
    streams = [RngStream(seed, c, tag) for c in range(len(sizes))]
    if workers <= 1 or len(sizes) == 1:
        return [fn(s, st.generator()) for s, st in zip(sizes, streams)]
    global _TASK
    _TASK = fn  # inherited by forked workers; environments hold closures and do not pickle
    try:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
            return list(ex.map(_call_task, sizes, streams))
    finally:
        _TASK = None


_TASK: Callable | None = None


def _call_task(size, stream):
    return _TASK(size, stream.generator())
