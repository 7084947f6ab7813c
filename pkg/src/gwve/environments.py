"""Environments: generation-indexed sequences of offspring laws.

An :class:`Environment` maps ``n >= 1`` to the reproduction law ``q_n`` of
the individuals of generation ``n - 1``.  Laws are cached so repeated calls
return the identical object.  Environments can be built from named families
with :class:`~gwve.seqexpr.SeqExpr` parameters, from a constant law, from a
finite list with an extension rule, from an arbitrary callable, or from the
JSON document described in :func:`environment_from_dict`.

The diagnostics (:func:`check_starstar`, :func:`classify`) only ever give
finite-horizon evidence: criticality is an asymptotic property.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .laws import (
    ExplicitPMF,
    LawValidationError,
    LinearFractional,
    OffspringLaw,
    Poisson,
    SymmetricPerturbation,
    dirac,
)
from .seqexpr import SeqExpr, SeqExprError, parse_seq_expr

__all__ = [
    "EnvironmentError_",
    "HorizonError",
    "SchemaError",
    "Environment",
    "StarStarReport",
    "CriticalityReport",
    "check_starstar",
    "classify",
    "environment_from_dict",
    "load_environment",
    "builtin_environment",
    "BUILTIN_NAMES",
    "symmetric_example",
    "poisson_increasing",
    "poisson_sqrt_decay",
    "linear_fractional_constant",
    "constant_dirac",
]

EXTENSIONS = ("error", "cycle", "hold-last")
FAMILIES = ("poisson", "linear_fractional", "symmetric", "constant_pmf", "list")


class EnvironmentError_(ValueError):
    """Invalid environment or law at some generation."""


class HorizonError(EnvironmentError_, IndexError):
    pass


class SchemaError(EnvironmentError_):
    """JSON environment document does not match the schema; ``path`` locates it."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class Environment:
    """A deterministic environment ``n -> q_n``.

    Parameters
    ----------
    generator:
        Callable returning the law for generation ``n >= 1``.
    horizon:
        Last generation for which the environment is declared valid, or
        ``None`` for an unbounded environment.
    name:
        Label used in reports.
    family:
        Family tag: one of ``"poisson"``, ``"linear_fractional"``,
        ``"symmetric"``, ``"constant_pmf"``, ``"list"``, ``"custom"``.
    """

    def __init__(
        self,
        generator: Callable[[int], OffspringLaw],
        horizon: int | None = None,
        name: str = "custom",
        family: str = "custom",
        constant: bool = False,
        source: dict | None = None,
    ):
        if horizon is not None and horizon < 0:
            raise EnvironmentError_("horizon must be nonnegative")
        self._generator = generator
        self.horizon = horizon
        self.name = name
        self.family = family
        self.is_constant = constant
        self.source = source
        self._cache: dict[int, OffspringLaw] = {}

    def __repr__(self):
        return f"Environment(name={self.name!r}, family={self.family!r}, horizon={self.horizon})"

    def law(self, n: int) -> OffspringLaw:
        """The offspring law ``q_n`` (``n >= 1``)."""
        n = int(n)
        if n < 1:
            raise HorizonError(f"generations are indexed from 1, got {n}")
        if self.horizon is not None and n > self.horizon:
            raise HorizonError(f"generation {n} beyond declared horizon {self.horizon}")
        law = self._cache.get(n)
        if law is None:
            try:
                law = self._generator(n)
            except (SeqExprError, LawValidationError) as exc:
                raise EnvironmentError_(f"{self.name}: invalid law at generation {n}: {exc}") from exc
            if not isinstance(law, OffspringLaw):
                raise EnvironmentError_(f"{self.name}: generator returned {type(law).__name__} at n={n}")
            self._cache[n] = law
        return law

    __getitem__ = law

    def laws(self, n_max: int, start: int = 1) -> list[OffspringLaw]:
        return [self.law(k) for k in range(start, n_max + 1)]

    def moments(self, n_max: int) -> np.ndarray:
        """Array of shape ``(n_max, 3)``; row ``n-1`` holds ``(f_n', f_n'', f_n''')``."""
        if n_max == 0:
            return np.zeros((0, 3))
        return np.array([self.law(k).moments() for k in range(1, n_max + 1)], dtype=float)

    def shift(self, m: int) -> "Environment":
        """The shifted environment ``Q_m = (q_{m+1}, q_{m+2}, ...)``."""
        if m < 0:
            raise ValueError("shift must be nonnegative")
        if m == 0:
            return self
        hz = None if self.horizon is None else self.horizon - m
        return Environment(
            lambda n: self.law(n + m),
            horizon=hz,
            name=f"{self.name}[+{m}]",
            family=self.family,
            constant=self.is_constant,
        )

    def is_linear_fractional(self, n_max: int) -> bool:
        if self.family == "linear_fractional":
            return True
        return all(isinstance(self.law(k), LinearFractional) for k in range(1, n_max + 1))

    # --- constructors -------------------------------------------------

    @classmethod
    def constant(cls, law: OffspringLaw, name: str | None = None, horizon: int | None = None):
        fam = {Poisson: "poisson", LinearFractional: "linear_fractional"}.get(type(law), "constant_pmf")
        if isinstance(law, SymmetricPerturbation):
            fam = "symmetric"
        return cls(lambda n: law, horizon=horizon, name=name or f"constant {law!r}", family=fam, constant=True)

    @classmethod
    def from_list(cls, laws, extension: str = "error", name: str = "list"):
        """Finite list ``[q_1, ..., q_L]`` extended by ``error`` (default),
        ``cycle`` or ``hold-last``."""
        laws = list(laws)
        if not laws:
            raise EnvironmentError_("law list is empty")
        if extension not in EXTENSIONS:
            raise EnvironmentError_(f"unknown extension rule {extension!r}; use one of {EXTENSIONS}")
        L = len(laws)

        def gen(n):
            if n <= L:
                return laws[n - 1]
            if extension == "cycle":
                return laws[(n - 1) % L]
            return laws[-1]

        constant = L == 1 and extension != "error"
        return cls(gen, horizon=L if extension == "error" else None, name=name, family="list", constant=constant)

    @classmethod
    def custom(cls, generator: Callable[[int], OffspringLaw], horizon: int | None = None, name: str = "custom"):
        return cls(generator, horizon=horizon, name=name)


# --- JSON schema --------------------------------------------------------

_FAMILY_PARAMS = {
    "poisson": ("lambda",),
    "linear_fractional": ("a", "p"),
    "symmetric": ("delta",),
}


def _as_seq(value, path: str) -> Callable[[int], float]:
    if isinstance(value, bool):
        raise SchemaError(path, "expected a number or expression string")
    if isinstance(value, (int, float)):
        x = float(value)
        return lambda n: x
    if isinstance(value, str):
        try:
            expr = parse_seq_expr(value)
        except SeqExprError as exc:
            raise SchemaError(path, str(exc)) from exc
        return expr
    raise SchemaError(path, "expected a number or expression string")


def _family_law(family: str, values: Mapping[str, float]) -> OffspringLaw:
    if family == "poisson":
        return Poisson(values["lambda"])
    if family == "linear_fractional":
        return LinearFractional(values["a"], values["p"])
    return SymmetricPerturbation(values["delta"])


def _law_from_dict(d, path: str) -> OffspringLaw:
    if not isinstance(d, dict) or "kind" not in d:
        raise SchemaError(path, "law must be an object with a 'kind' field")
    kind = d["kind"]
    try:
        if kind == "pmf":
            return ExplicitPMF(np.asarray(d["probs"], dtype=float))
        if kind == "poisson":
            return Poisson(float(d["lambda"]))
        if kind == "linear_fractional":
            return LinearFractional(float(d["a"]), float(d["p"]))
        if kind == "symmetric":
            return SymmetricPerturbation(float(d["delta"]))
    except KeyError as exc:
        raise SchemaError(f"{path}.{exc.args[0]}", "missing field") from None
    except (LawValidationError, TypeError, ValueError) as exc:
        raise SchemaError(path, str(exc)) from None
    raise SchemaError(f"{path}.kind", f"unknown law kind {kind!r}")


def environment_from_dict(doc: Mapping[str, Any], name: str | None = None) -> Environment:
    """Build an environment from the JSON schema.

    ``{"family": F, "params": {...}, "horizon": N, "overrides": {"n": {...}}}``

    * ``poisson``: ``params = {"lambda": X}``
    * ``linear_fractional``: ``params = {"a": X, "p": X}``
    * ``symmetric``: ``params = {"delta": X}``
    * ``constant_pmf``: ``params = {"probs": [q0, q1, ...]}``
    * ``list``: ``params = {"laws": [LAW, ...], "extension": "error"|"cycle"|"hold-last"}``
      where ``LAW`` is ``{"kind": "pmf"|"poisson"|"linear_fractional"|"symmetric", ...}``
      with the same parameter names (``probs``, ``lambda``, ``a``/``p``, ``delta``).

    ``X`` is a number or an expression string in ``n``.  The optional
    ``overrides`` object replaces family parameters at individual generations
    (keys are decimal generation numbers), e.g. ``{"1": {"lambda": 1}}``.
    ``horizon`` is optional.
    """
    if not isinstance(doc, Mapping):
        raise SchemaError("$", "environment document must be a JSON object")
    unknown = set(doc) - {"family", "params", "horizon", "overrides", "name"}
    if unknown:
        raise SchemaError(f"$.{sorted(unknown)[0]}", "unknown field")
    family = doc.get("family")
    if family not in FAMILIES:
        raise SchemaError("$.family", f"expected one of {FAMILIES}, got {family!r}")
    params = doc.get("params", {})
    if not isinstance(params, Mapping):
        raise SchemaError("$.params", "expected an object")
    horizon = doc.get("horizon")
    if horizon is not None and (isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 0):
        raise SchemaError("$.horizon", "expected a nonnegative integer")
    name = name or doc.get("name") or family
    src = dict(doc)

    if family == "constant_pmf":
        if "probs" not in params:
            raise SchemaError("$.params.probs", "missing field")
        law = _law_from_dict({"kind": "pmf", "probs": params["probs"]}, "$.params")
        env = Environment.constant(law, name=name, horizon=horizon)
        env.source = src
        return env

    if family == "list":
        laws = params.get("laws")
        if not isinstance(laws, list) or not laws:
            raise SchemaError("$.params.laws", "expected a non-empty array of laws")
        ext = params.get("extension", "error")
        if ext not in EXTENSIONS:
            raise SchemaError("$.params.extension", f"expected one of {EXTENSIONS}")
        env = Environment.from_list(
            [_law_from_dict(d, f"$.params.laws[{i}]") for i, d in enumerate(laws)], ext, name=name
        )
        if horizon is not None:
            if ext == "error" and horizon > len(laws):
                raise SchemaError("$.horizon", f"exceeds list length {len(laws)} with extension 'error'")
            env.horizon = horizon
        env.source = src
        return env

    keys = _FAMILY_PARAMS[family]
    for k in params:
        if k not in keys:
            raise SchemaError(f"$.params.{k}", "unknown parameter")
    seqs = {}
    for k in keys:
        if k not in params:
            raise SchemaError(f"$.params.{k}", "missing field")
        seqs[k] = _as_seq(params[k], f"$.params.{k}")
    constant = all(not isinstance(v, str) for v in params.values())

    overrides: dict[int, dict[str, Callable]] = {}
    raw_over = doc.get("overrides", {})
    if not isinstance(raw_over, Mapping):
        raise SchemaError("$.overrides", "expected an object")
    for key, val in raw_over.items():
        path = f"$.overrides.{key}"
        try:
            gen_n = int(key)
        except ValueError:
            raise SchemaError(path, "keys must be generation numbers") from None
        if gen_n < 1 or not isinstance(val, Mapping):
            raise SchemaError(path, "expected a generation >= 1 mapped to an object")
        for k in val:
            if k not in keys:
                raise SchemaError(f"{path}.{k}", "unknown parameter")
        overrides[gen_n] = {k: _as_seq(v, f"{path}.{k}") for k, v in val.items()}
    if overrides:
        constant = False

    def gen(n: int) -> OffspringLaw:
        local = {**seqs, **overrides.get(n, {})}
        return _family_law(family, {k: float(f(n)) for k, f in local.items()})

    return Environment(gen, horizon=horizon, name=name, family=family, constant=constant, source=src)


def load_environment(spec: str | Path) -> Environment:
    """Load ``builtin:NAME`` or a JSON file path."""
    s = str(spec)
    if s.startswith("builtin:"):
        return builtin_environment(s[len("builtin:"):])
    try:
        doc = json.loads(Path(s).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"malformed JSON: {exc}") from None
    return environment_from_dict(doc, name=Path(s).stem)


# --- built-in environments ---------------------------------------------


def symmetric_example(a: float = 0.5) -> Environment:
    """``q_n[0] = q_n[2] = delta_n/2`` with ``delta_n = n^-a``: mean one,
    ``f_n'' = n^-a``, ``f_n''' = 0``."""
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    return environment_from_dict(
        {"family": "symmetric", "params": {"delta": f"n^(-{a!r})"}}, name=f"symmetric-a{a:g}"
    )


def poisson_increasing() -> Environment:
    """Poisson with ``lambda_1 = 1`` and ``lambda_n = n/(n-1)``, so ``mu_n = n``."""
    return environment_from_dict(
        {"family": "poisson", "params": {"lambda": "n/(n-1)"}, "overrides": {"1": {"lambda": 1}}},
        name="poisson-increasing",
    )


def poisson_sqrt_decay() -> Environment:
    """Poisson with ``lambda_n = exp(-sqrt n)/exp(-sqrt(n-1))``, so ``mu_n = exp(-sqrt n)``.

    The ratio is evaluated as ``exp(sqrt(n-1) - sqrt(n))``, which agrees to
    rounding and does not underflow for large ``n``.
    """
    return environment_from_dict(
        {"family": "poisson", "params": {"lambda": "exp(sqrt(n-1)-sqrt(n))"}},
        name="poisson-sqrt-decay",
    )


def linear_fractional_constant(a: float = 0.5, p: float = 0.5) -> Environment:
    env = Environment.constant(LinearFractional(a, p), name=f"linear-fractional-a{a:g}-p{p:g}")
    return env


def constant_dirac() -> Environment:
    """Every individual has exactly one child."""
    return Environment.constant(dirac(1), name="dirac-1")


_BUILTINS: dict[str, Callable[..., Environment]] = {
    "symmetric": symmetric_example,
    "poisson-increasing": poisson_increasing,
    "poisson-sqrt-decay": poisson_sqrt_decay,
    "linear-fractional": linear_fractional_constant,
    "dirac": constant_dirac,
}
BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_environment(spec: str) -> Environment:
    """``NAME`` or ``NAME:ARG[,ARG]``, e.g. ``symmetric:0.5`` or
    ``linear-fractional:0.5,0.5``."""
    name, _, args = spec.partition(":")
    if name not in _BUILTINS:
        raise SchemaError("builtin", f"unknown built-in {name!r}; choose from {BUILTIN_NAMES}")
    try:
        vals = [float(x) for x in args.split(",")] if args else []
        return _BUILTINS[name](*vals)
    except (TypeError, ValueError) as exc:
        raise SchemaError("builtin", f"bad arguments for {name!r}: {exc}") from None


# --- diagnostics --------------------------------------------------------


@dataclass(frozen=True)
class StarStarReport:
    """Third-moment condition ``f_n''' <= c f_n'' (1 + f_n')`` over a horizon."""

    c: float
    ok: np.ndarray
    c_n: np.ndarray
    c_sup: float

    @property
    def all_ok(self) -> bool:
        return bool(np.all(self.ok))


def _c_min(f1: float, f2: float, f3: float) -> float:
    if f2 == 0.0:
        return 0.0 if f3 == 0.0 else math.inf
    return f3 / (f2 * (1.0 + f1))


def check_starstar(env: Environment, horizon: int, c: float = 1.0) -> StarStarReport:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not c > 0:
        raise ValueError("c must be positive")
    mom = env.moments(horizon)
    c_n = np.array([_c_min(*row) for row in mom])
    ok = mom[:, 2] <= c * mom[:, 1] * (1.0 + mom[:, 0])
    return StarStarReport(c=c, ok=ok, c_n=c_n, c_sup=float(np.max(c_n)))


FINITE_HORIZON_LABEL = "finite-horizon evidence"


@dataclass(frozen=True)
class CriticalityReport:
    """Moment ledger and heuristic criticality flags over ``1..horizon``."""

    horizon: int
    mu: np.ndarray
    rho: np.ndarray
    mu_rho: np.ndarray
    starstar_ok: np.ndarray
    starstar_c: float
    starstar_c_sup: float
    trend_flags: dict
    f1_min: float
    f1_max: float
    f2_min: float
    eps_trend: float
    label: str = FINITE_HORIZON_LABEL
    warnings: tuple = field(default_factory=tuple)

    @property
    def critical(self) -> bool:
        return bool(self.trend_flags["rho_increasing_unbounded"] and self.trend_flags["mu_rho_increasing_unbounded"])

    def to_dict(self) -> dict:
        def clean(x):
            return x if math.isfinite(x) else str(x)

        return {
            "horizon": self.horizon,
            "label": self.label,
            "critical_evidence": self.critical,
            "trend_flags": dict(self.trend_flags),
            "eps_trend": self.eps_trend,
            "starstar_c": clean(self.starstar_c),
            "starstar_c_sup": clean(self.starstar_c_sup),
            "starstar_all_ok": bool(np.all(self.starstar_ok)),
            "f1_min": self.f1_min,
            "f1_max": self.f1_max,
            "f2_min": self.f2_min,
            "warnings": list(self.warnings),
            "rows": [
                {"n": n + 1, "mu": float(m), "rho": float(r), "mu_rho": float(mr), "starstar_ok": bool(ok)}
                for n, (m, r, mr, ok) in enumerate(zip(self.mu, self.rho, self.mu_rho, self.starstar_ok))
            ],
        }


def classify(env: Environment, horizon: int, eps_trend: float = 0.05, c: float | None = None) -> CriticalityReport:
    """Fill the moment ledger and flag heuristic evidence of criticality.

    A flag is raised when the quantity at ``N`` exceeds its value at
    ``ceil(N/2)`` by the relative margin ``eps_trend``.  The witness constant
    ``c`` for the third-moment condition defaults to the smallest feasible one.
    """
    from .bounds import moment_sequences

    if horizon < 3:
        raise ValueError("classify needs horizon >= 3")
    track = moment_sequences(env, horizon)
    mu = track.mu[1:]
    rho = track.rho[1:]
    mu_rho = track.mu_rho[1:]
    half = math.ceil(horizon / 2)
    flags = {
        "rho_increasing_unbounded": bool(rho[-1] > rho[half - 1] * (1 + eps_trend)),
        "mu_rho_increasing_unbounded": bool(mu_rho[-1] > mu_rho[half - 1] * (1 + eps_trend)),
    }
    star = check_starstar(env, horizon, 1.0)
    witness = c if c is not None else (star.c_sup if star.c_sup > 0 else 1.0)
    if c is not None or math.isfinite(witness):
        star = check_starstar(env, horizon, witness)
    warnings = []
    if not (flags["rho_increasing_unbounded"] and flags["mu_rho_increasing_unbounded"]):
        warnings.append("not critical over horizon")
    if not star.all_ok:
        warnings.append("third-moment condition fails at some generation")
    return CriticalityReport(
        horizon=horizon,
        mu=mu,
        rho=rho,
        mu_rho=mu_rho,
        starstar_ok=star.ok,
        starstar_c=float(witness),
        starstar_c_sup=star.c_sup,
        trend_flags=flags,
        f1_min=float(track.f1.min()),
        f1_max=float(track.f1.max()),
        f2_min=float(track.f2.min()),
        eps_trend=eps_trend,
        warnings=tuple(warnings),
    )
