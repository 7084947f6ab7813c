import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwve.bounds import (
    DivisionByZero,
    corollary_shape,
    linear_fractional_bound,
    moment_sequences,
    rate_bound_report,
    rn,
    rn_batch,
    sn,
    sn_batch,
    theorem4_shape,
    theorem5_shape,
    theorem5_warnings,
)
from gwve.environments import (
    Environment,
    linear_fractional_constant,
    poisson_increasing,
    poisson_sqrt_decay,
    symmetric_example,
)
from gwve.exact import FamilyMismatch
from gwve.laws import ExplicitPMF, Poisson, dirac

from conftest import builtin_envs

LF = linear_fractional_constant()  # sigma^2 = 2, mean one


def test_poisson_increasing_ledger():
    t = moment_sequences(poisson_increasing(), 3)
    assert t.mu[3] == pytest.approx(3.0)
    assert t.rho[3] == pytest.approx(2.5)
    assert t.mu[0] == 1.0


def test_constant_rho_linear():
    t = moment_sequences(LF, 50)
    assert np.allclose(t.rho, 2.0 * np.arange(51))


def test_symmetric_rho():
    a = 0.5
    t = moment_sequences(symmetric_example(a), 30)
    ref = np.concatenate(([0.0], np.cumsum(np.arange(1, 31) ** -a)))
    assert np.allclose(t.mu, 1.0)
    assert np.allclose(t.rho, ref, rtol=1e-13)


def test_log_space_fallback_keeps_ratios():
    t = moment_sequences(poisson_sqrt_decay(), 600_000)
    n = 600_000
    assert t.log_mu[n] == pytest.approx(-math.sqrt(n), rel=1e-9)
    assert t.scaled[n] and math.isinf(t.rho[n])  # rho itself leaves double range
    mr = t.mu_rho
    assert np.all(np.isfinite(mr[1:]))
    k = np.arange(n)
    oracle = math.fsum(np.exp(np.sqrt(k) - math.sqrt(n)))  # mu_n rho_n for nu = 1
    assert mr[n] == pytest.approx(oracle, rel=1e-9)
    # agreement with the direct values where both are representable
    k = 1000
    assert mr[k] == pytest.approx(t.mu[k] * t.rho[k], rel=1e-12)


def test_rn_examples():
    t = moment_sequences(LF, 10)
    assert rn(LF, t, 2) == pytest.approx(6.0)
    assert rn(LF, t, 3) == pytest.approx(7.0)
    assert theorem4_shape(t, rn(LF, t, 3), 3) == pytest.approx(4 / 3)


@pytest.mark.parametrize("n", [2, 5, 40])
def test_rn_constant_harmonic(n):
    t = moment_sequences(LF, n)
    H = math.fsum(1 / k for k in range(1, n))
    assert rn(LF, t, n) == pytest.approx(2 * H + 4, rel=1e-13)


def test_rn_only_last_term():
    laws = [dirac(1)] * 4 + [ExplicitPMF([0.25, 0.5, 0.25])]
    env = Environment.from_list(laws)
    t = moment_sequences(env, 5)
    assert rn(env, t, 5) == pytest.approx(0.5 * 2)


def test_rn_division_by_zero():
    laws = [ExplicitPMF([0.25, 0.5, 0.25])] + [dirac(1)] * 3
    env = Environment.from_list(laws)
    t = moment_sequences(env, 4)
    with pytest.raises(DivisionByZero):
        rn(env, t, 4)


def test_rn_undefined_below_two():
    with pytest.raises(ValueError):
        rn(LF, moment_sequences(LF, 3), 1)


def test_sn_examples():
    t = moment_sequences(poisson_increasing(), 4)
    ref = 1.5 * math.log(2) + (2 / 3) * math.log(11.25)
    assert sn(None, t, 4) == pytest.approx(ref, rel=1e-13)
    assert sn(None, t, 4) == pytest.approx(2.654, abs=1e-3)
    assert sn(None, t, 2) == 0.0
    assert np.all(sn_batch(moment_sequences(LF, 100))[0] == 0)
    assert np.all(sn_batch(moment_sequences(symmetric_example(0.5), 100))[0] == 0)


def test_theorem5_and_corollary_examples():
    t = moment_sequences(LF, 8)
    assert theorem5_shape(t, 0.0, 8) == pytest.approx(32 * math.log(16) / 16)
    assert corollary_shape(t, 0.0, 8) == pytest.approx(math.log(16) / 16)


def test_corollary_sqrt_decay():
    n = 100
    t = moment_sequences(poisson_sqrt_decay(), n)
    # independent oracle: mu_k = exp(-sqrt k), nu = 1, so mu_n rho_n = sum_k exp(sqrt k - sqrt n)
    mr_ref = math.fsum(math.exp(math.sqrt(k) - math.sqrt(n)) for k in range(n))
    mr = t.mu_rho[n]
    assert mr == pytest.approx(mr_ref, rel=1e-12)
    s, _ = sn_batch(t)
    first = math.log(mr) / mr
    assert corollary_shape(t, s[n], n) - s[n] / t.rho[n] == pytest.approx(first, rel=1e-12)
    # the asymptotic mu_n rho_n ~ 2 sqrt(n) is only approached slowly: 17.5 vs 20 at n = 100
    assert mr == pytest.approx(2 * math.sqrt(n), rel=0.15)
    assert first == pytest.approx(math.log(20) / 20, rel=0.15)


def test_theorem5_warnings():
    assert theorem5_warnings(moment_sequences(symmetric_example(0.5), 50))
    assert not theorem5_warnings(moment_sequences(poisson_increasing(), 50))
    t = moment_sequences(poisson_increasing(), 50)
    assert t.mmax[50] == 2.0


def test_linear_fractional_bound():
    t = moment_sequences(LF, 4)
    assert linear_fractional_bound(t, 4) == pytest.approx(0.4)
    assert linear_fractional_bound(t, 1) == pytest.approx(1.0)
    with pytest.raises(FamilyMismatch):
        linear_fractional_bound(moment_sequences(poisson_increasing(), 4), 4)
    t = moment_sequences(LF, 200)
    b = [linear_fractional_bound(t, n) for n in range(1, 201)]
    assert np.all(np.diff(b) < 0)


def test_report_columns_and_values():
    rep = rate_bound_report(LF, 100)
    cols = rep.columns
    assert "lf_exact_bound" in cols and "s_n" in cols
    rows = list(rep.rows())
    assert rows[0]["n"] == 2 and rows[-1]["n"] == 100
    assert all(r["s_n"] == 0 for r in rows)
    header = rep.to_csv().splitlines()[0].split(",")
    assert header == list(cols)
    with pytest.raises(ValueError, match="n >= 2"):
        rate_bound_report(LF, 1)


def test_report_entries_finite_nonnegative(any_env):
    if any_env.name == "dirac-1":
        pytest.skip("rho vanishes")
    for r in rate_bound_report(any_env, 60).rows():
        for key in ("r_n", "thm4_shape", "cor_shape"):
            assert math.isfinite(r[key]) and r[key] >= 0 or key == "cor_shape"


def test_theorem4_shape_constant_rate():
    N = 10_000
    t = moment_sequences(LF, N)
    r = rn_batch(t)
    ns = np.arange(10, N + 1)
    shape = 1 / t.mu_rho[ns] + r[ns] / t.rho[ns]
    d = shape * ns / np.log(ns)
    assert d.max() / d.min() < 5


@pytest.mark.parametrize("name", sorted(builtin_envs()))
def test_batch_rn_matches_direct(name):
    env = builtin_envs()[name]
    if name == "dirac":
        pytest.skip("rho vanishes")
    t = moment_sequences(env, 80)
    batch = rn_batch(t)
    for n in (2, 3, 17, 80):
        assert batch[n] == pytest.approx(rn(env, t, n), rel=1e-12)
    assert np.isnan(batch[1])


@pytest.mark.parametrize("name", sorted(builtin_envs()))
def test_rho_and_running_max_nondecreasing(name):
    t = moment_sequences(builtin_envs()[name], 300)
    assert np.all(np.diff(t.rho) >= 0)
    assert np.all(np.diff(t.mmax[1:]) >= 0)


def _env_from_lambdas(lams):
    return Environment.from_list([Poisson(x) for x in lams])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0.5, max_value=2.0), min_size=5, max_size=40))
def test_sn_nondecreasing_when_logs_nonnegative(lams):
    env = _env_from_lambdas(lams)
    N = len(lams)
    t = moment_sequences(env, N)
    k = np.arange(1, N + 1)
    if np.any(t.mu_rho[k] * t.f1[k - 1] < 1):
        return
    s, neg = sn_batch(t)
    assert not neg.any()
    assert np.all(np.diff(s[2:]) >= -1e-12 * np.abs(s[3:]).max(initial=1))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0.3, max_value=3.0), min_size=2, max_size=30))
def test_ledger_recursions(lams):
    env = _env_from_lambdas(lams)
    N = len(lams)
    t = moment_sequences(env, N)
    assert t.mu[0] == 1.0
    assert t.mu[N] == pytest.approx(math.prod(lams), rel=1e-12)
    # Poisson: nu_k = 1, so rho_n = sum_{k<n} 1/mu_k
    assert t.rho[N] == pytest.approx(math.fsum(1 / t.mu[k] for k in range(N)), rel=1e-12)
    assert np.all(np.diff(t.rho) >= 0) and np.all(np.diff(t.mmax[1:]) >= 0)
