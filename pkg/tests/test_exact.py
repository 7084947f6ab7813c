import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwve.bounds import moment_sequences
from gwve.environments import Environment, constant_dirac, linear_fractional_constant, symmetric_example
from gwve.exact import (
    DegenerateLawError,
    TruncatedPMF,
    TruncationError,
    composed_shape,
    composed_shape_direct,
    compose_pgf,
    conditional_law,
    conditional_law_auto,
    equilibrium_cdf,
    law_of_Zn,
    law_of_Zn_convolution,
    law_of_Zn_enumeration,
    prob_no_left_descendants,
    shape_function,
    size_biased_law,
    survival_prob,
    survival_prob_accurate,
)
from gwve.laws import ExplicitPMF, Poisson, ZeroMeanError
from gwve.wasserstein import tv_distance

from conftest import builtin_envs

LF = linear_fractional_constant()


def pmf(probs, tail=0.0):
    return TruncatedPMF(np.asarray(probs, dtype=float), tail, "closed-form")


# --- compositions and survival ------------------------------------------


def test_compose_identity_when_m_equals_n(any_env):
    assert compose_pgf(any_env, 3, 3, 0.3) == 0.3


def test_compose_at_one(any_env):
    assert compose_pgf(any_env, 0, 6, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_linear_fractional_iterate():
    assert compose_pgf(LF, 0, 4, 0.0) == pytest.approx(0.8, abs=1e-15)


def test_survival_examples():
    assert survival_prob(LF, 5, 5) == 1.0
    assert survival_prob(LF, 0, 9) == pytest.approx(0.1, abs=1e-15)
    assert survival_prob(constant_dirac(), 2, 7) == 1.0


@pytest.mark.parametrize("j,n", [(0, 3), (2, 9), (0, 30)])
def test_survival_is_one_minus_composition(any_env, j, n):
    assert survival_prob(any_env, j, n) == 1.0 - compose_pgf(any_env, j, n, 0.0)


def test_accurate_survival_agrees(any_env):
    assert survival_prob_accurate(any_env, 0, 12) == pytest.approx(survival_prob(any_env, 0, 12), rel=1e-12)


def test_exact_fraction_survival_lf():
    # f(s) = 1/(2 - s), iterated with exact rationals
    x = Fraction(0)
    for n in range(1, 40):
        x = 1 / (2 - x)
        assert x == Fraction(n, n + 1)
        assert survival_prob_accurate(LF, 0, n) == pytest.approx(1 / (n + 1), rel=1e-14)


# --- laws of Z_n ------------------------------------------------------------


def test_symmetric_first_generation():
    p = law_of_Zn(symmetric_example(1.0), 1, 8)
    assert p.probs[:3] == pytest.approx([0.5, 0.0, 0.5], abs=1e-15)


def test_symmetric_second_generation_extinction():
    p = law_of_Zn(symmetric_example(1.0), 2, 16)
    assert p.probs[0] == pytest.approx(0.53125, abs=1e-14)
    enum = law_of_Zn_enumeration(symmetric_example(1.0), 2)
    assert enum[0] == pytest.approx(0.53125, abs=1e-15)


def test_generation_zero_is_dirac():
    p = law_of_Zn(LF, 0, 8)
    assert p.probs.tolist() == [0, 1, 0, 0, 0, 0, 0, 0]
    Y, b = conditional_law(LF, 0, 8)
    assert b == 1.0 and Y.probs[1] == 1.0


def test_truncation_error():
    with pytest.raises(TruncationError) as err:
        law_of_Zn(LF, 30, 8)
    assert err.value.K == 8


def test_non_power_of_two_rejected():
    with pytest.raises(ValueError):
        law_of_Zn(LF, 3, 100)


@pytest.mark.parametrize("n", [1, 4, 12])
def test_dft_matches_convolution(any_env, n):
    K = 4096
    a = law_of_Zn(any_env, n, K)
    b = law_of_Zn_convolution(any_env, n, K)
    assert tv_distance(a, b) < 1e-10
    assert np.all(a.probs >= 0)
    assert a.probs.sum() + a.tail_mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("env", [symmetric_example(1.0), symmetric_example(0.5), Environment.constant(ExplicitPMF([0.25, 0.5, 0.25]))])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dft_matches_tree_enumeration(env, n):
    enum = law_of_Zn_enumeration(env, n)
    K = 32
    ref = np.zeros(K)
    for k, v in enum.items():
        ref[k] = v
    a = law_of_Zn(env, n, K)
    assert tv_distance(a, pmf(ref)) < 1e-12


def minimal_law(env, n, tol=1e-14):
    """Smallest power-of-two truncation whose tail is below ``tol``: the DFT
    round-off is O(eps) per entry, so a needlessly large K inflates moments
    weighted by k^2."""
    K = 64
    while True:
        try:
            return law_of_Zn(env, n, K, tol=tol)
        except TruncationError:
            K *= 2


@pytest.mark.parametrize("n", [1, 5, 12, 20])
def test_moment_identities(any_env, n):
    p = minimal_law(any_env, n)
    track = moment_sequences(any_env, n)
    mu, rho = track.mu[n], track.rho[n]
    assert abs(p.mean() - mu) <= 1e-8 * mu + p.tail_mass * p.K
    scale = max(rho * mu**2, mu**2)  # second factorial moment vanishes for the one-child law
    assert abs(p.factorial_moment2() - rho * mu**2) <= 1e-8 * scale + p.tail_mass * p.K**2


def test_linear_fractional_closed_form_tail():
    p = law_of_Zn(LF, 6, 256, method="closed-form")
    # P[Z_n >= K] = (n/(n+1))^(K-1) / (n+1) for the a=p=1/2 iterate
    assert p.tail_mass == pytest.approx((6 / 7) ** 255 / 7, rel=1e-12)
    d = law_of_Zn(LF, 6, 256)
    assert tv_distance(p, d) < 1e-12


# --- conditional laws -------------------------------------------------------


@pytest.mark.parametrize("n", [1, 4, 25])
def test_linear_fractional_conditional_is_geometric(n):
    Y, b = conditional_law(LF, n, 1 << 12)
    assert b == pytest.approx(n + 1, rel=1e-13)
    p = 1 / (n + 1)
    k = np.arange(1, 40)
    assert Y.probs[k] == pytest.approx(p * (1 - p) ** (k - 1), rel=1e-9, abs=1e-15)
    assert Y.probs[0] == 0.0


def test_b4_is_five():
    Y, b = conditional_law(LF, 4, 128)
    assert b == pytest.approx(5.0, rel=1e-14)
    assert Y.probs[1] == pytest.approx(0.2, abs=1e-14)


@pytest.mark.parametrize("n", [3, 10])
def test_conditional_matches_renormalised_law(any_env, n):
    if any_env.name == "dirac-1":
        pytest.skip("no extinction")
    K = 1 << 12
    Z = law_of_Zn(any_env, n, K)
    Y, b = conditional_law(any_env, n, K)
    ref = Z.probs.copy()
    ref[0] = 0.0
    ref /= 1.0 - Z.probs[0]
    assert np.max(np.abs(Y.probs - ref)) < 1e-10
    assert b == pytest.approx(moment_sequences(any_env, n).mu[n] / (1 - Z.probs[0]), rel=1e-9)


def test_auto_truncation_grows():
    Y, b = conditional_law_auto(LF, 500)
    assert Y.tail_mass <= 1e-8
    assert b == pytest.approx(501, rel=1e-12)


def test_method_choice_agrees():
    a, ba = conditional_law(LF, 9, 512)
    c, bc = conditional_law(LF, 9, 512, method="closed-form")
    assert tv_distance(a, c) < 1e-12 and ba == pytest.approx(bc, rel=1e-13)


# --- transforms ---------------------------------------------------------------


def test_size_biased_examples():
    assert size_biased_law(pmf([0, 1])).probs.tolist() == [0, 1]
    assert size_biased_law(pmf([0, 0.5, 0.5])).probs == pytest.approx([0, 1 / 3, 2 / 3])
    sb = size_biased_law(pmf([0.9] + [0] * 9 + [0.1]))
    assert sb.probs[10] == pytest.approx(1.0) and sb.probs[:10].sum() == 0


def test_size_bias_ignores_zero_mass():
    p = pmf([0.4, 0.3, 0.3])
    q = pmf([0.0, 0.5, 0.5])
    assert np.allclose(size_biased_law(p).probs, size_biased_law(q).probs)


def test_size_bias_zero_mean():
    with pytest.raises(ZeroMeanError):
        size_biased_law(pmf([1.0, 0.0]))


def test_equilibrium_examples():
    assert equilibrium_cdf(pmf([0, 1]), 0.5) == pytest.approx(0.5)
    assert equilibrium_cdf(pmf([0.2, 0.3, 0.5]), 0.0) == 0.0
    assert equilibrium_cdf(pmf([0, 0.5, 0.5]), 1.0) == pytest.approx(2 / 3)
    assert equilibrium_cdf(pmf([0, 0.5, 0.5]), 5.0) == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1), min_size=2, max_size=8).filter(lambda w: sum(w[1:]) > 0.05))
def test_equilibrium_is_uniform_times_size_biased(w):
    p = pmf(np.array(w) / sum(w))
    sb = size_biased_law(p).probs
    x = np.linspace(0, len(w) + 1, 37)
    # P[U k <= x] = min(1, x/k)
    ref = np.array([sum(sb[k] * min(1.0, xi / k) for k in range(1, len(w))) for xi in x])
    assert np.allclose(equilibrium_cdf(p, x), ref, atol=1e-12)


# --- shape functions ----------------------------------------------------------


def test_shape_of_pure_binary_split():
    law = ExplicitPMF([0, 0, 1.0])
    assert shape_function(law, 0.0).value == pytest.approx(0.5)
    assert shape_function(law, 1.0).value == pytest.approx(0.25)
    s = 0.37
    assert shape_function(law, s).value == pytest.approx(1 / (2 * (1 + s)), rel=1e-12)


def test_shape_poisson_limit():
    assert shape_function(Poisson(1.0), 1.0).value == pytest.approx(0.5)


def test_shape_degenerate():
    with pytest.raises(DegenerateLawError):
        shape_function(ExplicitPMF([0, 1.0]), 0.5)


def test_shape_continuous_across_switch():
    law = Poisson(1.3)
    below = shape_function(law, 1 - 1.01e-7).value
    above = shape_function(law, 1 - 0.99e-7).value
    assert below == pytest.approx(above, rel=1e-6)


SHAPE_LAWS = [
    law
    for env in builtin_envs().values()
    for law in (env.law(1), env.law(2), env.law(7))
    if not (isinstance(law, ExplicitPMF) and law.probs.size == 2 and law.probs[1] == 1.0)
]


@pytest.mark.parametrize("law", SHAPE_LAWS, ids=repr)
def test_shape_two_sided_bound_grid(law):
    """phi(1)/2 <= phi(s) <= 2 phi(1) on the grid s = 0, 0.1, ..., 1."""
    phi1 = shape_function(law, 1.0).value
    for s in np.round(np.arange(0, 1.01, 0.1), 10):
        v = shape_function(law, s).value
        assert v >= 0.5 * phi1 * (1 - 1e-9)
        assert v <= 2.0 * phi1 * (1 + 1e-9)
    if law.moments()[1] > 0:
        assert shape_function(law, 0.0).value > 0


def test_shape_may_exceed_its_limit():
    """For f(s) = s^2, phi(s) = 1/(2(1+s)) decreases, so phi(0) = 2 phi(1):
    the one-sided bound phi(s) <= phi(1) does not hold in general."""
    law = ExplicitPMF([0, 0, 1.0])
    assert shape_function(law, 0.0).value == pytest.approx(2 * shape_function(law, 1.0).value)


def test_shape_constant_for_linear_fractional():
    law = LF.law(1)
    vals = [shape_function(law, s).value for s in np.linspace(0, 1, 11)]
    assert np.allclose(vals, law.moments()[1] / 2, rtol=1e-9)


@pytest.mark.parametrize("law", [ExplicitPMF([0.3, 0.2, 0.1, 0.4]), ExplicitPMF([0.6, 0.0, 0.0, 0.4])])
def test_shape_nonnegative_explicit(law):
    for s in np.linspace(0, 1, 51):
        assert shape_function(law, s).value >= -1e-12


def test_composed_shape_single_generation():
    env = Environment.constant(Poisson(1.0))
    assert composed_shape(env, 0, 1, 0.3) == pytest.approx(shape_function(Poisson(1.0), 0.3).value, rel=1e-14)


def test_composed_shape_lf_example():
    assert composed_shape_direct(LF, 0, 3, 0.0) == pytest.approx(3.0, rel=1e-13)
    assert composed_shape(LF, 0, 3, 0.0) == pytest.approx(3.0, rel=1e-12)


def test_composed_shape_limit_matches_ledger(any_env):
    if any_env.name == "dirac-1":
        pytest.skip("degenerate")
    n = 9
    track = moment_sequences(any_env, n)
    assert composed_shape(any_env, 0, n, 1.0) == pytest.approx(track.rho[n] / 2, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["symmetric-0.5", "symmetric-1", "poisson-increasing", "poisson-sqrt-decay", "linear-fractional"]),
    st.integers(min_value=0, max_value=49),
    st.integers(min_value=1, max_value=50),
    st.floats(min_value=0.0, max_value=0.999),
)
def test_composed_shape_formula_equals_definition(name, k, m, s):
    env = builtin_envs()[name]
    n = min(k + m, 50)
    if k >= n:
        k = n - 1
    a = composed_shape(env, k, n, s)
    b = composed_shape_direct(env, k, n, s)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_prob_no_left_descendants_dirac_and_terminal():
    assert prob_no_left_descendants(constant_dirac(), 1, 5) == pytest.approx(1.0)
    # at j = n the left siblings live at generation n: P = 1 - delta/2
    assert prob_no_left_descendants(symmetric_example(1.0), 3, 3) == pytest.approx(1 - 1 / 6)
