import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwve.environments import (
    Environment,
    HorizonError,
    SchemaError,
    check_starstar,
    classify,
    constant_dirac,
    environment_from_dict,
    linear_fractional_constant,
    load_environment,
    poisson_increasing,
    symmetric_example,
)
from gwve.laws import ExplicitPMF, LinearFractional, Poisson, SymmetricPerturbation, dirac

from conftest import builtin_envs


def test_poisson_increasing_mean_is_n():
    rep = classify(poisson_increasing(), 100)
    assert rep.mu[-1] == pytest.approx(100.0, rel=1e-12)
    assert rep.trend_flags["rho_increasing_unbounded"]
    assert rep.trend_flags["mu_rho_increasing_unbounded"]
    assert rep.critical
    assert rep.label == "finite-horizon evidence"


def test_dirac_is_not_critical():
    rep = classify(constant_dirac(), 10)
    assert np.all(rep.rho == 0)
    assert not any(rep.trend_flags.values())
    assert any("not critical over horizon" in w for w in rep.warnings)


def test_symmetric_half_rho():
    rep = classify(symmetric_example(0.5), 100)
    assert np.all(rep.mu == 1.0)
    assert rep.rho[-1] == pytest.approx(math.fsum(k**-0.5 for k in range(1, 101)), rel=1e-12)
    assert rep.rho[-1] == pytest.approx(18.59, abs=0.01)
    assert rep.critical


def test_starstar_poisson():
    rep = check_starstar(poisson_increasing(), 50, c=1.0)
    assert rep.ok.all()
    assert rep.c_sup <= 1.0


def test_starstar_symmetric_zero_third_moment():
    rep = check_starstar(symmetric_example(0.5), 20, c=1e-9)
    assert rep.ok.all()
    assert np.all(rep.c_n == 0)


def test_starstar_degenerate_convention():
    env = Environment.constant(ExplicitPMF([0.5, 0.5]))
    assert np.all(check_starstar(env, 5).c_n == 0)


def test_symmetric_example_first_generation_has_no_single_child():
    law = symmetric_example(0.5).law(1)
    assert law.probs[1] == 0.0 and law.probs[0] == 0.5


def test_from_dict_poisson_with_override():
    env = environment_from_dict(
        {"family": "poisson", "params": {"lambda": "n/(n-1)"}, "overrides": {"1": {"lambda": 1}}, "horizon": 10}
    )
    assert env.law(1).mean == 1.0
    assert env.law(3).mean == pytest.approx(1.5)
    with pytest.raises(HorizonError):
        env.law(11)


def test_from_dict_linear_fractional_numbers():
    env = environment_from_dict({"family": "linear_fractional", "params": {"a": 0.5, "p": "1/2"}})
    assert env.law(7) == LinearFractional(0.5, 0.5)


def test_from_dict_list_extension_rules():
    doc = {"family": "list", "params": {"laws": [{"kind": "poisson", "lambda": 1}, {"kind": "pmf", "probs": [0.5, 0, 0.5]}]}}
    env = environment_from_dict(doc)
    assert np.allclose(env.law(2).probs, [0.5, 0, 0.5])
    with pytest.raises(HorizonError):
        env.law(3)
    doc["params"]["extension"] = "cycle"
    assert environment_from_dict(doc).law(3).mean == 1.0
    doc["params"]["extension"] = "hold-last"
    assert np.allclose(environment_from_dict(doc).law(5).probs, [0.5, 0, 0.5])


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"family": "poison", "params": {}}, "$.family"),
        ({"family": "poisson", "params": {}}, "$.params.lambda"),
        ({"family": "poisson", "params": {"lambda": 1}, "colour": 3}, "$.colour"),
        ({"family": "poisson", "params": {"lambda": "n+*"}}, "$.params.lambda"),
    ],
)
def test_schema_errors_carry_path(doc, path):
    with pytest.raises(SchemaError) as err:
        environment_from_dict(doc)
    assert err.value.path.startswith(path)


def test_load_malformed_json(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{family: ")
    with pytest.raises(SchemaError) as err:
        load_environment(f)
    assert err.value.path == "$"


def test_load_file_roundtrip(tmp_path):
    f = tmp_path / "env.json"
    f.write_text(json.dumps({"family": "symmetric", "params": {"delta": "n^(-1)"}}))
    env = load_environment(f)
    assert env.law(4).moments() == pytest.approx((1.0, 0.25, 0.0))


def test_builtin_arguments():
    env = load_environment("builtin:linear-fractional:0.25,0.5")
    assert env.law(1).mean == pytest.approx(0.5)
    with pytest.raises(SchemaError):
        load_environment("builtin:nope")


def test_moments_table_shape():
    m = linear_fractional_constant().moments(5)
    assert m.shape == (5, 3)
    assert np.allclose(m[:, 0], 1.0)


@pytest.mark.parametrize("name", sorted(builtin_envs()))
@pytest.mark.parametrize("n", [1, 2, 5, 17, 64])
def test_builtin_pmfs_nonnegative(name, n):
    law = builtin_envs()[name].law(n)
    p = law.pmf(64)
    assert np.all(p >= 0)
    assert p.sum() <= 1 + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.05, max_value=1.0), st.integers(min_value=1, max_value=400))
def test_symmetric_family_nonnegative_everywhere(a, n):
    p = symmetric_example(a).law(n).pmf(64)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)


def test_shift_starts_later():
    env = poisson_increasing().shift(3)
    assert env.law(1).mean == pytest.approx(4 / 3)
