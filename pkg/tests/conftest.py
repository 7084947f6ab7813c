import numpy as np
import pytest

from gwve.environments import (
    constant_dirac,
    linear_fractional_constant,
    poisson_increasing,
    poisson_sqrt_decay,
    symmetric_example,
)


def builtin_envs():
    """One representative of every built-in family."""
    return {
        "symmetric-0.5": symmetric_example(0.5),
        "symmetric-1": symmetric_example(1.0),
        "poisson-increasing": poisson_increasing(),
        "poisson-sqrt-decay": poisson_sqrt_decay(),
        "linear-fractional": linear_fractional_constant(),
        "dirac": constant_dirac(),
    }


@pytest.fixture(params=sorted(builtin_envs()))
def any_env(request):
    return builtin_envs()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
