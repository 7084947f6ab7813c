"""Galton-Watson processes in varying environments: exact laws, rate
bounds, Wasserstein distances to the exponential, and spine simulation."""

from .bounds import (
    MomentTrack,
    RateBoundReport,
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
)
from .environments import (
    CriticalityReport,
    Environment,
    builtin_environment,
    check_starstar,
    classify,
    constant_dirac,
    environment_from_dict,
    linear_fractional_constant,
    load_environment,
    poisson_increasing,
    poisson_sqrt_decay,
    symmetric_example,
)
from .exact import (
    TruncatedPMF,
    TruncationError,
    composed_shape,
    compose_pgf,
    conditional_law,
    equilibrium_cdf,
    law_of_Zn,
    shape_function,
    size_biased_law,
    survival_prob,
)
from .laws import (
    ExplicitPMF,
    LinearFractional,
    OffspringLaw,
    Poisson,
    SymmetricPerturbation,
    dirac,
    offspring_moments,
    pgf_eval,
)
from .seqexpr import SeqExpr, eval_seq_expr, parse_seq_expr
from .wasserstein import DistanceResult, dw_empirical_vs_exp, dw_scaled_pmf_vs_exp, tv_distance

__version__ = "0.1.0"
