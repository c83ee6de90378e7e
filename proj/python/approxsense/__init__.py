from ._core import (
    ApproxOperator,
    ApproxSenseError,
    crude_bounds,
    ellipse_rademacher,
    empirical_sensitivity,
    exact_rademacher,
    fast_rate_deviation_bound,
    geometry_rademacher,
    hoeffding_term,
    lambda_equivalence_bound,
    lambda_erm,
    massart_bound,
    mc_rademacher,
    run_suite,
    sensitivity_deviation_bound,
    stochastic_bound,
    suite_names,
    uniform_restricted_bound,
)

__all__ = [
    "ApproxOperator",
    "ApproxSenseError",
    "crude_bounds",
    "ellipse_rademacher",
    "empirical_sensitivity",
    "exact_rademacher",
    "fast_rate_deviation_bound",
    "geometry_rademacher",
    "hoeffding_term",
    "lambda_equivalence_bound",
    "lambda_erm",
    "massart_bound",
    "mc_rademacher",
    "run_suite",
    "sensitivity_deviation_bound",
    "stochastic_bound",
    "suite_names",
    "uniform_restricted_bound",
]
