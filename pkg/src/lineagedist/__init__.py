"""Size distributions of lineages growing as linear birth-death processes.

Sublineages originate at rate ``rho`` and grow with per-capita birth rate
``lam`` and death rate ``mu``.  The package evaluates the resulting size
law exactly and by two ``1/n`` approximations, simulates it, and fits
``(rho/omega, mu/lam)`` to observed sizes.
"""

__version__ = "0.1.0"

from .birthdeath import (  # noqa: E402
    ModelParams,
    Regime,
    age_density,
    bd_extinction,
    bd_pmf,
    bd_truncated_pmf,
    pure_birth_pmf,
)
from .distributions import (  # noqa: E402
    MethodKind,
    QuadratureConfig,
    SecondOrderCoefficients,
    exact_tail_quadrature,
    exact_tail_series,
    extinction_mass,
    pmf,
    pure_birth_weighted_pmf,
    q_asymptotic,
    q_finite_tau,
    q_integral_exact,
    q_second_order,
    q_series_exact,
    q_time_domain,
    raw_scale,
    second_order_coefficients,
)
from .errors import (  # noqa: E402
    DomainError,
    LineageDistError,
    QuadratureError,
    RegimeError,
    SeriesConvergenceError,
)
from .inference import FitResult, ObservedCounts, fit_mle, log_likelihood, tail_flag  # noqa: E402
from .simulate import SimulationConfig, SizeSample, sample_lineage_size, simulate_bd_at_time  # noqa: E402
from .special import SeriesControl, gauss_2f1, ln_beta, ln_gamma, pochhammer  # noqa: E402
from .tails import (  # noqa: E402
    CdfRequest,
    QuantileRequest,
    approximation_error_report,
    cdf,
    quantile,
    tail_probability,
)

__all__ = [
    "ModelParams",
    "Regime",
    "age_density",
    "bd_extinction",
    "bd_pmf",
    "bd_truncated_pmf",
    "pure_birth_pmf",
    "MethodKind",
    "QuadratureConfig",
    "SecondOrderCoefficients",
    "exact_tail_quadrature",
    "exact_tail_series",
    "extinction_mass",
    "pmf",
    "pure_birth_weighted_pmf",
    "q_asymptotic",
    "q_finite_tau",
    "q_integral_exact",
    "q_second_order",
    "q_series_exact",
    "q_time_domain",
    "raw_scale",
    "second_order_coefficients",
    "DomainError",
    "LineageDistError",
    "QuadratureError",
    "RegimeError",
    "SeriesConvergenceError",
    "FitResult",
    "ObservedCounts",
    "fit_mle",
    "log_likelihood",
    "tail_flag",
    "SimulationConfig",
    "SizeSample",
    "sample_lineage_size",
    "simulate_bd_at_time",
    "SeriesControl",
    "gauss_2f1",
    "ln_beta",
    "ln_gamma",
    "pochhammer",
    "CdfRequest",
    "QuantileRequest",
    "approximation_error_report",
    "cdf",
    "quantile",
    "tail_probability",
]
