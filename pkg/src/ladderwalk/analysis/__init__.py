from .traps import (
    BoundViolation, TrapChainSpec, escape_probability_bound, expected_trap_return_time,
    geometric_moment_bound, geometric_moment_sum, moment_bounds, ruin_probability, simulate_ruin,
    simulate_trap_excursions, trap_return_time_exact,
)
from .network import (
    DisconnectedError, effective_resistance, hitting_probability, nash_williams_bound,
    return_probability_bound, series_resistance,
)
from .clt import (
    CovarianceEstimate, NormalityReport, TaylorLimitReport, VarianceGrowth, clt_suite, covariance_estimate,
    derivative_importance_sampled, derivative_via_covariance, finite_difference, richardson, taylor_A_limit,
    variance_growth,
)
from .sojourn import SojournReport, trap_sojourn_moments, trap_sojourn_times
