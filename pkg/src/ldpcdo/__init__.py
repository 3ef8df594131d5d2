"""Large-deviations pricing of investment-grade CDO tranches.

Closed-form asymptotic prices, importance-sampled and plain Monte Carlo
engines, and exact oracles that cross-check them.
"""
from .errors import (
    AssumptionViolated,
    CombinatorialBlowup,
    DegenerateCurve,
    InvalidParameter,
    LdpCdoError,
    NonUniqueMinimizer,
    NoRoot,
    UndefinedSpread,
)
from .ldp import TiltedMeasure, TwoPointLaw, entropy_dual_gap, hbar, kappa, rate_I, tilted_split
from .models import (
    AssumptionReport,
    DefaultCurve,
    MertonCurve,
    ReducedFormCurve,
    TabulatedCurve,
    calibrate_flat_hazard,
    cdf,
    cdf_left_limit,
    curve_from_json,
    sample_default_time,
    validate_assumptions,
)
from .oracle import (
    DiscreteLaw,
    binomial_pmf,
    binomial_tail,
    enumerate_exact_price,
    local_clt_scan,
    rate_min_bruteforce,
)
from .pricer import (
    AsymptoticPrice,
    MixtureStates,
    TrancheSpec,
    dominant_state,
    gaussian_copula_states,
    granularity,
    mixture_protection_asymptotic,
    protection_leg_asymptotic,
    spread_asymptotic,
    theoretical_price_star,
    tilted_geometric_sum,
)
from .sim import Estimate, Scenario, is_price, mc_price, simulate_scenario, tilt_diagnostics

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated",
    "CombinatorialBlowup",
    "DegenerateCurve",
    "InvalidParameter",
    "LdpCdoError",
    "NonUniqueMinimizer",
    "NoRoot",
    "UndefinedSpread",
    "AssumptionReport",
    "DefaultCurve",
    "MertonCurve",
    "ReducedFormCurve",
    "TabulatedCurve",
    "calibrate_flat_hazard",
    "cdf",
    "cdf_left_limit",
    "curve_from_json",
    "sample_default_time",
    "validate_assumptions",
    "DiscreteLaw",
    "binomial_pmf",
    "binomial_tail",
    "enumerate_exact_price",
    "local_clt_scan",
    "rate_min_bruteforce",
    "AsymptoticPrice",
    "MixtureStates",
    "TrancheSpec",
    "dominant_state",
    "gaussian_copula_states",
    "granularity",
    "mixture_protection_asymptotic",
    "protection_leg_asymptotic",
    "spread_asymptotic",
    "theoretical_price_star",
    "tilted_geometric_sum",
    "TiltedMeasure",
    "TwoPointLaw",
    "entropy_dual_gap",
    "hbar",
    "kappa",
    "rate_I",
    "tilted_split",
    "Estimate",
    "Scenario",
    "is_price",
    "mc_price",
    "simulate_scenario",
    "tilt_diagnostics",
]
