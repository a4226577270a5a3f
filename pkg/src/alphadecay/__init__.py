"""AI-driven alpha decay: closed forms, erosion cascades, market
simulation, adoption equilibria, and holdings-convergence analytics."""

from .params import (
    CostDistribution,
    CostKind,
    LambdaRegime,
    MarketParams,
    ModelParams,
    ParamError,
    SignalSpec,
    baseline_params,
    baseline_signal,
)
from .closedform import (
    DomainError,
    InstabilityError,
    attenuation_factor,
    calibration_delta,
    calibrate_aggressiveness,
    cross_sectional_dispersion,
    crowding_decay,
    delta_increasing_condition,
    diversity_premium,
    effective_decay,
    half_life,
    kyle_lambda,
    perceived_variance,
    performative_beta,
    pigouvian_tax,
    reflexive_multiplier,
    stationary_alpha,
)

__version__ = "0.1.0"
