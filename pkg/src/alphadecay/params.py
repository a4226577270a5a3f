"""Model parameterization: signal specs, market environment, and game inputs.

All rates are per month and half-lives are in months. The baseline numbers
follow the calibration used throughout the toolkit: natural signal decay
theta = 0.012 (58-month half-life), adoption phi = 0.7, homogeneity
rho = 0.6, which together put the effective half-life near 18 months.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence


class LambdaRegime(Enum):
    """Direction of the price-impact response to AI adoption."""

    DECREASING = "decreasing"
    CONSTANT = "constant"
    INCREASING = "increasing"


class CostKind(Enum):
    UNIFORM = "uniform"
    LOGNORMAL = "lognormal"


class ParamError(ValueError):
    """Invalid or inconsistent model parameters."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParamError(msg)


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class SignalSpec:
    """One tradeable signal: OU dynamics plus crowding/erosion attributes.

    theta      natural mean-reversion rate (month^-1, > 0)
    sigma0_sq  initial innovation variance (return^2 / month, > 0)
    rho        algorithmic homogeneity in [0, 1]
    a          trading aggressiveness (shares per unit signal, > 0)
    g          regeneration rate per retraining epoch (>= 0)
    beta_cf    counterfactual signal-return coefficient (> 0 unless the
               signal is a deliberate null used in regression tests)
    """

    theta: float
    sigma0_sq: float
    rho: float
    a: float
    g: float
    beta_cf: float = 1.0

    def __post_init__(self) -> None:
        _require(_finite(self.theta) and self.theta > 0, f"theta must be > 0, got {self.theta}")
        _require(_finite(self.sigma0_sq) and self.sigma0_sq > 0, f"sigma0_sq must be > 0, got {self.sigma0_sq}")
        _require(_finite(self.rho) and 0.0 <= self.rho <= 1.0, f"rho must be in [0,1], got {self.rho}")
        _require(_finite(self.a) and self.a > 0, f"a must be > 0, got {self.a}")
        _require(_finite(self.g) and self.g >= 0, f"g must be >= 0, got {self.g}")
        _require(_finite(self.beta_cf) and self.beta_cf >= 0, f"beta_cf must be >= 0, got {self.beta_cf}")

    @property
    def sigma0(self) -> float:
        return math.sqrt(self.sigma0_sq)

    @property
    def stationary_variance(self) -> float:
        """Stationary variance of the signal level, sigma^2 / (2 theta)."""
        return self.sigma0_sq / (2.0 * self.theta)


@dataclass(frozen=True)
class MarketParams:
    """Market environment: volatilities, noise structure, price impact.

    lambda_regime selects how price impact responds to adoption; lambda0
    is the base impact used by the CONSTANT and INCREASING regimes, and
    lambda_slope the affine slope of the INCREASING regime. lambda_prime
    normalizes the reflexive multiplier; the default is back-solved so
    that M(phi=0.7, rho=0.5, beta=0.2) = 1.3.
    """

    sigma_v: float = 1.0
    sigma_u: float = 1.0
    sigma_eta: float = 0.6
    sigma_nu: float = 0.5
    sigma_h: float = 1.2
    sigma_eps: float = 0.25
    lambda_regime: LambdaRegime = LambdaRegime.DECREASING
    lambda0: float = 0.5
    lambda_slope: float = 0.5
    lambda_prime: float = 0.91 / 3.0
    ticks_per_month: int = 21
    mm_span: int = 20

    def __post_init__(self) -> None:
        _require(_finite(self.sigma_v) and self.sigma_v > 0, "sigma_v must be > 0")
        _require(_finite(self.sigma_u) and self.sigma_u > 0, "sigma_u must be > 0")
        for name in ("sigma_eta", "sigma_nu", "sigma_h", "sigma_eps"):
            v = getattr(self, name)
            _require(_finite(v) and v >= 0, f"{name} must be >= 0")
        _require(_finite(self.lambda0) and self.lambda0 > 0, "lambda0 must be > 0")
        _require(_finite(self.lambda_slope) and self.lambda_slope >= 0, "lambda_slope must be >= 0")
        _require(_finite(self.lambda_prime) and self.lambda_prime > 0, "lambda_prime must be > 0")
        _require(self.ticks_per_month >= 1, "ticks_per_month must be >= 1")
        _require(self.mm_span >= 1, "mm_span must be >= 1")


@dataclass(frozen=True)
class CostDistribution:
    """Continuous adoption-cost distribution G(c).

    UNIFORM takes params (lo, hi) with lo < hi; LOGNORMAL takes (mu, sigma)
    with sigma > 0. G is continuous and strictly increasing on its support.
    """

    kind: CostKind = CostKind.LOGNORMAL
    params: tuple = (math.log(0.2), 0.55)

    def __post_init__(self) -> None:
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        _require(len(p) == 2, "cost distribution takes exactly two parameters")
        if self.kind is CostKind.UNIFORM:
            _require(p[0] < p[1], f"uniform costs need lo < hi, got {p}")
        else:
            _require(p[1] > 0, f"lognormal sigma must be > 0, got {p[1]}")


@dataclass(frozen=True)
class ModelParams:
    """Complete parameterization of the three-layer model."""

    n_institutions: int = 100
    k_signals: int = 5
    phi: float = 0.7
    signals: tuple = ()
    market: MarketParams = field(default_factory=MarketParams)
    kappa: float = 1.0
    i_max: float = 10.0
    gamma: float = 0.5
    d_bench: float = 0.0
    cost_dist: CostDistribution = field(default_factory=CostDistribution)
    tau_risk: float = 0.5
    alpha_h0: Optional[float] = None
    beta: float = 0.25           # performative erosion intensity (calibrated)
    feedback_beta: float = 0.2   # risk-management feedback used by the multiplier channel

    def __post_init__(self) -> None:
        _require(self.n_institutions >= 2, "need at least 2 institutions")
        _require(self.k_signals >= 1, "need at least 1 signal")
        _require(_finite(self.phi) and 0.0 <= self.phi <= 1.0, f"phi must be in [0,1], got {self.phi}")
        _require(_finite(self.kappa) and self.kappa >= 1.0, f"kappa must be >= 1, got {self.kappa}")
        _require(_finite(self.i_max) and self.i_max > 0, "i_max must be > 0")
        _require(_finite(self.gamma) and self.gamma >= 0, "gamma must be >= 0")
        _require(_finite(self.d_bench) and 0.0 <= self.d_bench <= 1.0, "d_bench must be in [0,1]")
        _require(_finite(self.tau_risk) and self.tau_risk > 0, "tau_risk must be > 0")
        _require(_finite(self.beta) and 0.0 <= self.beta < 1.0, "beta must be in [0,1)")
        _require(_finite(self.feedback_beta) and self.feedback_beta >= 0, "feedback_beta must be >= 0")
        if self.alpha_h0 is not None:
            _require(_finite(self.alpha_h0) and self.alpha_h0 >= 0, "alpha_h0 must be >= 0")
        object.__setattr__(self, "signals", tuple(self.signals))
        _require(
            len(self.signals) == self.k_signals,
            f"got {len(self.signals)} signals for k_signals={self.k_signals}",
        )
        for s in self.signals:
            _require(isinstance(s, SignalSpec), "signals must be SignalSpec instances")

    @property
    def rho_bar(self) -> float:
        """Unweighted mean homogeneity across signals."""
        return sum(s.rho for s in self.signals) / len(self.signals)

    def with_phi(self, phi: float) -> "ModelParams":
        return replace(self, phi=phi)

    def with_rho(self, rho: float) -> "ModelParams":
        """All signals switched to a common homogeneity level."""
        sigs = tuple(replace(s, rho=rho) for s in self.signals)
        return replace(self, signals=sigs)

    def digest(self) -> str:
        """Stable hash of the full parameter set, for output sidecars."""
        def enc(o):
            if isinstance(o, Enum):
                return o.value
            if hasattr(o, "__dataclass_fields__"):
                return {k: enc(getattr(o, k)) for k in o.__dataclass_fields__}
            if isinstance(o, (tuple, list)):
                return [enc(x) for x in o]
            return o

        blob = json.dumps(enc(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# Calibration anchors: 58-month pre-AI half-life at theta = 0.012 and an
# 18-month half-life at the (phi=0.7, rho=0.6) baseline imply
# delta = theta * (58/18 - 1) = 0.0266...; the baseline aggressiveness is
# backed out of delta = N phi a rho / lambda(phi).
BASELINE_THETA = 0.012
BASELINE_DELTA = BASELINE_THETA * (58.0 / 18.0 - 1.0)


def baseline_signal(rho: float = 0.6, *, a: Optional[float] = None,
                    g: float = 0.02, theta: float = BASELINE_THETA,
                    sigma0_sq: float = 0.008, beta_cf: float = 1.0) -> SignalSpec:
    """Signal spec at the calibrated baseline; `a` defaults to the value
    that reproduces the 18-month half-life at phi=0.7, rho=0.6."""
    from .closedform import calibrate_aggressiveness

    if a is None:
        a = calibrate_aggressiveness(MarketParams(), target_delta=BASELINE_DELTA)
    return SignalSpec(theta=theta, sigma0_sq=sigma0_sq, rho=rho, a=a, g=g, beta_cf=beta_cf)


def baseline_params(phi: float = 0.7, k_signals: int = 5, rho: float = 0.6,
                    **overrides) -> ModelParams:
    """The calibrated baseline used by the scenario suite."""
    sig = baseline_signal(rho=rho)
    return ModelParams(
        phi=phi,
        k_signals=k_signals,
        signals=tuple(sig for _ in range(k_signals)),
        **overrides,
    )
