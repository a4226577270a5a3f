"""Closed-form quantities of the three-layer model.

Layer 1: price impact, effective decay, half-life, stationary alpha,
cross-sectional dispersion. Layer 2: attenuation factor, performative
feedback intensity, perceived variance. Layer 3: reflexive multiplier,
diversity premium, Pigouvian tax.

Everything here is a pure function of immutable inputs; same inputs give
bit-identical outputs.
"""

from __future__ import annotations

import math

from .params import LambdaRegime, MarketParams, ModelParams, SignalSpec

LN2 = math.log(2.0)


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class InstabilityError(ArithmeticError):
    """Reflexive feedback loop at or beyond its pole (liquidity black hole)."""


def kyle_lambda(market: MarketParams, phi: float, rho_bar: float) -> float:
    """Price impact per unit net order flow at adoption `phi`.

    DECREASING (multi-agent Kyle baseline):
        sigma_v / (2 sigma_u) * [1 + phi^2 rho_bar^2 sigma_eta^2 / sigma_v^2]^(-1/2)
    CONSTANT: lambda0.  INCREASING (sequential-trade flavor): lambda0 * (1 + slope * phi).
    """
    if not (math.isfinite(phi) and math.isfinite(rho_bar)):
        raise DomainError("phi and rho_bar must be finite")
    if not 0.0 <= phi <= 1.0:
        raise DomainError(f"phi must be in [0,1], got {phi}")
    if not 0.0 <= rho_bar <= 1.0:
        raise DomainError(f"rho_bar must be in [0,1], got {rho_bar}")
    if market.lambda_regime is LambdaRegime.CONSTANT:
        return market.lambda0
    if market.lambda_regime is LambdaRegime.INCREASING:
        return market.lambda0 * (1.0 + market.lambda_slope * phi)
    base = market.sigma_v / (2.0 * market.sigma_u)
    crowd = (phi * rho_bar * market.sigma_eta / market.sigma_v) ** 2
    return base / math.sqrt(1.0 + crowd)


def delta_increasing_condition(market: MarketParams, phi: float) -> bool:
    """Sufficient condition for the crowding decay to keep rising with
    adoption under the INCREASING regime: phi * dlambda/dphi < lambda(phi).
    Trivially true for the other regimes (dlambda/dphi <= 0)."""
    if market.lambda_regime is not LambdaRegime.INCREASING:
        return True
    lam = market.lambda0 * (1.0 + market.lambda_slope * phi)
    return phi * market.lambda0 * market.lambda_slope < lam


def crowding_decay(sig: SignalSpec, phi: float, n: int, lam: float) -> float:
    """AI-accelerated arbitrage component delta_k = N phi a_k rho_k / lambda."""
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"lambda must be > 0, got {lam}")
    return n * phi * sig.a * sig.rho / lam


def effective_decay(sig: SignalSpec, phi: float, n: int, lam: float) -> float:
    """Effective mean-reversion theta_k + delta_k(phi) in month^-1."""
    return sig.theta + crowding_decay(sig, phi, n, lam)


def half_life(theta_eff: float) -> float:
    """Months for a signal's excess return to halve: ln 2 / theta_eff."""
    if not (math.isfinite(theta_eff) and theta_eff > 0):
        raise DomainError(f"theta_eff must be > 0, got {theta_eff}")
    return LN2 / theta_eff


def calibration_delta(h0: float, h: float, theta: float) -> float:
    """Decay increment implied by a half-life drop from h0 to h:
    theta * (h0 / h - 1). Inverse of half_life when h0 = ln2/theta."""
    if not (h0 > 0 and h > 0):
        raise DomainError("half-lives must be > 0")
    if not (math.isfinite(theta) and theta > 0):
        raise DomainError("theta must be > 0")
    return theta * (h0 / h - 1.0)


def calibrate_aggressiveness(market: MarketParams, *, target_delta: float,
                             phi: float = 0.7, rho: float = 0.6,
                             n: int = 100) -> float:
    """Back out the per-signal aggressiveness that reproduces a target
    crowding decay at the given adoption and homogeneity."""
    if target_delta <= 0:
        raise DomainError("target_delta must be > 0")
    if phi <= 0 or rho <= 0:
        raise DomainError("calibration needs phi > 0 and rho > 0")
    lam = kyle_lambda(market, phi, rho)
    return target_delta * lam / (n * phi * rho)


def stationary_alpha(sig: SignalSpec, theta_eff: float) -> float:
    """Stationary aggregate alpha of a signal: sigma^2 / (2 theta_eff)."""
    if not (math.isfinite(theta_eff) and theta_eff > 0):
        raise DomainError(f"theta_eff must be > 0, got {theta_eff}")
    return sig.sigma0_sq / (2.0 * theta_eff)


def cross_sectional_dispersion(params: ModelParams, phi: float) -> float:
    """Cross-sectional dispersion of AI fund alphas,

        sqrt( sum_k (1 - rho_k^2) sigma_nu^2 a_k^2 / (theta_k + delta_k)^2 ).

    Monotone decreasing in phi when all rho_k > 0; exactly 0 in the
    monoculture (rho_k = 1 for all k) or with no idiosyncratic noise.
    """
    lam = kyle_lambda(params.market, phi, params.rho_bar)
    total = 0.0
    for sig in params.signals:
        te = effective_decay(sig, phi, params.n_institutions, lam)
        total += (1.0 - sig.rho**2) * params.market.sigma_nu**2 * sig.a**2 / te**2
    return math.sqrt(total)


def attenuation_factor(theta: float, delta: float) -> float:
    """Retraining attenuation omega = theta / (theta + delta), in (0, 1]."""
    if not (math.isfinite(theta) and theta > 0):
        raise DomainError(f"theta must be > 0, got {theta}")
    if not (math.isfinite(delta) and delta >= 0):
        raise DomainError(f"delta must be >= 0, got {delta}")
    return theta / (theta + delta)


def performative_beta(omega: float) -> float:
    """Feedback intensity implied by attenuation: beta = 2 omega (1 - omega).

    Peaks at 0.5 when omega = 0.5. Offered as a derivation utility; the
    calibrated beta in ModelParams may deliberately differ.
    """
    if not (math.isfinite(omega) and 0.0 <= omega <= 1.0):
        raise DomainError(f"omega must be in [0,1], got {omega}")
    return 2.0 * omega * (1.0 - omega)


def perceived_variance(sig: SignalSpec, phi: float, n: int, lam: float) -> float:
    """Predictable return variance the AI estimates after retraining:
    omega^2 * beta_cf^2 * sigma^2(0) / (2 theta_eff)."""
    delta = crowding_decay(sig, phi, n, lam)
    omega = attenuation_factor(sig.theta, delta)
    te = sig.theta + delta
    return omega**2 * sig.beta_cf**2 * sig.sigma0_sq / (2.0 * te)


def reflexive_multiplier(phi: float, rho_bar: float, beta: float,
                         lambda_prime: float) -> float:
    """Amplification of fundamental shocks, M = (1 - phi rho_bar beta / lambda')^-1.

    Raises InstabilityError at or beyond the pole.
    """
    if lambda_prime <= 0:
        raise DomainError("lambda_prime must be > 0")
    loop = phi * rho_bar * beta / lambda_prime
    if loop >= 1.0:
        raise InstabilityError(
            f"feedback loop gain {loop:.4f} >= 1: liquidity black hole"
        )
    return 1.0 / (1.0 - loop)


def diversity_premium(phi: float, rho_bar: float, beta: float,
                      lambda_prime_fn=None, lambda_prime: float | None = None) -> float:
    """Tail-risk reduction from staying below the monoculture:
    M(phi=1) - M(phi), with a caller-supplied lambda'(phi) (constant by default)."""
    if lambda_prime_fn is None:
        if lambda_prime is None:
            raise DomainError("provide lambda_prime or lambda_prime_fn")
        lambda_prime_fn = lambda _phi: lambda_prime
    m_full = reflexive_multiplier(1.0, rho_bar, beta, lambda_prime_fn(1.0))
    m_here = reflexive_multiplier(phi, rho_bar, beta, lambda_prime_fn(phi))
    return m_full - m_here


def pigouvian_tax(rho_flow: float, zeta: float, threshold: float) -> float:
    """Tax on correlated order flow: zeta * max(0, rho_flow - threshold)."""
    if not -1.0 <= rho_flow <= 1.0:
        raise DomainError(f"rho_flow must be in [-1,1], got {rho_flow}")
    if zeta < 0:
        raise DomainError("zeta must be >= 0")
    return zeta * max(0.0, rho_flow - threshold)
