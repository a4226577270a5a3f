"""Fund-performance analytics: rolling return dispersion, calibrated fund
panels, and alpha half-life estimation from monthly alpha series.

The alpha-unit convention: model alphas are variance-scaled; fund panels
and reported series carry an affine mapping (scale, offset) declared in
the scenario config, defaulting to percent per month.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .closedform import (
    DomainError,
    crowding_decay,
    effective_decay,
    kyle_lambda,
)
from .params import ModelParams, baseline_params
from .market import run_market
from .seeding import generator


@dataclass(frozen=True)
class HalfLifeEstimate:
    h_hat: float
    theta_eff_hat: float
    r_squared: float
    vintage: str = ""
    no_decay: bool = False


def return_dispersion(returns: np.ndarray, window: int,
                      group_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Rolling cross-sectional dispersion of a fund x month return matrix.

    For each month, the cross-sectional standard deviation of that month's
    returns within the group, averaged over the trailing window. The
    output has one entry per month from `window - 1` on.
    """
    if window < 2:
        raise DomainError("window must be >= 2")
    r = np.asarray(returns, dtype=float)
    if group_mask is not None:
        r = r[np.asarray(group_mask, dtype=bool)]
    if r.shape[0] < 2:
        raise DomainError("need at least 2 funds in the group")
    monthly_sd = r.std(axis=0, ddof=1)
    kernel = np.ones(window) / window
    return np.convolve(monthly_sd, kernel, mode="valid")


def dispersion_schedule(params: ModelParams, months: int,
                        phi_path: tuple[float, float] = (0.45, 0.62),
                        rho_path: tuple[float, float] = (0.50, 0.58),
                        human_spillover: float = 0.187) -> tuple[np.ndarray, np.ndarray]:
    """Model-implied dispersion paths for AI and human fund groups.

    AI dispersion follows sqrt(1 - rho(t)^2) / theta_eff(phi(t), rho(t));
    human dispersion declines only through the spillover of the crowding
    decay into the shared signal pool, theta + spillover * delta(t). Both
    paths are returned unnormalized (callers apply the affine unit map).
    """
    t = np.linspace(0.0, 1.0, months)
    phis = phi_path[0] + (phi_path[1] - phi_path[0]) * t
    rhos = rho_path[0] + (rho_path[1] - rho_path[0]) * t
    sig = params.signals[0]
    d_ai = np.empty(months)
    d_h = np.empty(months)
    for i in range(months):
        spec = sig
        lam = kyle_lambda(params.market, float(phis[i]), float(rhos[i]))
        delta = params.n_institutions * phis[i] * spec.a * rhos[i] / lam
        te = spec.theta + delta
        d_ai[i] = math.sqrt(1.0 - rhos[i] ** 2) / te
        d_h[i] = 1.0 / (spec.theta + human_spillover * delta)
    return d_ai, d_h


def generate_fund_panel(params: ModelParams, n_ai: int, n_human: int,
                        months: int, seed: int, *,
                        ai_start: float = 0.041, human_start: float = 0.050,
                        phi_path: tuple[float, float] = (0.45, 0.62),
                        rho_path: tuple[float, float] = (0.50, 0.58),
                        human_spillover: float = 0.187) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic fund x month returns whose cross-sectional dispersion
    follows the model-implied paths under a rising adoption schedule.

    Returns (returns matrix, ai mask). The AI path is scaled to start at
    ai_start (monthly return units) and the human path at human_start.
    """
    if n_ai < 2 or n_human < 2:
        raise DomainError("need at least 2 funds per group")
    d_ai, d_h = dispersion_schedule(params, months, phi_path, rho_path, human_spillover)
    d_ai = d_ai * (ai_start / d_ai[0])
    d_h = d_h * (human_start / d_h[0])
    rng = generator(seed, "fund-panel")
    common = rng.normal(0.0, 0.01, size=months)
    ai = common + d_ai * rng.normal(0.0, 1.0, size=(n_ai, months))
    hu = common + d_h * rng.normal(0.0, 1.0, size=(n_human, months))
    returns = np.vstack([ai, hu])
    mask = np.zeros(n_ai + n_human, dtype=bool)
    mask[:n_ai] = True
    return returns, mask


def estimate_half_life(alpha_series: Sequence[float], vintage: str = "") -> HalfLifeEstimate:
    """Fit alpha(t) = alpha(0) exp(-theta_eff t) to a monthly alpha series.

    Least squares on the log of positive values; when negative values are
    present, a nonlinear exponential fit is used instead. A non-decaying
    series reports no_decay instead of a half-life.
    """
    y = np.asarray(alpha_series, dtype=float)
    if len(y) < 12:
        raise DomainError("need at least 12 monthly alpha estimates")
    if y[0] <= 0:
        raise DomainError("initial alpha must be positive")
    t = np.arange(len(y), dtype=float)
    if np.all(y > 0):
        slope, intercept = np.polyfit(t, np.log(y), 1)
        theta_hat = -slope
        fitted = intercept + slope * t
        resid = np.log(y) - fitted
        ss_tot = float(np.sum((np.log(y) - np.log(y).mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    else:
        from scipy.optimize import curve_fit

        def model(tt, a0, th):
            return a0 * np.exp(-th * tt)

        (a0, theta_hat), _ = curve_fit(model, t, y, p0=(max(y[0], 1e-12), 0.01),
                                       maxfev=20000)
        resid = y - model(t, a0, theta_hat)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    if theta_hat <= 0 or not math.isfinite(theta_hat):
        return HalfLifeEstimate(h_hat=math.nan, theta_eff_hat=float(theta_hat),
                                r_squared=r2, vintage=vintage, no_decay=True)
    return HalfLifeEstimate(h_hat=math.log(2.0) / theta_hat, theta_eff_hat=float(theta_hat),
                            r_squared=r2, vintage=vintage, no_decay=False)


def signal_alpha_decay_series(params: ModelParams, months: int, n_seeds: int,
                              seed: int) -> np.ndarray:
    """Monthly alpha estimates for a newly crowded signal set.

    Markets start with nothing impounded (the patterns have just been
    discovered by the crowd). Each month's alpha is the per-signal
    attributed profit rate: demand a_k f_k(t) times the signal's own
    unimpounded next-tick payoff beta_cf f_k(t+1) - z_k(t-1), pooled over
    replications and signals. The excess of this series over its settled
    level decays at theta_eff, the direct counterpart of the closed-form
    half-life.
    """
    if months < 24:
        raise DomainError("need at least 24 months to see the decay")
    tpm = params.market.ticks_per_month
    horizon = months * tpm
    k = params.k_signals
    a = np.array([s.a for s in params.signals])
    b = np.array([s.beta_cf for s in params.signals])
    stat_var = np.array([s.stationary_variance for s in params.signals])
    num = np.zeros((horizon - 1, k))
    den = np.zeros((horizon - 1, k))
    for i in range(n_seeds):
        path = run_market(params, horizon, seed=seed + i, fresh_start=True,
                          feedback_beta=0.0)
        z_prev = np.vstack([np.zeros_like(path.z[0]), path.z[:-2]])
        num += path.f[:-1] * (b * path.f[1:] - z_prev)
        den += path.f[:-1] ** 2
    m = (horizon - 1) // tpm
    # through-origin monthly slope; the ratio cancels the slowly wandering
    # realized signal variance that otherwise dominates the noise
    num_m = num[:m * tpm].reshape(m, tpm, k).sum(axis=1)
    den_m = den[:m * tpm].reshape(m, tpm, k).sum(axis=1)
    coef = num_m / den_m
    return (coef * (a * stat_var)).sum(axis=1)


def excess_alpha_decay_series(params: ModelParams, months: int, n_seeds: int,
                              seed: int) -> np.ndarray:
    """Freshly discovered minus seasoned monthly alpha, under common random
    numbers. The pairing removes both the settled alpha level and the
    shared sampling noise, leaving the transient that decays at theta_eff.
    """
    tpm = params.market.ticks_per_month
    horizon = months * tpm
    k = params.k_signals
    a = np.array([s.a for s in params.signals])
    stat_var = np.array([s.stationary_variance for s in params.signals])
    num = np.zeros((horizon - 1, k))
    den = np.zeros((horizon - 1, k))
    for i in range(n_seeds):
        fresh = run_market(params, horizon, seed=seed + i, fresh_start=True,
                           feedback_beta=0.0)
        seasoned = run_market(params, horizon, seed=seed + i, fresh_start=False,
                              feedback_beta=0.0)
        zf = np.vstack([np.zeros_like(fresh.z[0]), fresh.z[:-2]])
        zs = np.vstack([np.zeros_like(seasoned.z[0]), seasoned.z[:-2]])
        num += fresh.f[:-1] * (zs - zf)  # seasoned impound minus fresh impound
        den += fresh.f[:-1] ** 2
    m = (horizon - 1) // tpm
    num_m = num[:m * tpm].reshape(m, tpm, k).sum(axis=1)
    den_m = den[:m * tpm].reshape(m, tpm, k).sum(axis=1)
    coef = num_m / den_m
    return (coef * (a * stat_var)).sum(axis=1)


def market_half_life(params: Optional[ModelParams] = None, *, months: int = 48,
                     n_seeds: int = 40, seed: int = 7) -> HalfLifeEstimate:
    """End-to-end half-life measurement at the given calibration: simulate
    the fresh-vs-seasoned excess alpha series and fit the exponential."""
    p = params if params is not None else baseline_params(phi=0.7)
    series = excess_alpha_decay_series(p, months, n_seeds, seed)
    return estimate_half_life(series)
