"""Agent-based market simulator: signal generation, market-maker pricing,
alpha measurement, retraining attenuation, and flash-crash stress scenarios.

One tick is one trading day; monthly rates convert at ticks_per_month
(default 21). The tick loop is sequential (price feedback), but all
exogenous randomness is pre-drawn in one pass so a run is deterministic
per (params, horizon, seed).

Pricing structure. The fundamental is v_t = vbar + sum_k beta_cf_k s_k(t)
+ eps_t with s_k exact OU. The market maker quotes

    p_t = vbar + sum_k z_k(t-1) + lambda(phi) * OrderFlow_t,

where z_k is its running impound of signal k's value contribution. z_k
tracks the flow-revealed AI consensus y_k = beta_cf_k (s_k + rho_k eta_k)
with per-tick gain 1 - exp(-delta_k(phi) dt): correlated AI order flow is
what lets the market maker identify and arbitrage the pattern, so the
impound speed is the crowding decay rate. In stationarity the regression
of next-tick realized returns on s_k then attenuates by exactly
theta/(theta+delta) as the adoption share rises, which is the quantity
retrain_regression estimates.

Risk-management feedback. AI agents add a momentum term proportional to
the recent price change, with loop gain phi * rho_bar * beta / lambda',
the reflexive-multiplier geometry. In calm markets the response
saturates in (is proportional to) the size of the move, so ordinary
fluctuations are amplified mildly while large moves approach the full
multiplier; during a flash-crash stress window the response is fully
engaged.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .closedform import (
    DomainError,
    crowding_decay,
    kyle_lambda,
)
from .params import ModelParams, SignalSpec
from .seeding import generator


class AgentKind(Enum):
    AI = "ai"
    HUMAN = "human"


@dataclass(frozen=True)
class AgentSpec:
    id: int
    kind: AgentKind
    cost: float = 0.0
    d_bench: float = 0.0

    def __post_init__(self) -> None:
        if self.cost < 0:
            raise DomainError("cost must be >= 0")
        if not 0.0 <= self.d_bench <= 1.0:
            raise DomainError("d_bench must be in [0,1]")


@dataclass(frozen=True)
class RetrainingReport:
    signal_index: int
    beta_hat: float
    omega_implied: float
    sample_size: int


@dataclass(frozen=True)
class CrashScenario:
    shock_size: float
    stress_rho: float
    observed_decline: float
    fundamental_decline: float
    m_hat: float
    unstable: bool = False


@dataclass
class MarketPath:
    """Tick-level record of one simulated market.

    Arrays are immutable after construction. Per-agent series (demands,
    profits, per-signal alpha sufficient statistics) exist only when the
    run recorded agents.
    """

    params: ModelParams
    seed: int
    v: np.ndarray
    p: np.ndarray
    order_flow: np.ndarray
    noise_flow: np.ndarray
    f: np.ndarray  # (T, K) signal levels
    z: np.ndarray  # (T, K) impounded components
    agents: Optional[list] = None
    demands: Optional[np.ndarray] = None        # (T, N) incl. feedback share
    profits: Optional[np.ndarray] = None        # (T-1, N) realized per tick
    alpha_stats: Optional[dict] = None          # per (i, k) mean/var of signal-demand profit
    ai_profit_rate: Optional[np.ndarray] = None  # (T-1,) mean AI signal profit per tick

    def __post_init__(self) -> None:
        for arr in (self.v, self.p, self.order_flow, self.noise_flow, self.f, self.z):
            arr.setflags(write=False)

    @property
    def horizon(self) -> int:
        return len(self.v)

    def pricing_errors(self) -> np.ndarray:
        return self.p - self.v

    def mse(self) -> float:
        e = self.pricing_errors()
        return float(np.mean(e * e))

    def tail_quantile(self, q: float = 0.99) -> float:
        return float(np.quantile(np.abs(self.pricing_errors()), q))

    def to_csv(self, path) -> None:
        k = self.f.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v", "p", "order_flow", "noise_flow"]
                       + [f"f_{j + 1}" for j in range(k)])
            for t in range(self.horizon):
                w.writerow([t, repr(float(self.v[t])), repr(float(self.p[t])),
                            repr(float(self.order_flow[t])), repr(float(self.noise_flow[t]))]
                           + [repr(float(self.f[t, j])) for j in range(k)])

    def summary(self) -> dict:
        return {
            "horizon": self.horizon,
            "seed": self.seed,
            "mse": self.mse(),
            "tail_q99": self.tail_quantile(0.99),
            "params_digest": self.params.digest(),
        }


VBAR_DEFAULT = 100.0
FEEDBACK_WINDOW = 5  # bars the crash-window risk-management term looks back over
SATURATION_SCALE = 1.5  # calm feedback reaches full strength at this many sd
                        # of the one-tick price change
STRESS_TRIGGER_SD = 3.0  # noise-flow burst (in sd of u) that opens a vacuum
STRESS_DURATION = 10     # ticks of liquidity vacuum after a burst


def build_agents(params: ModelParams, seed: int) -> list:
    """Institution roster: the first round(phi N) agents are AI."""
    n = params.n_institutions
    n_ai = int(round(params.phi * n))
    rng = generator(seed, "costs")
    costs = sample_costs(params.cost_dist, n, rng)
    return [
        AgentSpec(id=i, kind=AgentKind.AI if i < n_ai else AgentKind.HUMAN,
                  cost=float(costs[i]), d_bench=params.d_bench)
        for i in range(n)
    ]


def sample_costs(dist, n: int, rng: np.random.Generator) -> np.ndarray:
    from .params import CostKind

    lo_or_mu, hi_or_sigma = dist.params
    if dist.kind is CostKind.UNIFORM:
        return rng.uniform(lo_or_mu, hi_or_sigma, size=n)
    return rng.lognormal(lo_or_mu, hi_or_sigma, size=n)


def generate_signals(f_values: np.ndarray, agents: list, params: ModelParams,
                     rng: np.random.Generator) -> np.ndarray:
    """Per-agent, per-signal observations for one tick.

    AI agent i sees f_k + rho_k eta_k + sqrt(1 - rho_k^2) nu_ik with eta_k
    shared across AI agents within the tick; a human sees f_k + eps_ik
    with independent noise of std sigma_h.
    """
    k = len(params.signals)
    n = len(agents)
    mkt = params.market
    eta = rng.normal(0.0, mkt.sigma_eta, size=k)
    obs = np.empty((n, k))
    for i, ag in enumerate(agents):
        if ag.kind is AgentKind.AI:
            for j, sig in enumerate(params.signals):
                idio = rng.normal(0.0, mkt.sigma_nu)
                obs[i, j] = f_values[j] + sig.rho * eta[j] + math.sqrt(1.0 - sig.rho**2) * idio
        else:
            for j in range(k):
                obs[i, j] = f_values[j] + rng.normal(0.0, mkt.sigma_h)
    return obs


def agent_demand(observation: float, spec: SignalSpec) -> float:
    """Linear demand rule: a_k times the observed signal value."""
    return spec.a * observation


def price_update(prior_mean: float, order_flow: float, lam: float) -> float:
    """Competitive market-maker quote: prior plus lambda times net flow."""
    if lam <= 0:
        raise DomainError("lambda must be > 0")
    return prior_mean + lam * order_flow


def _tick_dt(params: ModelParams) -> float:
    return 1.0 / params.market.ticks_per_month


def _impound_gains(params: ModelParams, phi: float, lam: float) -> np.ndarray:
    """Per-tick filter gain 1 - exp(-delta_k dt) for each signal."""
    dt = _tick_dt(params)
    n = params.n_institutions
    return np.array([
        1.0 - math.exp(-crowding_decay(s, phi, n, lam) * dt) for s in params.signals
    ])


def run_market(params: ModelParams, horizon: int, seed: int, *,
               vbar: float = VBAR_DEFAULT, record_agents: bool = False,
               fresh_start: bool = False,
               feedback_beta: Optional[float] = None) -> MarketPath:
    """Simulate `horizon` ticks of the market at the params' adoption share.

    fresh_start=True begins with nothing impounded (z = 0), the "newly
    discovered signal" configuration used for half-life measurement;
    otherwise z starts at its stationary projection. feedback_beta
    defaults to params.beta (the calm-market risk-management intensity);
    pass 0.0 to disable the reflexive channel.
    """
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    k = params.k_signals
    n = params.n_institutions
    mkt = params.market
    phi = params.phi
    dt = _tick_dt(params)
    rng = generator(seed, "market")

    n_ai = int(round(phi * n))
    n_h = n - n_ai
    rho_bar = params.rho_bar
    lam = kyle_lambda(mkt, phi, rho_bar)
    fb_beta = params.beta if feedback_beta is None else feedback_beta
    loop_gain = phi * rho_bar * fb_beta / mkt.lambda_prime

    theta = np.array([s.theta for s in params.signals])
    sigma_sq = np.array([s.sigma0_sq for s in params.signals])
    rho = np.array([s.rho for s in params.signals])
    a = np.array([s.a for s in params.signals])
    b = np.array([s.beta_cf for s in params.signals])
    decay = np.exp(-theta * dt)
    stat_sd = np.sqrt(sigma_sq / (2.0 * theta))
    step_sd = stat_sd * np.sqrt(1.0 - decay**2)
    # humans size down their noisier judgment toward its posterior mean;
    # AI systems trade the retrained signal at face value, which is what
    # makes their correlated flow aggressive enough to crowd
    shrink_h = stat_sd**2 / (stat_sd**2 + mkt.sigma_h**2)

    # exogenous draws, one pass, fixed order
    s0 = rng.normal(0.0, 1.0, size=k) * stat_sd
    shocks = rng.normal(0.0, 1.0, size=(horizon, k)) * step_sd
    eta = rng.normal(0.0, mkt.sigma_eta, size=(horizon, k))
    u = rng.normal(0.0, mkt.sigma_u, size=horizon)
    eps = rng.normal(0.0, mkt.sigma_eps, size=horizon)

    # signal paths via the exact OU recursion
    f = np.empty((horizon, k))
    for j in range(k):
        f[:, j] = lfilter([1.0], [1.0, -decay[j]], shocks[:, j]) \
            + s0[j] * decay[j] ** np.arange(1, horizon + 1)

    v = vbar + f @ b + eps

    # market-maker impound of the flow-revealed consensus
    y = (f + rho * eta) * b
    gains = _impound_gains(params, phi, lam)
    z = np.empty((horizon, k))
    iota = np.empty(k)
    for j in range(k):
        gj = gains[j]
        iota[j] = 0.0 if gj == 0.0 else gj / (1.0 - (1.0 - gj) * decay[j])
        z0 = 0.0 if fresh_start else iota[j] * y[0, j]
        if gj == 0.0:
            z[:, j] = z0
        else:
            z[:, j] = lfilter([gj], [1.0, -(1.0 - gj)], y[:, j]) \
                + z0 * (1.0 - gj) ** np.arange(1, horizon + 1)

    record = record_agents
    if record:
        obs_ai = rng.normal(0.0, 1.0, size=(horizon, n_ai, k))
        obs_h = rng.normal(0.0, 1.0, size=(horizon, n_h, k))
        demands_per_agent = np.empty((horizon, n))
        informed = np.empty(horizon)
        q_ik = np.empty((horizon, n, k))
        for t in range(horizon):
            x_ai = f[t] + rho * eta[t] + np.sqrt(1.0 - rho**2) * mkt.sigma_nu * obs_ai[t]
            x_h = (f[t] + mkt.sigma_h * obs_h[t]) * shrink_h
            q_ik[t, :n_ai] = x_ai * a
            q_ik[t, n_ai:] = x_h * a
            demands_per_agent[t] = q_ik[t].sum(axis=1)
            informed[t] = demands_per_agent[t].sum()
    else:
        # aggregate informed flow: Gaussian sums collapse agent-by-agent draws
        agg_idio = rng.normal(0.0, 1.0, size=(horizon, k))
        agg_h = rng.normal(0.0, 1.0, size=(horizon, k))
        per_signal = (
            n_ai * (f + rho * eta)
            + math.sqrt(n_ai) * np.sqrt(1.0 - rho**2) * mkt.sigma_nu * agg_idio
            + (n_h * f + math.sqrt(n_h) * mkt.sigma_h * agg_h) * shrink_h
        )
        informed = per_signal @ a
        demands_per_agent = None
        q_ik = None

    # pricing loop; only the feedback term forces sequential evaluation
    p = np.empty(horizon)
    order_flow = np.empty(horizon)
    fb_flow = np.zeros(horizon)
    prior = np.empty(horizon)
    prior[0] = vbar
    prior[1:] = vbar + z[:-1].sum(axis=1)
    # Liquidation bursts in the noise flow open short liquidity vacuums in
    # which quotes drift from the last price; the bursts arrive regardless
    # of adoption, while the AI risk-management feedback that amplifies
    # them scales with phi rho_bar beta / lambda', the reflexive loop.
    # The feedback response to ordinary moves saturates in the move size.
    trigger = STRESS_TRIGGER_SD * mkt.sigma_u
    sat = SATURATION_SCALE * lam * mkt.sigma_u * math.sqrt(2.0)
    coef = loop_gain / lam
    if mkt.sigma_u > 0.0:
        stress_left = 0
        for t in range(horizon):
            move = p[t - 1] - p[t - 2] if t >= 2 else 0.0
            if stress_left > 0:
                if loop_gain > 0.0:
                    fb_flow[t] = coef * move
                base = p[t - 1]
                stress_left -= 1
            else:
                if loop_gain > 0.0:
                    fb_flow[t] = coef * move * min(1.0, abs(move) / sat)
                base = prior[t]
            order_flow[t] = informed[t] + u[t] + fb_flow[t]
            p[t] = base + lam * order_flow[t]
            if abs(u[t]) > trigger:
                stress_left = STRESS_DURATION
    else:
        order_flow = informed + u
        p = prior + lam * order_flow

    agents = None
    profits = None
    alpha_stats = None
    ai_profit_rate = None
    if record:
        agents = build_agents(params, seed)
        # per-signal demand stays signal-only (the alpha definition is about
        # demand based on signal k); the risk-management overlay is AI flow,
        # so it enters the agents' total demand for order-flow accounting
        payoff = (v[1:] - p[:-1])  # next-tick realized payoff return
        prod = payoff[:, None, None] * q_ik[:-1]
        alpha_stats = {
            "count": prod.shape[0],
            "mean": prod.mean(axis=0),
            "var": prod.var(axis=0, ddof=1),
        }
        if n_ai > 0:
            ai_profit_rate = prod[:, :n_ai, :].sum(axis=2).mean(axis=1)
            demands_per_agent[:, :n_ai] += (fb_flow / n_ai)[:, None]
        else:
            ai_profit_rate = np.zeros(horizon - 1)
        profits = payoff[:, None] * demands_per_agent[:-1]

    return MarketPath(params=params, seed=seed, v=v, p=p, order_flow=order_flow,
                      noise_flow=u, f=f, z=z, agents=agents,
                      demands=demands_per_agent, profits=profits,
                      alpha_stats=alpha_stats, ai_profit_rate=ai_profit_rate)


def measure_alpha(path: MarketPath, agent: AgentSpec, tau_risk: float) -> dict:
    """Per-signal and total alpha for one agent:

        alpha_k = mean[(v_{t+1} - p_t) q_ik(t)] - (tau/2) var[same product],

    with the sample variance taken per period over the path. Requires a
    run recorded with agents.
    """
    if path.horizon < 2:
        raise DomainError("path must have at least 2 ticks")
    if path.alpha_stats is None:
        raise DomainError("path was not recorded with agents; rerun with record_agents=True")
    i = agent.id
    mean = path.alpha_stats["mean"][i]
    var = path.alpha_stats["var"][i]
    per_signal = mean - 0.5 * tau_risk * var
    return {
        "per_signal": per_signal,
        "total": float(per_signal.sum()),
        "samples": path.alpha_stats["count"],
    }


def aggregate_ai_alpha(path: MarketPath, tau_risk: float) -> float:
    """Aggregate alpha over AI agents (sum of per-agent totals)."""
    if path.agents is None:
        raise DomainError("path was not recorded with agents")
    total = 0.0
    for ag in path.agents:
        if ag.kind is AgentKind.AI:
            total += measure_alpha(path, ag, tau_risk)["total"]
    return total


def retrain_regression(path: MarketPath, signal_index: int, window: int) -> RetrainingReport:
    """OLS of the observed one-tick realized return v_{t+1} - p_t on the
    tracked signals over the trailing window, reporting the coefficient
    on f_k. The regression controls for the other signals so the slope
    isolates signal k's own predictive content: the signals decorrelate
    over months, not ticks, so a univariate fit on a feasible window
    would mostly measure chance overlap between them. Implied attenuation
    is beta_hat / beta_cf."""
    if window < 30:
        raise DomainError(f"window must be >= 30, got {window}")
    if window > path.horizon - 1:
        raise DomainError("window longer than available path")
    sl = slice(path.horizon - 1 - window, path.horizon - 1)
    x = path.f[sl]
    r = path.v[1:][sl] - path.p[:-1][sl]
    if float(np.var(x[:, signal_index])) <= 0.0:
        raise DomainError("degenerate regressor variance")
    design = np.column_stack([np.ones(window), x])
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    beta_hat = float(coef[1 + signal_index])
    beta_cf = path.params.signals[signal_index].beta_cf
    omega = beta_hat / beta_cf if beta_cf != 0.0 else math.nan
    return RetrainingReport(signal_index=signal_index, beta_hat=beta_hat,
                            omega_implied=omega, sample_size=window)


INTRADAY_BARS = 78  # 5-minute bars in a trading day


def flash_crash(params: ModelParams, shock: float, calm_rho: float,
                stress_rho: float, seed: int, *,
                feedback_beta: Optional[float] = None,
                vbar: float = VBAR_DEFAULT,
                pre_ticks: int = 252, stress_bars: int = 60,
                post_ticks: int = 63) -> CrashScenario:
    """One-time fundamental sell shock, resolved intraday.

    The market runs calm daily ticks at calm_rho; then the event day
    unfolds in 5-minute bars: the selling institution's block hits the
    book, every signal's homogeneity jumps to stress_rho, the market
    maker loses its fundamental anchor (quotes drift from the last
    price), and AI risk-management feedback is fully engaged. Signals
    are frozen within the event day; noise-trader flow scales to bar
    resolution.

    The scenario is evaluated against a counterfactual twin sharing the
    seed, with calm homogeneity and no feedback, so m_hat is the ratio
    of the amplified peak decline to the fundamental one.
    """
    if not 0.0 <= calm_rho <= stress_rho <= 1.0:
        raise DomainError("need 0 <= calm_rho <= stress_rho <= 1")
    if shock <= 0.0:
        raise DomainError("shock must be > 0")
    fb_beta = params.feedback_beta if feedback_beta is None else feedback_beta
    loop = params.phi * stress_rho * fb_beta / params.market.lambda_prime
    if loop >= 1.0:
        return CrashScenario(shock_size=shock, stress_rho=stress_rho,
                             observed_decline=math.inf, fundamental_decline=shock,
                             m_hat=math.inf, unstable=True)

    base_s, bars_s = _crash_event(params, shock, calm_rho, stress_rho, fb_beta,
                                  seed, vbar, pre_ticks, stress_bars)
    base_t, bars_t = _crash_event(params, shock, calm_rho, calm_rho, 0.0,
                                  seed, vbar, pre_ticks, stress_bars)
    observed = _peak_decline(base_s, bars_s)
    fundamental = _peak_decline(base_t, bars_t)
    if fundamental <= 0.0:
        raise DomainError("counterfactual run shows no decline; increase shock")
    return CrashScenario(shock_size=shock, stress_rho=stress_rho,
                         observed_decline=observed, fundamental_decline=fundamental,
                         m_hat=observed / fundamental)


def _crash_event(params: ModelParams, shock: float, calm_rho: float,
                 stress_rho: float, fb_beta: float, seed: int, vbar: float,
                 pre: int, stress_bars: int) -> tuple[float, np.ndarray]:
    """(pre-event price level, event-day bar prices) for one realization."""
    calm = params.with_rho(calm_rho)
    pre_path = run_market(calm, pre, seed, vbar=vbar, feedback_beta=0.0)
    base = float(np.mean(pre_path.p[-30:]))

    mkt = calm.market
    phi = calm.phi
    lam = kyle_lambda(mkt, phi, stress_rho)
    gamma = phi * stress_rho * fb_beta / mkt.lambda_prime
    delta_v = shock * vbar
    block = delta_v / lam  # sized so its one-bar impact equals the shock

    rng = generator(seed, "crash-bars")
    u_bar = rng.normal(0.0, mkt.sigma_u / math.sqrt(INTRADAY_BARS), size=stress_bars)

    w = FEEDBACK_WINDOW
    p0 = float(pre_path.p[-1])
    hist = [p0] * (w + 1)  # lookback seeded at the pre-event level
    bars = np.empty(stress_bars)
    for t in range(stress_bars):
        flow = u_bar[t]
        if t == 0:
            flow -= block
        if fb_beta > 0.0:
            move = (hist[-1] - hist[-1 - w]) / w
            flow += (gamma / lam) * move
        bars[t] = price_update(hist[-1], flow, lam)
        hist.append(float(bars[t]))
    return base, bars


def _peak_decline(base: float, bars: np.ndarray, smooth: int = 7) -> float:
    """Peak drop fraction: pre-event level minus the smoothed intraday trough."""
    kernel = np.ones(smooth) / smooth
    p_s = np.convolve(bars, kernel, mode="valid")
    trough = float(np.min(p_s))
    return (base - trough) / base


def write_summary(path: MarketPath, out_path, extra: Optional[dict] = None) -> None:
    payload = path.summary()
    if extra:
        payload.update(extra)
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
