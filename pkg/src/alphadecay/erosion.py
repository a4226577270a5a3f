"""Performative signal erosion: OU paths, retraining-epoch recursion,
steady states, extinction thresholds, and the extinction cascade.

One retraining epoch equals one month, matching the per-month rate units
used everywhere else. A signal is declared extinct once its innovation
variance falls below EXTINCTION_FLOOR_RATIO times its initial value; the
asymptotic "effective extinction" needs a finite floor to become a
discrete event.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .closedform import DomainError, stationary_alpha
from .params import ModelParams, SignalSpec
from .seeding import generator

EXTINCTION_FLOOR_RATIO = 1e-4


class SignalStatus(Enum):
    REGENERATING = "regenerating"
    COMPRESSING = "compressing"
    EXTINCT = "extinct"


@dataclass
class SignalState:
    """Evolving per-signal state inside the erosion recursion."""

    spec: SignalSpec
    sigma_sq: float
    f: float = 0.0
    status: SignalStatus = SignalStatus.REGENERATING
    epoch: int = 0

    def __post_init__(self) -> None:
        if self.sigma_sq < 0:
            raise DomainError("sigma_sq must be >= 0")


@dataclass(frozen=True)
class CascadeEvent:
    """One extinction: which signal died, when, and the survivors' new
    (strictly lower) thresholds after capital reallocation."""

    signal_index: int
    epoch: int
    vulnerability: float
    post_thresholds: dict


@dataclass
class ErosionTrace:
    """Per-epoch record of the coupled erosion recursion.

    Arrays are laid out (epochs + 1, K): row 0 is the initial state.
    Immutable after construction; safe to share across threads.
    """

    phi: float
    seed: int
    epochs: int
    sigma_sq: np.ndarray
    intensity: np.ndarray
    status: np.ndarray  # SignalStatus values as strings
    clamped: bool = False

    def __post_init__(self) -> None:
        for arr in (self.sigma_sq, self.intensity, self.status):
            arr.setflags(write=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "signal_index", "sigma_sq", "intensity", "status"])
            n_epochs, k = self.sigma_sq.shape
            for t in range(n_epochs):
                for j in range(k):
                    w.writerow([t, j, repr(float(self.sigma_sq[t, j])),
                                repr(float(self.intensity[t, j])), self.status[t, j]])


def simulate_ou(spec: SignalSpec, horizon: float, dt: float, seed: int,
                f0: Optional[float] = None) -> np.ndarray:
    """Exact-transition OU path of the signal level.

    f(t+dt) = f(t) e^(-theta dt) + N(0, sigma^2 (1 - e^(-2 theta dt)) / (2 theta)),
    started from the stationary law N(0, sigma^2 / (2 theta)) unless f0 is
    given. The exact transition removes discretization bias from
    stationary-variance checks.
    """
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    if horizon < dt:
        raise DomainError("horizon must be at least one step")
    from scipy.signal import lfilter

    n_steps = int(round(horizon / dt))
    rng = generator(seed, "ou")
    decay = math.exp(-spec.theta * dt)
    stat_var = spec.stationary_variance
    step_var = stat_var * (1.0 - decay * decay)
    if f0 is None:
        f0 = rng.normal(0.0, math.sqrt(stat_var))
    shocks = rng.normal(0.0, math.sqrt(step_var), size=n_steps) if step_var > 0 else np.zeros(n_steps)
    path = np.empty(n_steps + 1)
    path[0] = f0
    path[1:] = lfilter([1.0], [1.0, -decay], shocks) \
        + f0 * decay ** np.arange(1, n_steps + 1)
    return path


def trading_intensity(state: SignalState, phi: float, n: int) -> float:
    """Aggregate correlated trading intensity N phi |a f| rho; only the
    correlated component erodes the signal."""
    return n * phi * abs(state.spec.a * state.f) * state.spec.rho


def erosion_step(state: SignalState, intensity: float, beta: float,
                 kappa: float, i_max: float) -> tuple[float, bool]:
    """One retraining epoch of the variance recursion,

        sigma^2(tau+1) = sigma^2(tau) * [1 + g - beta (I / I_max)^kappa],

    floored at zero. Returns (next_sigma_sq, clamped). Regeneration is
    capped at the initial amplitude upstream, in the cascade loop.
    """
    if i_max <= 0:
        raise DomainError("i_max must be > 0")
    if not 0.0 <= beta < 1.0:
        raise DomainError(f"beta must be in [0,1), got {beta}")
    if kappa < 1.0:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    factor = 1.0 + state.spec.g - beta * (intensity / i_max) ** kappa
    nxt = state.sigma_sq * factor
    if nxt < 0.0:
        return 0.0, True
    return nxt, False


def extinction_threshold(spec: SignalSpec, params: ModelParams, beta: float,
                         *, a: Optional[float] = None) -> float:
    """Critical adoption share beyond which erosion outpaces regeneration:

        phi* = [I_max sqrt(pi theta) / (N rho a sigma(0))] * (g / beta)^(1/kappa).

    rho = 0 or a = 0 means correlated flow never erodes the signal; that
    is signaled as an infinite threshold (never extinct).
    """
    if beta <= 0:
        raise DomainError("beta must be > 0")
    a_eff = spec.a if a is None else a
    if spec.rho == 0.0 or a_eff == 0.0:
        return math.inf
    lead = params.i_max * math.sqrt(math.pi * spec.theta) / (
        params.n_institutions * spec.rho * a_eff * spec.sigma0
    )
    return lead * (spec.g / beta) ** (1.0 / params.kappa)


def steady_state_variance(spec: SignalSpec, phi: float, phi_star: float) -> float:
    """Long-run variance: sigma^2(0) below the threshold, quadratic
    compression sigma^2(0) (phi*/phi)^2 above it."""
    if phi_star <= 0:
        raise DomainError("phi_star must be > 0")
    if phi <= phi_star:
        return spec.sigma0_sq
    return spec.sigma0_sq * (phi_star / phi) ** 2


def vulnerability_index(spec: SignalSpec, kappa: float) -> float:
    """Cascade ordering key rho a / g^(1/kappa); g = 0 is maximally
    vulnerable (+inf sentinel)."""
    if spec.g == 0.0:
        return math.inf
    return spec.rho * spec.a / spec.g ** (1.0 / kappa)


def cascade_simulate(params: ModelParams, phi: float, epochs: int,
                     seed: int) -> tuple[ErosionTrace, list[CascadeEvent]]:
    """Run the coupled erosion recursion across all K signals.

    Signal levels follow exact OU transitions with the natural theta_k and
    the current (eroding) innovation variance; erosion uses instantaneous
    |f_k|. When a signal's variance crosses the extinction floor, its
    capital reallocates: every survivor j's effective aggressiveness is
    rescaled so its threshold contracts by
    (sum_{surviving} alpha(0) / sum_{alive} alpha(0))^(1/kappa).
    Deterministic per (params, phi, epochs, seed).
    """
    if epochs < 1:
        raise DomainError(f"epochs must be >= 1, got {epochs}")
    k = params.k_signals
    beta = params.beta
    rng = generator(seed, "cascade")

    specs = list(params.signals)
    a_eff = np.array([s.a for s in specs])
    alpha0 = np.array([stationary_alpha(s, s.theta) for s in specs])
    floor = np.array([EXTINCTION_FLOOR_RATIO * s.sigma0_sq for s in specs])

    sigma_sq = np.array([s.sigma0_sq for s in specs])
    cap = sigma_sq.copy()  # regeneration ceiling: the initial amplitude
    decay = np.array([math.exp(-s.theta) for s in specs])
    stat_scale = np.array([1.0 / (2.0 * s.theta) for s in specs])
    f = rng.normal(0.0, 1.0, size=k) * np.sqrt(sigma_sq * stat_scale)

    alive = np.ones(k, dtype=bool)
    sig_hist = np.empty((epochs + 1, k))
    int_hist = np.empty((epochs + 1, k))
    status_hist = np.empty((epochs + 1, k), dtype=object)
    sig_hist[0] = sigma_sq
    int_hist[0] = [
        params.n_institutions * phi * abs(a_eff[j] * f[j]) * specs[j].rho for j in range(k)
    ]
    status_hist[0] = [SignalStatus.REGENERATING.value] * k

    events: list[CascadeEvent] = []
    clamped_any = False
    shocks = rng.normal(0.0, 1.0, size=(epochs, k))

    for t in range(1, epochs + 1):
        prev = sigma_sq.copy()
        for j in range(k):
            if not alive[j]:
                int_hist[t, j] = 0.0
                status_hist[t, j] = SignalStatus.EXTINCT.value
                continue
            intensity = params.n_institutions * phi * abs(a_eff[j] * f[j]) * specs[j].rho
            int_hist[t, j] = intensity
            factor = 1.0 + specs[j].g - beta * (intensity / params.i_max) ** params.kappa
            nxt = sigma_sq[j] * factor
            if nxt < 0.0:
                nxt = 0.0
                clamped_any = True
            sigma_sq[j] = min(nxt, cap[j])

        # advance signal levels with the exact transition at current variance
        step_sd = np.sqrt(np.maximum(sigma_sq * stat_scale, 0.0) * (1.0 - decay**2))
        f = f * decay + shocks[t - 1] * step_sd

        newly_dead = [j for j in range(k) if alive[j] and sigma_sq[j] < floor[j]]
        # deterministic tie-break: most vulnerable dies first within an epoch
        newly_dead.sort(key=lambda j: -vulnerability_index(specs[j], params.kappa))
        for j in newly_dead:
            alive[j] = False
            sigma_sq[j] = 0.0
            f[j] = 0.0
            survivors = [m for m in range(k) if alive[m]]
            pool_before = alpha0[alive].sum() + alpha0[j]
            pool_after = alpha0[alive].sum()
            post: dict[int, float] = {}
            if survivors and pool_before > 0:
                contraction = (pool_after / pool_before) ** (1.0 / params.kappa)
                # phi* scales as 1/a, so scaling a by 1/contraction applies
                # the threshold contraction exactly
                for m in survivors:
                    a_eff[m] = a_eff[m] / contraction
                    post[m] = extinction_threshold(specs[m], params, beta, a=a_eff[m])
            events.append(CascadeEvent(
                signal_index=j,
                epoch=t,
                vulnerability=vulnerability_index(specs[j], params.kappa),
                post_thresholds=post,
            ))

        for j in range(k):
            if not alive[j]:
                status_hist[t, j] = SignalStatus.EXTINCT.value
            elif sigma_sq[j] < prev[j]:
                status_hist[t, j] = SignalStatus.COMPRESSING.value
            else:
                status_hist[t, j] = SignalStatus.REGENERATING.value
        sig_hist[t] = sigma_sq

    trace = ErosionTrace(phi=phi, seed=seed, epochs=epochs, sigma_sq=sig_hist,
                         intensity=int_hist, status=status_hist, clamped=clamped_any)
    return trace, events


def events_to_csv(events: list[CascadeEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["signal_index", "epoch", "vulnerability"])
        for e in events:
            w.writerow([e.signal_index, e.epoch, repr(float(e.vulnerability))])


def post_thresholds_to_csv(events: list[CascadeEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_ordinal", "extinct_signal", "survivor_index", "new_threshold"])
        for i, e in enumerate(events):
            for m, thr in sorted(e.post_thresholds.items()):
                w.writerow([i, e.signal_index, m, repr(float(thr))])
