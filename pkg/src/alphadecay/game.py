"""The competitive adoption game: incentives, fixed-point equilibria with
stability labels, Red Queen diagnostics, and Monte Carlo welfare curves.

Equilibria are fixed points of the best-response map phi -> G(incentive);
an institution adopts when its cost is below the alpha advantage plus the
career-concern term. Welfare curves are evaluated by the market simulator
with common random numbers across the adoption grid, so the orderings of
the optima are testable at desk scale.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .closedform import DomainError, crowding_decay, kyle_lambda
from .params import CostDistribution, CostKind, ModelParams
from .market import run_market
from .seeding import replication_seeds


class EquilibriumKind(Enum):
    DIVERSIFIED = "diversified"
    TIPPING = "tipping"
    RED_QUEEN = "red_queen"


@dataclass(frozen=True)
class EquilibriumPoint:
    phi_star: float
    stable: bool
    kind: EquilibriumKind
    residual: float


@dataclass(frozen=True)
class EquilibriumSet:
    points: tuple
    params_digest: str = ""

    def stable_points(self) -> list:
        return [p for p in self.points if p.stable]

    def highest_stable(self) -> Optional[EquilibriumPoint]:
        st = self.stable_points()
        return max(st, key=lambda p: p.phi_star) if st else None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi_star", "stable", "kind", "residual"])
            for p in self.points:
                w.writerow([repr(p.phi_star), int(p.stable), p.kind.value, repr(p.residual)])


@dataclass
class WelfareCurve:
    grid: np.ndarray
    w_eff: np.ndarray
    w_eff_se: np.ndarray
    w_stab: np.ndarray
    w_stab_se: np.ndarray
    w_social: np.ndarray
    phi_eff_star: float
    phi_stab_star: float
    phi_social: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi", "w_eff", "w_eff_se", "w_stab", "w_stab_se", "w_social"])
            for i in range(len(self.grid)):
                w.writerow([repr(float(self.grid[i])), repr(float(self.w_eff[i])),
                            repr(float(self.w_eff_se[i])), repr(float(self.w_stab[i])),
                            repr(float(self.w_stab_se[i])), repr(float(self.w_social[i]))])


def cost_cdf(dist: CostDistribution, c: float) -> float:
    """Mass of institutions with adoption cost at most c."""
    lo_or_mu, hi_or_sigma = dist.params
    if dist.kind is CostKind.UNIFORM:
        lo, hi = lo_or_mu, hi_or_sigma
        return min(1.0, max(0.0, (c - lo) / (hi - lo)))
    if c <= 0.0:
        return 0.0
    return float(ndtr((math.log(c) - lo_or_mu) / hi_or_sigma))


def cost_quantile(dist: CostDistribution, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise DomainError("quantile must be in (0,1)")
    lo_or_mu, hi_or_sigma = dist.params
    if dist.kind is CostKind.UNIFORM:
        lo, hi = lo_or_mu, hi_or_sigma
        return lo + q * (hi - lo)
    return math.exp(lo_or_mu + hi_or_sigma * float(ndtri(q)))


def _per_capita_alphas(params: ModelParams, phi: float) -> tuple[float, float]:
    """(AI, human) per-institution alpha at adoption phi.

    The AI alpha splits each signal's compressed opportunity into a
    private part (1 - rho^2) and a correlated part shared among the
    N phi adopters; a human keeps a precision-discounted claim on the
    same compressed pool but shares it with no one (independent noise).
    When alpha_h0 is set, the human side is instead normalized so its
    per-signal alpha at phi = 0 equals alpha_h0.
    """
    lam = kyle_lambda(params.market, phi, params.rho_bar)
    n_adopters = max(params.n_institutions * phi, 1.0)
    precision = min(1.0, (params.market.sigma_eta / params.market.sigma_h) ** 2) \
        if params.market.sigma_h > 0 else 1.0
    a_ai = 0.0
    a_h = 0.0
    for sig in params.signals:
        te = sig.theta + crowding_decay(sig, phi, params.n_institutions, lam)
        pool = sig.sigma0_sq / (2.0 * te)
        a_ai += pool * ((1.0 - sig.rho**2) + sig.rho**2 / n_adopters)
        if params.alpha_h0 is not None:
            a_h += params.alpha_h0 * sig.theta / te
        else:
            a_h += precision * pool
    return a_ai, a_h


def alpha_advantage(phi: float, params: ModelParams) -> float:
    """Per-institution gross alpha gap between AI and human strategies."""
    a_ai, a_h = _per_capita_alphas(params, phi)
    return a_ai - a_h


def adoption_incentive(phi: float, cost: float, params: ModelParams) -> float:
    """Net payoff gap from adopting: advantage - cost + gamma (phi - d)."""
    return alpha_advantage(phi, params) - cost + params.gamma * (phi - params.d_bench)


def best_response_share(phi: float, params: ModelParams) -> float:
    """Share of institutions whose cost clears the adoption margin,
    G(advantage + gamma (phi - d))."""
    threshold = alpha_advantage(phi, params) + params.gamma * (phi - params.d_bench)
    return cost_cdf(params.cost_dist, threshold)


def find_equilibria(params: ModelParams, grid_size: int = 1000,
                    tol: float = 1e-10) -> EquilibriumSet:
    """All fixed points of phi -> G(incentive(phi)) on [0, 1].

    Scans a fine grid for sign changes of r(phi) = BR(phi) - phi, refines
    each root by bisection, and labels stability by the local slope of r.
    Close roots need the fine scan: the best-response can be S-shaped.
    """
    if grid_size < 100:
        raise DomainError("grid_size must be >= 100")
    if tol <= 0:
        raise DomainError("tol must be > 0")

    def r(phi: float) -> float:
        return best_response_share(phi, params) - phi

    grid = np.linspace(0.0, 1.0, grid_size + 1)
    vals = np.array([r(float(x)) for x in grid])
    roots: list[float] = []
    for i in range(grid_size):
        lo, hi = float(grid[i]), float(grid[i + 1])
        flo, fhi = float(vals[i]), float(vals[i + 1])
        if flo == 0.0:
            roots.append(lo)
            continue
        if flo * fhi < 0.0:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = r(mid)
                if fm == 0.0 or (hi - lo) < tol * 0.01:
                    break
                if flo * fm < 0.0:
                    hi, fhi = mid, fm
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
    if vals[-1] == 0.0:
        roots.append(1.0)

    # boundary equilibria when r never changes sign
    if not roots:
        roots.append(1.0 if vals[0] > 0 else 0.0)

    # dedupe near-identical roots
    roots.sort()
    merged: list[float] = []
    for x in roots:
        if not merged or x - merged[-1] > 1e-6:
            merged.append(x)

    eps = 1e-5
    points = []
    for x in merged:
        lo_x, hi_x = max(0.0, x - eps), min(1.0, x + eps)
        slope = (r(hi_x) - r(lo_x)) / (hi_x - lo_x)
        stable = slope < 0.0
        points.append([x, stable, abs(best_response_share(x, params) - x)])

    labeled = []
    stable_xs = [q[0] for q in points if q[1]]
    for x, stable, resid in points:
        if not stable:
            kind = EquilibriumKind.TIPPING
        elif stable_xs and x == max(stable_xs) and x > 0.0:
            kind = EquilibriumKind.RED_QUEEN
        else:
            kind = EquilibriumKind.DIVERSIFIED
        labeled.append(EquilibriumPoint(phi_star=x, stable=stable, kind=kind,
                                        residual=resid))
    return EquilibriumSet(points=tuple(labeled), params_digest=params.digest())


def red_queen_check(eq: EquilibriumPoint, params: ModelParams,
                    tol: float = 1e-6, perturbation: float = 0.02) -> dict:
    """Diagnostics at a stable equilibrium: the marginal institution's net
    gain is zero, adoption is positive, and one-sided deviations of the
    adoption share pull back toward the fixed point. Also reports the
    aggregate net alpha earned by the adopters."""
    if not eq.stable:
        raise DomainError("Red Queen check applies to stable equilibria")
    phi = eq.phi_star
    out: dict = {"phi": phi, "is_red_queen": False}
    out["positive_adoption"] = phi > 0.0
    threshold = alpha_advantage(phi, params) + params.gamma * (phi - params.d_bench)
    if 0.0 < phi < 1.0:
        marginal_cost = cost_quantile(params.cost_dist, phi)
        out["marginal_net_alpha"] = threshold - marginal_cost
    else:
        # saturated boundary: no indifferent institution exists
        out["marginal_net_alpha"] = math.nan
    out["marginal_zero"] = (abs(out["marginal_net_alpha"]) <= tol
                            if math.isfinite(out["marginal_net_alpha"]) else False)

    pulls_back = True
    for sign in (-1.0, 1.0):
        probe = min(1.0, max(0.0, phi + sign * perturbation))
        if probe == phi:
            continue
        drift = best_response_share(probe, params) - probe
        if sign > 0 and drift > 0:
            pulls_back = False
        if sign < 0 and drift < 0:
            pulls_back = False
    out["no_profitable_deviation"] = pulls_back

    # aggregate net alpha over adopters: gross AI alpha minus adoption cost,
    # integrated over the adopting mass by cost quantiles (career-concern
    # payoffs are reputational, not alpha)
    n_adopt = params.n_institutions * phi
    if phi > 0:
        gross, _ = _per_capita_alphas(params, phi)
        qs = (np.arange(200) + 0.5) / 200 * min(phi, 1.0 - 1e-12)
        costs = np.array([cost_quantile(params.cost_dist, float(q)) for q in qs])
        out["aggregate_net_alpha"] = float(np.mean(gross - costs) * n_adopt)
    else:
        out["aggregate_net_alpha"] = 0.0
    out["is_red_queen"] = bool(out["positive_adoption"] and out["marginal_zero"]
                               and out["no_profitable_deviation"])
    return out


def welfare_eff(phi: float, params: ModelParams, replications: int, seed: int,
                horizon: int = 2000) -> tuple[float, float]:
    """Price-discovery welfare: negative mean squared pricing error across
    ticks and replications, with its Monte Carlo standard error."""
    if replications < 10:
        raise DomainError("need at least 10 replications")
    p = params.with_phi(phi)
    seeds = replication_seeds(seed, "welfare", replications)
    per_rep = np.empty(replications)
    for i, s in enumerate(seeds):
        path = run_market(p, horizon, s)
        per_rep[i] = path.mse()
    return -float(np.mean(per_rep)), float(np.std(per_rep, ddof=1) / math.sqrt(replications))


def welfare_stab(phi: float, params: ModelParams, replications: int, seed: int,
                 horizon: int = 2000) -> tuple[float, float]:
    """Stability welfare: negative mean of the worst 1% of absolute pricing
    errors over the pooled ticks (the conditional tail expectation)."""
    p = params.with_phi(phi)
    seeds = replication_seeds(seed, "welfare", replications)
    errs = []
    for s in seeds:
        path = run_market(p, horizon, s)
        errs.append(np.abs(path.pricing_errors()))
    pooled = np.concatenate(errs)
    n_tail = int(math.floor(0.01 * len(pooled)))
    if n_tail < 100:
        raise DomainError(
            f"only {n_tail} samples in the 1% tail; increase replications or horizon"
        )
    tail = np.sort(pooled)[-n_tail:]
    # per-replication CTE spread as a conservative error gauge
    per_rep = np.empty(replications)
    for i, e in enumerate(errs):
        k = max(1, int(math.floor(0.01 * len(e))))
        per_rep[i] = np.sort(e)[-k:].mean()
    return -float(np.mean(tail)), float(np.std(per_rep, ddof=1) / math.sqrt(replications))


def _welfare_point(phi: float, params: ModelParams, replications: int,
                   seed: int, horizon: int) -> tuple[float, float, float, float]:
    """Both welfare criteria from one shared set of market runs."""
    p = params.with_phi(phi)
    seeds = replication_seeds(seed, "welfare", replications)
    mses = np.empty(replications)
    rep_cte = np.empty(replications)
    errs = []
    for i, s in enumerate(seeds):
        path = run_market(p, horizon, s)
        e = np.abs(path.pricing_errors())
        errs.append(e)
        mses[i] = float(np.mean(e * e))
        k = max(1, int(math.floor(0.01 * len(e))))
        rep_cte[i] = np.sort(e)[-k:].mean()
    pooled = np.concatenate(errs)
    n_tail = int(math.floor(0.01 * len(pooled)))
    if n_tail < 100:
        raise DomainError(
            f"only {n_tail} samples in the 1% tail; increase replications or horizon"
        )
    tail = np.sort(pooled)[-n_tail:]
    w_eff = -float(np.mean(mses))
    w_eff_se = float(np.std(mses, ddof=1) / math.sqrt(replications))
    w_stab = -float(np.mean(tail))
    w_stab_se = float(np.std(rep_cte, ddof=1) / math.sqrt(replications))
    return w_eff, w_eff_se, w_stab, w_stab_se


def optimal_phis(params: ModelParams, grid: np.ndarray, replications: int,
                 weights: float, seed: int, horizon: int = 2000,
                 threads: int = 1) -> WelfareCurve:
    """Evaluate both welfare criteria on an adoption grid with common
    random numbers and locate the optima and their Pareto blend."""
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 11:
        raise DomainError("grid must have at least 11 points")
    if not 0.0 <= weights <= 1.0:
        raise DomainError("weights must be in [0,1]")

    def eval_point(phi: float):
        return _welfare_point(phi, params, replications, seed, horizon)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(eval_point, [float(x) for x in grid]))
    else:
        results = [eval_point(float(x)) for x in grid]

    w_eff = np.array([r[0] for r in results])
    w_eff_se = np.array([r[1] for r in results])
    w_stab = np.array([r[2] for r in results])
    w_stab_se = np.array([r[3] for r in results])
    w_social = weights * w_eff + (1.0 - weights) * w_stab
    return WelfareCurve(
        grid=grid, w_eff=w_eff, w_eff_se=w_eff_se, w_stab=w_stab,
        w_stab_se=w_stab_se, w_social=w_social,
        phi_eff_star=float(grid[int(np.argmax(w_eff))]),
        phi_stab_star=float(grid[int(np.argmax(w_stab))]),
        phi_social=float(grid[int(np.argmax(w_social))]),
    )


def overinvestment_wedge(params: ModelParams, grid: np.ndarray, replications: int,
                         weights: float, seed: int, horizon: int = 2000) -> float:
    """Gap between the highest stable market equilibrium and the socially
    optimal adoption share; positive when competition overshoots."""
    curve = optimal_phis(params, grid, replications, weights, seed, horizon)
    eqs = find_equilibria(params)
    top = eqs.highest_stable()
    if top is None:
        raise DomainError("no stable equilibrium found")
    return top.phi_star - curve.phi_social
