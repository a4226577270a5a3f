"""Scenario runner: every subsystem behind one command-line entry point.

Every subcommand writes CSV tables plus a JSON metadata sidecar (seed,
version, parameter digest) into the output directory, and a rerun with
the same config and seed produces byte-identical files at any thread
count. Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closedform import (
    cross_sectional_dispersion,
    crowding_decay,
    delta_increasing_condition,
    effective_decay,
    half_life,
    kyle_lambda,
    reflexive_multiplier,
    InstabilityError,
)
from .config import ConfigError, ScenarioConfig, load_config
from .erosion import cascade_simulate, events_to_csv, post_thresholds_to_csv
from .game import find_equilibria, optimal_phis, red_queen_check
from .holdings import convergence_series, generate_synthetic_13f, rho_pca, rho_sync
from .market import flash_crash, run_market, write_summary
from .params import ModelParams
from .performance import (
    estimate_half_life,
    excess_alpha_decay_series,
    generate_fund_panel,
    return_dispersion,
)
from .seeding import derive_seed


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _sidecar(out: Path, name: str, cfg: ScenarioConfig, **extra) -> None:
    payload = {
        "command": name,
        "version": __version__,
        "seed": cfg.seed,
        "params_digest": cfg.params.digest(),
    }
    payload.update(extra)
    with open(out / f"{name}.meta.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_halflife_sweep(cfg: ScenarioConfig, out: Path) -> None:
    """Half-life h(phi) grid for the configured homogeneity levels."""
    rhos = cfg.halflife_sweep["rhos"]
    n_grid = cfg.halflife_sweep["grid_points"]
    grid = np.linspace(0.0, 1.0, n_grid)
    rows = []
    for rho in rhos:
        p = cfg.params.with_rho(rho)
        sig = p.signals[0]
        for phi in grid:
            lam = kyle_lambda(p.market, float(phi), rho)
            te = effective_decay(sig, float(phi), p.n_institutions, lam)
            rows.append([float(rho), float(phi), half_life(te)])
    _write_csv(out / "halflife_sweep.csv", ["rho", "phi", "half_life_months"], rows)
    _write_csv(out / "halflife_reference.csv", ["label", "months"],
               [["pre_ai", 58.0], ["current", 18.0]])
    _sidecar(out, "halflife_sweep", cfg, rhos=rhos, grid_points=n_grid)


def cmd_cascade(cfg: ScenarioConfig, out: Path) -> None:
    phi = cfg.cascade["phi"]
    epochs = cfg.cascade["epochs"]
    trace, events = cascade_simulate(cfg.params, phi, epochs,
                                     derive_seed(cfg.seed, "cascade"))
    trace.to_csv(out / "cascade_trace.csv")
    events_to_csv(events, out / "cascade_events.csv")
    post_thresholds_to_csv(events, out / "cascade_thresholds.csv")
    _sidecar(out, "cascade", cfg, phi=phi, epochs=epochs, extinctions=len(events))


def cmd_market(cfg: ScenarioConfig, out: Path) -> None:
    from .market import AgentKind, measure_alpha

    path = run_market(cfg.params, cfg.horizon, derive_seed(cfg.seed, "market"),
                      record_agents=True)
    path.to_csv(out / "market_path.csv")
    alphas = {ag.id: measure_alpha(path, ag, cfg.params.tau_risk)["total"]
              for ag in path.agents}
    ai_ids = [ag.id for ag in path.agents if ag.kind is AgentKind.AI]
    hu_ids = [ag.id for ag in path.agents if ag.kind is AgentKind.HUMAN]
    write_summary(path, out / "market_summary.json", extra={
        "alpha_per_agent": {str(i): alphas[i] for i in sorted(alphas)},
        "alpha_ai_mean": float(np.mean([alphas[i] for i in ai_ids])) if ai_ids else None,
        "alpha_human_mean": float(np.mean([alphas[i] for i in hu_ids])) if hu_ids else None,
    })
    _sidecar(out, "market", cfg, horizon=cfg.horizon)


def cmd_crash(cfg: ScenarioConfig, out: Path) -> None:
    c = cfg.crash
    rows = []
    m_hats = []
    for i in range(c["n_seeds"]):
        sc = flash_crash(cfg.params, c["shock"], c["calm_rho"], c["stress_rho"],
                         derive_seed(cfg.seed, "crash", i),
                         feedback_beta=c["feedback_beta"],
                         pre_ticks=c["pre_ticks"], stress_bars=c["stress_bars"],
                         post_ticks=c["post_ticks"])
        rows.append([i, sc.observed_decline, sc.fundamental_decline, sc.m_hat,
                     int(sc.unstable)])
        m_hats.append(sc.m_hat)
    _write_csv(out / "crash_scenarios.csv",
               ["replication", "observed_decline", "fundamental_decline", "m_hat",
                "unstable"], rows)
    finite = [m for m in m_hats if math.isfinite(m)]
    _sidecar(out, "crash", cfg, m_hat_mean=float(np.mean(finite)) if finite else None,
             m_hat_sd=float(np.std(finite)) if finite else None, **c)


def cmd_equilibrium(cfg: ScenarioConfig, out: Path) -> None:
    eqs = find_equilibria(cfg.params, grid_size=cfg.grid_size, tol=cfg.tol)
    eqs.to_csv(out / "equilibria.csv")
    grid = np.linspace(0.0, 1.0, 201)
    from .game import best_response_share
    rows = [[float(x), best_response_share(float(x), cfg.params),
             best_response_share(float(x), cfg.params) - float(x)] for x in grid]
    _write_csv(out / "best_response.csv", ["phi", "best_response", "excess"], rows)
    diag = {}
    top = eqs.highest_stable()
    if top is not None and 0.0 < top.phi_star < 1.0:
        diag = red_queen_check(top, cfg.params)
    _sidecar(out, "equilibrium", cfg, n_equilibria=len(eqs.points),
             red_queen={k: (v if not isinstance(v, float) or math.isfinite(v) else None)
                        for k, v in diag.items()})


def cmd_welfare(cfg: ScenarioConfig, out: Path) -> None:
    grid = np.linspace(0.0, 1.0, cfg.welfare_grid_points)
    curve = optimal_phis(cfg.params, grid, cfg.replications, cfg.weights,
                         derive_seed(cfg.seed, "welfare"), horizon=cfg.horizon,
                         threads=cfg.threads)
    curve.to_csv(out / "welfare.csv")
    eqs = find_equilibria(cfg.params, grid_size=cfg.grid_size, tol=cfg.tol)
    top = eqs.highest_stable()
    phi_market = top.phi_star if top else math.nan
    _write_csv(out / "welfare_optima.csv",
               ["phi_eff_star", "phi_stab_star", "phi_social", "phi_market", "wedge"],
               [[curve.phi_eff_star, curve.phi_stab_star, curve.phi_social,
                 phi_market, phi_market - curve.phi_social]])
    _sidecar(out, "welfare", cfg, grid_points=cfg.welfare_grid_points,
             replications=cfg.replications)


def cmd_thirteenf(cfg: ScenarioConfig, out: Path) -> None:
    t = cfg.thirteenf
    panel = generate_synthetic_13f(
        t["n_institutions"], t["n_assets"], t["quarters"],
        derive_seed(cfg.seed, "thirteenf"), ai_share=t["ai_share"],
        s_start=t["s_start"], ai_end=t["ai_end"], nonai_end=t["nonai_end"],
        breaks=tuple(t["breaks"]), total_logit_var=t["total_logit_var"],
    )
    series = convergence_series(panel)
    series.to_csv(out / "convergence.csv")
    rows = []
    for q in panel.quarters[1:]:
        rows.append([q, rho_pca(panel, q), rho_sync(panel, q)])
    _write_csv(out / "rho_estimates.csv", ["quarter", "rho_pca", "rho_sync"], rows)
    _sidecar(out, "thirteenf", cfg,
             s_bar_first=float(series.aggregate[:4].mean()),
             s_bar_last=float(series.aggregate[-4:].mean()), **{
                 k: (list(v) if isinstance(v, (list, tuple)) else v)
                 for k, v in t.items()})


def cmd_dispersion(cfg: ScenarioConfig, out: Path) -> None:
    d = cfg.dispersion
    returns, mask = generate_fund_panel(
        cfg.params, d["n_ai"], d["n_human"], d["months"],
        derive_seed(cfg.seed, "dispersion"), ai_start=d["ai_start"],
        human_start=d["human_start"],
        phi_path=(d["phi_start"], d["phi_end"]),
        rho_path=(d["rho_start"], d["rho_end"]),
        human_spillover=d["human_spillover"],
    )
    w = d["window"]
    d_ai = return_dispersion(returns, w, mask)
    d_h = return_dispersion(returns, w, ~mask)
    rows = [[i, float(d_ai[i]), float(d_h[i]), float(d_ai[i] / d_h[i])]
            for i in range(len(d_ai))]
    _write_csv(out / "dispersion.csv", ["month", "d_ai", "d_human", "ratio"], rows)
    _sidecar(out, "dispersion", cfg,
             ai_decline=float(1 - d_ai[-1] / d_ai[0]),
             human_decline=float(1 - d_h[-1] / d_h[0]),
             end_ratio=float(d_ai[-1] / d_h[-1]))


def cmd_sensitivity(cfg: ScenarioConfig, out: Path) -> None:
    """Half-life sensitivity: one parameter varies per panel around the
    baseline (phi=0.7, rho=0.6, N=100, K=5)."""
    base = cfg.params
    sig = base.signals[0]
    rows = []

    def h_at(params: ModelParams, phi: float) -> float:
        lam = kyle_lambda(params.market, phi, params.rho_bar)
        te = effective_decay(params.signals[0], phi, params.n_institutions, lam)
        return half_life(te)

    for phi in np.linspace(0.0, 1.0, 41):
        rows.append(["phi", float(phi), h_at(base, float(phi)),
                     int(delta_increasing_condition(base.market, float(phi)))])
    for rho in np.linspace(0.0, 1.0, 41):
        p = base.with_rho(float(rho))
        rows.append(["rho", float(rho), h_at(p, base.phi), 1])
    for n in (25, 50, 100, 200, 400):
        p = ModelParams(n_institutions=n, k_signals=base.k_signals,
                        phi=base.phi, signals=base.signals, market=base.market,
                        kappa=base.kappa, i_max=base.i_max, gamma=base.gamma,
                        d_bench=base.d_bench, cost_dist=base.cost_dist,
                        tau_risk=base.tau_risk, beta=base.beta,
                        feedback_beta=base.feedback_beta)
        rows.append(["n_institutions", float(n), h_at(p, base.phi), 1])
    for theta_mult in (0.5, 0.75, 1.0, 1.5, 2.0):
        from dataclasses import replace
        p = ModelParams(n_institutions=base.n_institutions, k_signals=base.k_signals,
                        phi=base.phi,
                        signals=tuple(replace(s, theta=s.theta * theta_mult)
                                      for s in base.signals),
                        market=base.market, kappa=base.kappa, i_max=base.i_max,
                        gamma=base.gamma, d_bench=base.d_bench,
                        cost_dist=base.cost_dist, tau_risk=base.tau_risk,
                        beta=base.beta, feedback_beta=base.feedback_beta)
        rows.append(["theta_mult", float(theta_mult), h_at(p, base.phi), 1])
    _write_csv(out / "sensitivity.csv",
               ["parameter", "value", "half_life_months", "delta_increasing"], rows)
    _sidecar(out, "sensitivity", cfg)


def cmd_multiplier_surface(cfg: ScenarioConfig, out: Path) -> None:
    """M(phi, rho) grid for the multiplier surface figure."""
    rows = []
    lamp = cfg.params.market.lambda_prime
    beta = cfg.params.beta
    for phi in np.linspace(0.0, 1.0, 41):
        for rho in np.linspace(0.0, 1.0, 41):
            try:
                m = reflexive_multiplier(float(phi), float(rho), beta, lamp)
            except InstabilityError:
                m = math.inf
            rows.append([float(phi), float(rho),
                         m if math.isfinite(m) else "inf"])
    _write_csv(out / "multiplier_surface.csv", ["phi", "rho", "multiplier"], rows)
    _sidecar(out, "multiplier_surface", cfg, beta=beta, lambda_prime=lamp)


def cmd_alpha_decay(cfg: ScenarioConfig, out: Path) -> None:
    """Simulated excess-alpha decay series plus its fitted half-life."""
    hf = cfg.halflife_fit
    series = excess_alpha_decay_series(cfg.params, hf["months"], hf["n_seeds"],
                                       derive_seed(cfg.seed, "alpha-decay"))
    scale = cfg.units["alpha_scale"]
    offset = cfg.units["alpha_offset"]
    est = estimate_half_life(series)
    rows = [[m, float(series[m]), float(series[m] * scale + offset)]
            for m in range(len(series))]
    _write_csv(out / "alpha_decay.csv", ["month", "alpha_model", "alpha_mapped"], rows)
    _write_csv(out / "alpha_decay_fit.csv",
               ["h_hat_months", "theta_eff_hat", "r_squared"],
               [[est.h_hat, est.theta_eff_hat, est.r_squared]])
    _sidecar(out, "alpha_decay", cfg, h_hat=est.h_hat, r_squared=est.r_squared)


def cmd_dispersion_curve(cfg: ScenarioConfig, out: Path) -> None:
    """Closed-form cross-sectional dispersion D(phi)."""
    rows = []
    for phi in np.linspace(0.0, 1.0, 101):
        rows.append([float(phi), cross_sectional_dispersion(cfg.params, float(phi))])
    _write_csv(out / "dispersion_curve.csv", ["phi", "dispersion"], rows)
    _sidecar(out, "dispersion_curve", cfg)


def cmd_report_data(cfg: ScenarioConfig, out: Path) -> None:
    """The full figure-data bundle: every subcommand into one directory."""
    for fn in (cmd_halflife_sweep, cmd_dispersion_curve, cmd_cascade, cmd_market,
               cmd_crash, cmd_equilibrium, cmd_welfare, cmd_thirteenf,
               cmd_dispersion, cmd_sensitivity, cmd_multiplier_surface,
               cmd_alpha_decay):
        fn(cfg, out)
    with open(out / "resolved_config.json", "w") as fh:
        json.dump(cfg.snapshot(), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


_COMMANDS = {
    "halflife-sweep": cmd_halflife_sweep,
    "cascade": cmd_cascade,
    "market": cmd_market,
    "crash": cmd_crash,
    "equilibrium": cmd_equilibrium,
    "welfare": cmd_welfare,
    "thirteenf": cmd_thirteenf,
    "dispersion": cmd_dispersion,
    "sensitivity": cmd_sensitivity,
    "report-data": cmd_report_data,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="alphadecay",
        description="Scenario runner for the AI-driven alpha decay toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="TOML scenario config")
        sp.add_argument("--seed", type=int, default=None, help="master seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--replications", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides={
            "seed": args.seed,
            "out_dir": args.out,
            "replications": args.replications,
            "threads": args.threads,
        })
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - boundary: report and signal failure
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
