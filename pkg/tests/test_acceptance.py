"""Acceptance suite: every calibration anchor and property the toolkit must
reproduce, at its stated tolerance. One printed PASS/FAIL line per
criterion (run with -s to see them on success)."""

import filecmp
import math
import subprocess
import sys

import numpy as np
import pytest

from alphadecay.closedform import (
    attenuation_factor,
    calibration_delta,
    cross_sectional_dispersion,
    crowding_decay,
    effective_decay,
    half_life,
    kyle_lambda,
    reflexive_multiplier,
)
from alphadecay.erosion import cascade_simulate, extinction_threshold, vulnerability_index
from alphadecay.game import find_equilibria, optimal_phis, red_queen_check
from alphadecay.holdings import (
    convergence_series,
    generate_synthetic_13f,
    planted_change_panel,
    rho_pca,
    rho_sync,
)
from alphadecay.market import flash_crash, retrain_regression, run_market
from alphadecay.params import MarketParams, baseline_params, baseline_signal
from alphadecay.performance import generate_fund_panel, return_dispersion
from alphadecay.seeding import replication_seeds


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def test_half_life_calibration():
    """58 months pre-AI; 18 months under the calibrated decay increment."""
    h0 = half_life(0.012)
    four_sig = float(f"{h0:.4g}")
    ok1 = four_sig == 57.76
    delta = calibration_delta(h0, 17.96, 0.012)
    h1 = half_life(0.012 + delta)
    ok2 = abs(h1 - 17.96) / 17.96 <= 1e-9
    report("half-life calibration", ok1 and ok2,
           f"h(0.012)={h0:.6f}, h(theta+delta)={h1:.12f}")


def test_convexity_monotonicity_suite():
    """h(phi) strictly decreasing and convex on a 101-point grid for every
    homogeneity level; the rho = 0 column is flat."""
    m = MarketParams()
    grid = np.linspace(0.0, 1.0, 101)
    ok = True
    for rho in (0.2, 0.4, 0.6, 0.8):
        s = baseline_signal(rho=rho)
        h = np.array([half_life(effective_decay(s, float(p), 100,
                                                kyle_lambda(m, float(p), rho)))
                      for p in grid])
        ok &= bool(np.all(np.diff(h) < 0) and np.all(np.diff(h, 2) > 0))
    s0 = baseline_signal(rho=0.0)
    h0 = [half_life(effective_decay(s0, float(p), 100, kyle_lambda(m, float(p), 0.0)))
          for p in grid]
    ok &= (max(h0) == min(h0))
    report("convexity/monotonicity suite", ok)


def test_dispersion_corollary():
    p = baseline_params()
    grid = np.linspace(0.0, 1.0, 101)
    d = np.array([cross_sectional_dispersion(p, float(x)) for x in grid])
    mono = bool(np.all(np.diff(d) < 0))
    zero = cross_sectional_dispersion(p.with_rho(1.0), 0.5) == 0.0
    report("dispersion corollary", mono and zero)


def test_attenuation_oracle():
    """Implied attenuation from simulated retraining regressions, against
    theta/(theta+delta) at the calibration."""
    delta = 0.012 * (58.0 / 18.0 - 1.0)
    target = attenuation_factor(0.012, delta)
    means = {0.0: [], 0.7: []}
    for phi in means:
        p = baseline_params(phi=phi)
        for seed in range(20):
            path = run_market(p, 100_000, seed=seed)
            oms = [retrain_regression(path, j, 99_000).omega_implied
                   for j in range(p.k_signals)]
            means[phi].append(float(np.mean(oms)))
    om0 = float(np.mean(means[0.0]))
    om7 = float(np.mean(means[0.7]))
    ok0 = abs(om0 - 1.0) <= 0.05
    ok7 = abs(om7 - target) / target <= 0.15
    report("attenuation oracle", ok0 and ok7,
           f"omega(0)={om0:.4f} vs 1; omega(0.7)={om7:.4f} vs {target:.4f}")


def test_cascade_ordering(cascade_fixture):
    """Extinctions in vulnerability order in at least 95% of 200 runs, with
    strictly contracting post-extinction thresholds."""
    p = cascade_fixture
    vuln = [vulnerability_index(s, p.kappa) for s in p.signals]
    expect_full = sorted(range(5), key=lambda j: -vuln[j])
    matches = 0
    contract_ok = True
    for seed in range(200):
        _, events = cascade_simulate(p, p.phi, 8000, seed)
        order = [e.signal_index for e in events]
        if order == expect_full[:len(order)] and len(order) > 0:
            matches += 1
        current = {j: extinction_threshold(p.signals[j], p, p.beta) for j in range(5)}
        for e in events:
            for j, thr in e.post_thresholds.items():
                contract_ok &= thr < current[j]
                current[j] = thr
    ok = matches >= 190 and contract_ok
    report("cascade ordering", ok, f"{matches}/200 ordered, contraction={contract_ok}")


def test_multiplier_anchors():
    """Closed form M = 1.300; simulated crash amplification 1.63 +- 0.15 at
    stress homogeneity and inside [1.25, 1.45] at the baseline one."""
    p = baseline_params(phi=0.7)
    lamp = p.market.lambda_prime
    m_cf = reflexive_multiplier(0.7, 0.5, 0.2, lamp)
    ok_cf = abs(m_cf - 1.300) <= 1e-3

    stress = [flash_crash(p, 0.035, 0.45, 0.85, seed, feedback_beta=0.2).m_hat
              for seed in range(100)]
    m_stress = float(np.mean(stress))
    ok_stress = abs(m_stress - 1.63) <= 0.15

    base = [flash_crash(p, 0.035, 0.60, 0.60, seed, feedback_beta=0.2).m_hat
            for seed in range(100)]
    m_base = float(np.mean(base))
    ok_base = 1.25 <= m_base <= 1.45
    report("multiplier anchors", ok_cf and ok_stress and ok_base,
           f"M={m_cf:.4f}, stress={m_stress:.3f}, baseline={m_base:.3f}")


def test_welfare_ordering():
    """Common random numbers, 21-point grid, 50 replications:
    phi_stab* < phi_social < phi_eff*, and the market equilibrium sits
    above the efficiency optimum."""
    p = baseline_params(phi=0.7)
    grid = np.linspace(0.0, 1.0, 21)
    curve = optimal_phis(p, grid, replications=50, weights=0.5, seed=11,
                         horizon=2000)
    eqs = find_equilibria(p)
    top = eqs.highest_stable().phi_star
    ordered = curve.phi_stab_star < curve.phi_social < curve.phi_eff_star
    overshoot = top > curve.phi_eff_star
    report("welfare ordering", ordered and overshoot,
           f"stab*={curve.phi_stab_star:.2f} social={curve.phi_social:.2f} "
           f"eff*={curve.phi_eff_star:.2f} market={top:.3f}")


def test_equilibrium_multiplicity(multi_equilibria_params):
    eqs = find_equilibria(multi_equilibria_params, grid_size=1000, tol=1e-10)
    pts = eqs.points
    ok_n = len(pts) == 3
    ok_pattern = [q.stable for q in pts] == [True, False, True]
    ok_resid = all(q.residual <= 1e-8 for q in pts)
    diag = red_queen_check(pts[-1], multi_equilibria_params)
    ok_rq = abs(diag["marginal_net_alpha"]) <= 1e-6
    report("equilibrium multiplicity", ok_n and ok_pattern and ok_resid and ok_rq,
           f"phis={[round(q.phi_star, 4) for q in pts]}, "
           f"marginal={diag['marginal_net_alpha']:.2e}")


def test_convergence_targets():
    panel = generate_synthetic_13f(200, 500, 48, seed=1)
    cs = convergence_series(panel)
    first = float(cs.aggregate[:4].mean())
    last = float(cs.aggregate[-4:].mean())
    ai_rise = float(cs.ai_ai[-4:].mean() / cs.ai_ai[:4].mean() - 1)
    non_rise = float(cs.nonai_nonai[-4:].mean() / cs.nonai_nonai[:4].mean() - 1)
    ok = (abs(first - 0.21) <= 0.02 and abs(last - 0.30) <= 0.02
          and abs(ai_rise - 0.58) <= 0.15 and abs(non_rise - 0.19) <= 0.15)
    report("convergence targets", ok,
           f"S_bar {first:.3f}->{last:.3f}, rises {ai_rise:.1%}/{non_rise:.1%}")


def test_dispersion_targets():
    p = baseline_params()
    rets, mask = generate_fund_panel(p, 120, 80, 144, seed=3)
    d_ai = return_dispersion(rets, 12, mask)
    d_h = return_dispersion(rets, 12, ~mask)
    ai_dec = float(1 - d_ai[-1] / d_ai[0])
    h_dec = float(1 - d_h[-1] / d_h[0])
    ratio = float(d_ai[-1] / d_h[-1])
    ok = (abs(ai_dec - 0.29) <= 0.05 and abs(h_dec - 0.10) <= 0.05
          and abs(ratio - 0.64) <= 0.08)
    report("dispersion targets", ok,
           f"AI {ai_dec:.1%}, human {h_dec:.1%}, ratio {ratio:.3f}")


def test_rho_estimator_recovery():
    """Rank correlation 1 between planted and estimated homogeneity for
    both estimators over 50 seeds; synchronicity near zero under
    independent trading."""
    rhos = (0.1, 0.3, 0.5, 0.7, 0.9)
    perfect = 0
    for seed in range(50):
        pcas, syncs = [], []
        for rho in rhos:
            panel = planted_change_panel(rho, 100, 300, 2, seed=seed)
            pcas.append(rho_pca(panel, "Q1"))
            syncs.append(rho_sync(panel, "Q1"))
        mono = (all(a < b for a, b in zip(pcas, pcas[1:]))
                and all(a < b for a, b in zip(syncs, syncs[1:])))
        perfect += mono
    null_vals = [rho_sync(planted_change_panel(0.0, 100, 300, 2, seed=s), "Q1")
                 for s in range(20)]
    se = float(np.std(null_vals, ddof=1))
    ok_null = all(abs(v) < 3 * max(se, 1e-4) for v in null_vals)
    report("rho estimator recovery", perfect == 50 and ok_null,
           f"{perfect}/50 rank-perfect, null |sync| max={max(abs(v) for v in null_vals):.5f}")


def test_determinism(tmp_path):
    """Byte-identical outputs for identical config and seed, at any thread
    count."""
    cfg = tmp_path / "c.toml"
    cfg.write_text(
        "[run]\nhorizon = 1200\nreplications = 10\n\n"
        "[game]\nwelfare_grid_points = 11\n\n"
        "[cascade]\nphi = 0.9\nepochs = 150\n"
    )
    outs = [tmp_path / f"o{i}" for i in range(3)]
    threads = ["1", "1", "4"]
    for out, th in zip(outs, threads):
        for cmd in ("halflife-sweep", "cascade", "welfare", "thirteenf"):
            if cmd == "thirteenf":
                extra = ["--config", str(tmp_path / "t.toml")]
                (tmp_path / "t.toml").write_text(
                    "[thirteenf]\nn_institutions = 60\nn_assets = 200\nquarters = 4\n"
                    "total_logit_var = 3.0\n")
            else:
                extra = ["--config", str(cfg)]
            res = subprocess.run(
                [sys.executable, "-m", "alphadecay.cli", cmd, *extra,
                 "--out", str(out), "--seed", "21", "--threads", th],
                capture_output=True, text=True)
            assert res.returncode == 0, res.stderr
    names = sorted(f.name for f in outs[0].iterdir())
    ok = True
    for other in outs[1:]:
        for name in names:
            ok &= filecmp.cmp(outs[0] / name, other / name, shallow=False)
    report("determinism", ok, f"{len(names)} files x {len(outs)} runs")
