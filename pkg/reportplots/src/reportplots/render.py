"""Render the figure suite from a report-data bundle.

Reads only the documented CSV contracts, plots the numbers verbatim, and
writes one PNG per figure. Reruns on unchanged inputs produce identical
bytes. Missing or contract-violating inputs yield a per-figure failure
report and a nonzero exit; optional datasets are skipped with a notice.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .figures import FIGURE_SUITE, FigureSpec  # noqa: E402

_AI_COLOR = "#1f6fb4"
_HUMAN_COLOR = "#7f7f7f"


class ContractError(ValueError):
    """Input file missing or not matching its documented columns."""


def load_table(path: Path, required: tuple) -> dict:
    if not path.exists():
        raise ContractError(f"missing input: {path.name}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in required if c not in cols]
        if missing:
            raise ContractError(
                f"{path.name} lacks column(s) {', '.join(missing)}"
            )
        rows = list(reader)
    if not rows:
        raise ContractError(f"{path.name} has no data rows")
    out: dict = {}
    for c in cols:
        vals = [r[c] for r in rows]
        try:
            out[c] = np.array([float(v) for v in vals])
        except ValueError:
            out[c] = np.array(vals)
    return out


def _new_figure():
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=120)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _finish(fig, ax, spec: FigureSpec, out_dir: Path) -> Path:
    ax.set_title(spec.title)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    for label, value in spec.reference_lines:
        ax.axhline(value, ls="--", lw=1.0, color="#444444")
        ax.annotate(label, xy=(0.99, value), xycoords=("axes fraction", "data"),
                    ha="right", va="bottom", fontsize=8, color="#444444")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    target = out_dir / f"{spec.figure_id}.png"
    fig.savefig(target, metadata={"Software": "reportplots"})
    plt.close(fig)
    return target


def render_figure(spec: FigureSpec, in_dir: Path, out_dir: Path) -> Path:
    """Render one configured figure; returns the written path."""
    tables = {name: load_table(in_dir / name, spec.columns[name])
              for name in spec.inputs}
    fig, ax = _new_figure()

    if spec.figure_id == "halflife_sweep":
        t = tables["halflife_sweep.csv"]
        for rho in sorted(set(t["rho"])):
            m = t["rho"] == rho
            ax.plot(t["phi"][m], t["half_life_months"][m], label=f"rho={rho:g}")
    elif spec.figure_id == "dispersion_curve":
        t = tables["dispersion_curve.csv"]
        ax.plot(t["phi"], t["dispersion"], color=_AI_COLOR)
    elif spec.figure_id == "cascade":
        t = tables["cascade_trace.csv"]
        for j in sorted(set(int(x) for x in t["signal_index"])):
            m = t["signal_index"] == j
            ax.plot(t["epoch"][m], t["sigma_sq"][m], label=f"signal {j}")
        ax.set_yscale("log")
    elif spec.figure_id == "multiplier_surface":
        t = tables["multiplier_surface.csv"]
        phis = np.unique(t["phi"])
        rhos = np.unique(t["rho"])
        grid = np.full((len(rhos), len(phis)), np.nan)
        pi = {v: i for i, v in enumerate(phis)}
        ri = {v: i for i, v in enumerate(rhos)}
        for p, r, m in zip(t["phi"], t["rho"], t["multiplier"]):
            grid[ri[r], pi[p]] = m if np.isfinite(m) else np.nan
        im = ax.pcolormesh(phis, rhos, grid, shading="nearest", cmap="magma")
        fig.colorbar(im, ax=ax, label="multiplier")
    elif spec.figure_id == "equilibrium":
        br = tables["best_response.csv"]
        eq = tables["equilibria.csv"]
        ax.plot(br["phi"], br["best_response"], color=_AI_COLOR, label="best response")
        ax.plot([0, 1], [0, 1], color="#999999", lw=1.0, label="45-degree")
        stable = eq["stable"] == 1
        ax.scatter(eq["phi_star"][stable], eq["phi_star"][stable], marker="o",
                   color="#107a2f", zorder=5, label="stable")
        if np.any(~stable):
            ax.scatter(eq["phi_star"][~stable], eq["phi_star"][~stable], marker="x",
                       color="#b02318", zorder=5, label="tipping")
    elif spec.figure_id == "welfare":
        t = tables["welfare.csv"]
        ax.plot(t["phi"], t["w_eff"], color=_AI_COLOR, label="price discovery")
        ax.plot(t["phi"], t["w_stab"], color="#b02318", label="stability")
        ax.plot(t["phi"], t["w_social"], color="#107a2f", ls=":", label="social blend")
    elif spec.figure_id == "convergence":
        t = tables["convergence.csv"]
        x = np.arange(len(t["quarter"]))
        ax.plot(x, t["s_ai_ai"], color=_AI_COLOR, label="AI pairs")
        ax.plot(x, t["s_nonai_nonai"], color=_HUMAN_COLOR, label="non-AI pairs")
        ax.plot(x, t["s_bar"], color="#107a2f", ls=":", label="aggregate")
    elif spec.figure_id == "fund_dispersion":
        t = tables["dispersion.csv"]
        ax.plot(t["month"], t["d_ai"], color=_AI_COLOR, label="AI funds")
        ax.plot(t["month"], t["d_human"], color=_HUMAN_COLOR, label="human funds")
    elif spec.figure_id == "alpha_decay":
        t = tables["alpha_decay.csv"]
        ax.plot(t["month"], t["alpha_mapped"], color=_AI_COLOR)
    elif spec.figure_id == "crash_amplification":
        t = tables["crash_scenarios.csv"]
        ax.scatter(t["replication"], t["m_hat"], s=12, color=_AI_COLOR)
    elif spec.figure_id == "sensitivity":
        t = tables["sensitivity.csv"]
        plt.close(fig)
        params = sorted(set(t["parameter"]))
        fig, axes = plt.subplots(1, len(params), figsize=(3.2 * len(params), 3.4),
                                 dpi=120)
        for ax_p, name in zip(np.atleast_1d(axes), params):
            m = t["parameter"] == name
            ax_p.plot(t["value"][m], t["half_life_months"][m], color=_AI_COLOR)
            ax_p.set_title(str(name), fontsize=9)
            ax_p.set_xlabel(spec.xlabel, fontsize=8)
            ax_p.grid(True, alpha=0.3)
        np.atleast_1d(axes)[0].set_ylabel(spec.ylabel, fontsize=8)
        fig.suptitle(spec.title)
        fig.tight_layout()
        target = out_dir / f"{spec.figure_id}.png"
        fig.savefig(target, metadata={"Software": "reportplots"})
        plt.close(fig)
        return target
    elif spec.figure_id == "rho_estimates":
        t = tables["rho_estimates.csv"]
        x = np.arange(len(t["quarter"]))
        ax.plot(x, t["rho_pca"], color=_AI_COLOR, label="common-factor share")
        ax.plot(x, t["rho_sync"], color="#b02318", label="trade synchronicity")
    else:  # pragma: no cover - suite and renderer kept in lockstep
        raise ContractError(f"no renderer for figure {spec.figure_id}")

    return _finish(fig, ax, spec, out_dir)


def render_all(in_dir: Path, out_dir: Path) -> dict:
    """Render the whole suite; returns {figure_id: status}."""
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {}
    for spec in FIGURE_SUITE:
        try:
            target = render_figure(spec, in_dir, out_dir)
            report[spec.figure_id] = f"ok: {target.name}"
        except ContractError as e:
            if spec.optional:
                report[spec.figure_id] = f"skipped: {e}"
            else:
                report[spec.figure_id] = f"failed: {e}"
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="reportplots",
                                 description="Render figures from a report-data bundle")
    ap.add_argument("--in", dest="in_dir", required=True, help="bundle directory")
    ap.add_argument("--out", dest="out_dir", required=True, help="image directory")
    args = ap.parse_args(argv)
    report = render_all(Path(args.in_dir), Path(args.out_dir))
    failed = 0
    for fig_id, status in report.items():
        print(f"{fig_id}: {status}")
        if status.startswith("failed"):
            failed += 1
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
