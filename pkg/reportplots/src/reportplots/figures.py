"""The configured figure suite: which CSVs feed which panels.

Every plotted number exists verbatim in an input CSV; the renderer adds
only axes, labels, and the configured reference lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: tuple          # CSV filenames inside the bundle directory
    columns: dict          # filename -> required column names
    title: str
    xlabel: str
    ylabel: str
    reference_lines: tuple = ()   # (label, value) horizontal markers
    optional: bool = False


FIGURE_SUITE = (
    FigureSpec(
        figure_id="halflife_sweep",
        inputs=("halflife_sweep.csv",),
        columns={"halflife_sweep.csv": ("rho", "phi", "half_life_months")},
        title="Alpha half-life vs adoption",
        xlabel="adoption share",
        ylabel="half-life (months)",
        reference_lines=(("pre-AI (58m)", 58.0), ("current (18m)", 18.0)),
    ),
    FigureSpec(
        figure_id="dispersion_curve",
        inputs=("dispersion_curve.csv",),
        columns={"dispersion_curve.csv": ("phi", "dispersion")},
        title="Cross-sectional alpha dispersion vs adoption",
        xlabel="adoption share",
        ylabel="dispersion",
    ),
    FigureSpec(
        figure_id="cascade",
        inputs=("cascade_trace.csv",),
        columns={"cascade_trace.csv": ("epoch", "signal_index", "sigma_sq")},
        title="Signal extinction cascade",
        xlabel="retraining epoch",
        ylabel="innovation variance",
    ),
    FigureSpec(
        figure_id="multiplier_surface",
        inputs=("multiplier_surface.csv",),
        columns={"multiplier_surface.csv": ("phi", "rho", "multiplier")},
        title="Reflexive multiplier",
        xlabel="adoption share",
        ylabel="homogeneity",
    ),
    FigureSpec(
        figure_id="equilibrium",
        inputs=("best_response.csv", "equilibria.csv"),
        columns={"best_response.csv": ("phi", "best_response"),
                 "equilibria.csv": ("phi_star", "stable")},
        title="Adoption best response and equilibria",
        xlabel="adoption share",
        ylabel="best-response share",
    ),
    FigureSpec(
        figure_id="welfare",
        inputs=("welfare.csv",),
        columns={"welfare.csv": ("phi", "w_eff", "w_stab", "w_social")},
        title="Efficiency and stability welfare",
        xlabel="adoption share",
        ylabel="welfare",
    ),
    FigureSpec(
        figure_id="convergence",
        inputs=("convergence.csv",),
        columns={"convergence.csv": ("quarter", "s_bar", "s_ai_ai", "s_nonai_nonai")},
        title="Portfolio convergence",
        xlabel="quarter",
        ylabel="mean pairwise cosine similarity",
    ),
    FigureSpec(
        figure_id="fund_dispersion",
        inputs=("dispersion.csv",),
        columns={"dispersion.csv": ("month", "d_ai", "d_human")},
        title="Fund return dispersion",
        xlabel="month",
        ylabel="rolling cross-sectional dispersion",
    ),
    FigureSpec(
        figure_id="alpha_decay",
        inputs=("alpha_decay.csv",),
        columns={"alpha_decay.csv": ("month", "alpha_mapped")},
        title="Excess alpha of a newly crowded signal set",
        xlabel="month",
        ylabel="alpha",
    ),
    FigureSpec(
        figure_id="crash_amplification",
        inputs=("crash_scenarios.csv",),
        columns={"crash_scenarios.csv": ("replication", "m_hat")},
        title="Flash-crash amplification across replications",
        xlabel="replication",
        ylabel="observed / fundamental decline",
        reference_lines=(("band low", 1.25), ("band high", 1.45)),
    ),
    FigureSpec(
        figure_id="sensitivity",
        inputs=("sensitivity.csv",),
        columns={"sensitivity.csv": ("parameter", "value", "half_life_months")},
        title="Half-life sensitivity",
        xlabel="parameter value",
        ylabel="half-life (months)",
    ),
    FigureSpec(
        figure_id="rho_estimates",
        inputs=("rho_estimates.csv",),
        columns={"rho_estimates.csv": ("quarter", "rho_pca", "rho_sync")},
        title="Observable homogeneity estimates",
        xlabel="quarter",
        ylabel="estimated homogeneity",
        optional=True,
    ),
)
