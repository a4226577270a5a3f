"""Scenario configuration: a strict TOML schema covering the model, the
market environment, the signal roster, the game, and per-command run
controls. Unknown keys are errors, not warnings, so parameter-name typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .params import (
    CostDistribution,
    CostKind,
    LambdaRegime,
    MarketParams,
    ModelParams,
    ParamError,
    SignalSpec,
    baseline_params,
)


class ConfigError(ValueError):
    """Invalid scenario configuration."""


_MODEL_KEYS = {
    "n_institutions", "k_signals", "phi", "kappa", "i_max", "gamma",
    "d_bench", "tau_risk", "alpha_h0", "beta", "feedback_beta",
}
_MARKET_KEYS = {
    "sigma_v", "sigma_u", "sigma_eta", "sigma_nu", "sigma_h", "sigma_eps",
    "lambda_regime", "lambda0", "lambda_slope", "lambda_prime",
    "ticks_per_month", "mm_span",
}
_SIGNAL_KEYS = {"theta", "sigma0_sq", "rho", "a", "g", "beta_cf"}
_GAME_KEYS = {"cost_kind", "cost_params", "grid_size", "tol",
              "welfare_grid_points", "weights"}
_RUN_KEYS = {"seed", "horizon", "replications", "threads", "out_dir"}
_CRASH_KEYS = {"shock", "calm_rho", "stress_rho", "feedback_beta",
               "pre_ticks", "stress_bars", "post_ticks", "n_seeds"}
_SWEEP_KEYS = {"rhos", "grid_points"}
_CASCADE_KEYS = {"phi", "epochs", "n_seeds"}
_THIRTEENF_KEYS = {"n_institutions", "n_assets", "quarters", "ai_share",
                   "s_start", "ai_end", "nonai_end", "breaks",
                   "total_logit_var"}
_DISPERSION_KEYS = {"n_ai", "n_human", "months", "window", "ai_start",
                    "human_start", "phi_start", "phi_end", "rho_start",
                    "rho_end", "human_spillover"}
_UNITS_KEYS = {"alpha_scale", "alpha_offset"}
_HALFLIFE_KEYS = {"months", "n_seeds"}
_SECTIONS = {
    "model": _MODEL_KEYS, "market": _MARKET_KEYS, "signals": _SIGNAL_KEYS,
    "game": _GAME_KEYS, "run": _RUN_KEYS, "crash": _CRASH_KEYS,
    "halflife_sweep": _SWEEP_KEYS, "cascade": _CASCADE_KEYS,
    "thirteenf": _THIRTEENF_KEYS, "dispersion": _DISPERSION_KEYS,
    "units": _UNITS_KEYS, "halflife_fit": _HALFLIFE_KEYS,
}


@dataclass
class ScenarioConfig:
    """Validated scenario: model parameters plus run controls."""

    params: ModelParams
    seed: int = 12345
    horizon: int = 2000
    replications: int = 50
    threads: int = 1
    out_dir: str = "out"
    weights: float = 0.5
    welfare_grid_points: int = 21
    grid_size: int = 1000
    tol: float = 1e-10
    crash: dict = field(default_factory=lambda: {
        "shock": 0.035, "calm_rho": 0.45, "stress_rho": 0.85,
        "feedback_beta": 0.2, "pre_ticks": 252, "stress_bars": 60,
        "post_ticks": 63, "n_seeds": 100,
    })
    halflife_sweep: dict = field(default_factory=lambda: {
        "rhos": [0.0, 0.2, 0.4, 0.6, 0.8], "grid_points": 101,
    })
    cascade: dict = field(default_factory=lambda: {
        "phi": 0.9, "epochs": 400, "n_seeds": 1,
    })
    thirteenf: dict = field(default_factory=lambda: {
        "n_institutions": 200, "n_assets": 500, "quarters": 48,
        "ai_share": 0.7, "s_start": 0.21, "ai_end": 0.3318,
        "nonai_end": 0.25, "breaks": [21, 30, 40], "total_logit_var": 2.0,
    })
    dispersion: dict = field(default_factory=lambda: {
        "n_ai": 120, "n_human": 80, "months": 144, "window": 12,
        "ai_start": 0.041, "human_start": 0.050, "phi_start": 0.45,
        "phi_end": 0.62, "rho_start": 0.50, "rho_end": 0.58,
        "human_spillover": 0.187,
    })
    halflife_fit: dict = field(default_factory=lambda: {
        "months": 48, "n_seeds": 40,
    })
    units: dict = field(default_factory=lambda: {
        "alpha_scale": 1.0, "alpha_offset": 0.0,
    })

    def snapshot(self) -> dict:
        from dataclasses import asdict
        snap = asdict(self)
        snap["params_digest"] = self.params.digest()
        snap["params"] = _params_to_dict(self.params)
        return snap


def _params_to_dict(p: ModelParams) -> dict:
    return {
        "n_institutions": p.n_institutions, "k_signals": p.k_signals,
        "phi": p.phi, "kappa": p.kappa, "i_max": p.i_max, "gamma": p.gamma,
        "d_bench": p.d_bench, "tau_risk": p.tau_risk, "alpha_h0": p.alpha_h0,
        "beta": p.beta, "feedback_beta": p.feedback_beta,
        "signals": [{k: getattr(s, k) for k in _SIGNAL_KEYS} for s in p.signals],
        "market": {k: (getattr(p.market, k).value
                       if k == "lambda_regime" else getattr(p.market, k))
                   for k in _MARKET_KEYS},
        "cost_dist": {"kind": p.cost_dist.kind.value, "params": list(p.cost_dist.params)},
    }


def _check_keys(section: str, data: dict) -> None:
    allowed = _SECTIONS[section]
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )


def load_config(path: Optional[str] = None, *, overrides: Optional[dict] = None) -> ScenarioConfig:
    """Load and validate a scenario config; no path means the built-in
    baseline calibration. CLI flags arrive through `overrides`."""
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(p, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"invalid TOML in {path}: {e}") from e

    unknown_sections = set(raw) - set(_SECTIONS)
    if unknown_sections:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown_sections))}")
    for section, data in raw.items():
        if section == "signals":
            if not isinstance(data, list):
                raise ConfigError("[signals] must be an array of tables")
            for entry in data:
                _check_keys("signals", entry)
        else:
            _check_keys(section, data)

    model = dict(raw.get("model", {}))
    market_raw = dict(raw.get("market", {}))
    game = dict(raw.get("game", {}))
    run = dict(raw.get("run", {}))

    try:
        if "lambda_regime" in market_raw:
            market_raw["lambda_regime"] = LambdaRegime(market_raw["lambda_regime"])
        market = MarketParams(**market_raw)

        if "signals" in raw:
            signals = tuple(SignalSpec(**entry) for entry in raw["signals"])
            model.setdefault("k_signals", len(signals))
        else:
            signals = None

        cost = CostDistribution(
            kind=CostKind(game.pop("cost_kind", "lognormal")),
            params=tuple(game.pop("cost_params", (math.log(0.2), 0.55))),
        )

        if signals is None:
            params = baseline_params(
                phi=model.pop("phi", 0.7),
                k_signals=model.pop("k_signals", 5),
                market=market, cost_dist=cost, **model,
            )
        else:
            params = ModelParams(signals=signals, market=market,
                                 cost_dist=cost, **model)
    except (ParamError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e

    cfg = ScenarioConfig(params=params)
    for key in ("grid_size", "tol", "weights", "welfare_grid_points"):
        if key in game:
            setattr(cfg, key, game[key])
    for key in _RUN_KEYS:
        if key in run:
            setattr(cfg, key, run[key])
    for section in ("crash", "halflife_sweep", "cascade", "thirteenf",
                    "dispersion", "units", "halflife_fit"):
        if section in raw:
            getattr(cfg, section).update(raw[section])
    if overrides:
        for key, val in overrides.items():
            if val is not None:
                setattr(cfg, key, val)
    if cfg.replications < 1 or cfg.horizon < 1 or cfg.threads < 1:
        raise ConfigError("run controls must be positive")
    return cfg
