"""Figure suite against a real report-data bundle produced by the
scenario runner's external interface."""

import csv
import filecmp
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from reportplots.figures import FIGURE_SUITE
from reportplots.render import ContractError, load_table, render_all, render_figure

BUNDLE_CONFIG = """
[run]
horizon = 1200
replications = 10

[game]
welfare_grid_points = 11

[cascade]
phi = 0.9
epochs = 200

[crash]
n_seeds = 5

[thirteenf]
n_institutions = 60
n_assets = 200
quarters = 6
total_logit_var = 3.0

[dispersion]
months = 48

[halflife_fit]
months = 30
n_seeds = 6
"""


@pytest.fixture(scope="session")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundle")
    cfg = root / "scenario.toml"
    cfg.write_text(BUNDLE_CONFIG)
    out = root / "data"
    res = subprocess.run(
        [sys.executable, "-m", "alphadecay.cli", "report-data",
         "--config", str(cfg), "--out", str(out), "--seed", "17"],
        capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return out


def test_all_figures_render(bundle, tmp_path):
    out = tmp_path / "figs"
    report = render_all(bundle, out)
    failed = {k: v for k, v in report.items() if v.startswith("failed")}
    assert not failed, failed
    for spec in FIGURE_SUITE:
        if report[spec.figure_id].startswith("ok"):
            assert (out / f"{spec.figure_id}.png").stat().st_size > 0


def test_idempotent_byte_identical(bundle, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    render_all(bundle, out1)
    render_all(bundle, out2)
    names = sorted(p.name for p in out1.iterdir())
    assert names == sorted(p.name for p in out2.iterdir())
    for name in names:
        assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name


def _csv_column(path, col):
    with open(path, newline="") as fh:
        return [float(r[col]) for r in csv.DictReader(fh)]


class TestPlottedValuesMatchSources:
    """Spot checks: the plotted series equal their CSV sources exactly."""

    def _line_data(self, spec_id, bundle):
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        spec = next(s for s in FIGURE_SUITE if s.figure_id == spec_id)
        before = set(map(id, plt.get_fignums()))
        # render to a scratch dir while capturing the figure's artists
        import reportplots.render as rr
        captured = {}
        orig = rr._finish

        def spy(fig, ax, sp, out_dir):
            captured["lines"] = [(ln.get_xdata(), ln.get_ydata()) for ln in ax.lines]
            return orig(fig, ax, sp, out_dir)

        rr._finish = spy
        try:
            render_figure(spec, bundle, bundle)
        finally:
            rr._finish = orig
        return captured["lines"]

    def test_welfare_series(self, bundle):
        lines = self._line_data("welfare", bundle)
        phis = _csv_column(bundle / "welfare.csv", "phi")
        w_eff = _csv_column(bundle / "welfare.csv", "w_eff")
        x, y = lines[0]
        assert np.array_equal(x[:5], phis[:5])
        assert np.array_equal(y[:5], w_eff[:5])

    def test_fund_dispersion_series(self, bundle):
        lines = self._line_data("fund_dispersion", bundle)
        months = _csv_column(bundle / "dispersion.csv", "month")
        d_ai = _csv_column(bundle / "dispersion.csv", "d_ai")
        x, y = lines[0]
        assert np.array_equal(x[:5], months[:5])
        assert np.array_equal(y[:5], d_ai[:5])

    def test_dispersion_curve_series(self, bundle):
        lines = self._line_data("dispersion_curve", bundle)
        phis = _csv_column(bundle / "dispersion_curve.csv", "phi")
        disp = _csv_column(bundle / "dispersion_curve.csv", "dispersion")
        x, y = lines[0]
        assert np.array_equal(x[:5], phis[:5])
        assert np.array_equal(y[:5], disp[:5])


class TestFailureModes:
    def test_missing_required_input_reported(self, bundle, tmp_path):
        partial = tmp_path / "partial"
        partial.mkdir()
        (partial / "welfare.csv").write_text(
            (bundle / "welfare.csv").read_text())
        report = render_all(partial, tmp_path / "figs")
        assert report["welfare"].startswith("ok")
        assert report["halflife_sweep"].startswith("failed")

    def test_optional_input_skipped_with_notice(self, bundle, tmp_path):
        partial = tmp_path / "partial2"
        partial.mkdir()
        for name in ("welfare.csv",):
            (partial / name).write_text((bundle / name).read_text())
        report = render_all(partial, tmp_path / "figs2")
        assert report["rho_estimates"].startswith("skipped")

    def test_contract_violation_detected(self, tmp_path):
        bad = tmp_path / "welfare.csv"
        bad.write_text("phi,wrong\n0.1,2\n")
        with pytest.raises(ContractError, match="lacks column"):
            load_table(bad, ("phi", "w_eff"))

    def test_cli_exit_codes(self, bundle, tmp_path):
        ok = subprocess.run(
            [sys.executable, "-m", "reportplots", "--in", str(bundle),
             "--out", str(tmp_path / "f1")], capture_output=True, text=True)
        assert ok.returncode == 0, ok.stderr
        empty = tmp_path / "empty"
        empty.mkdir()
        bad = subprocess.run(
            [sys.executable, "-m", "reportplots", "--in", str(empty),
             "--out", str(tmp_path / "f2")], capture_output=True, text=True)
        assert bad.returncode == 1
        assert "failed" in bad.stdout
