import numpy as np
import pytest

from panelplots.cli import main
from panelplots.data import SchemaError, read_panel
from panelplots.figures import (
    FIGURE_KINDS,
    PlotRequest,
    reliability_stats,
    render,
)


class TestPlotRequest:
    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            PlotRequest(panel_path="x.csv", kind="heatmap", out_path="o.png")


class TestRenderers:
    def test_each_kind_renders_an_image(self, tiny_run, tmp_path):
        sources = {"reliability": "calibration.csv", "drift": "drift.csv"}
        for kind in FIGURE_KINDS:
            src = tiny_run / sources.get(kind, "panel.csv")
            out = tmp_path / f"{kind}.png"
            stats = render(PlotRequest(panel_path=str(src), kind=kind,
                                       out_path=str(out)))
            assert out.exists() and out.stat().st_size > 0
            assert stats is not None

    def test_repeated_renders_identical_stats(self, tiny_run, tmp_path):
        req = PlotRequest(panel_path=str(tiny_run / "panel.csv"),
                          kind="turnover_hist",
                          out_path=str(tmp_path / "t.png"))
        s1 = render(req)
        s2 = render(req)
        for method in s1:
            assert np.array_equal(s1[method]["counts"], s2[method]["counts"])

    def test_rendering_is_read_only(self, tiny_run, tmp_path):
        panel = tiny_run / "panel.csv"
        before = panel.read_bytes()
        render(PlotRequest(panel_path=str(panel), kind="wealth",
                           out_path=str(tmp_path / "w.png")))
        assert panel.read_bytes() == before

    def test_missing_column_raises_named_error(self, tmp_path):
        bad = tmp_path / "panel.csv"
        bad.write_text("timestamp,method\n0,m\n")
        with pytest.raises(SchemaError, match="turnover"):
            render(PlotRequest(panel_path=str(bad), kind="turnover_hist",
                               out_path=str(tmp_path / "x.png")))

    def test_reliability_bins_on_calibrated_sample(self, tiny_run, tmp_path):
        stats = render(PlotRequest(
            panel_path=str(tiny_run / "calibration.csv"),
            kind="reliability", out_path=str(tmp_path / "r.png")))
        curve = stats["uwc"]
        gaps = np.abs(curve["bin_freq"] - curve["bin_prob"])
        assert np.all(gaps < 0.12)  # 200 samples per bin

    def test_drift_flat_series_inside_thresholds(self, tmp_path):
        drift = tmp_path / "drift.csv"
        drift.write_text("timestamp,z\n" + "\n".join(
            f"{t},0.0" for t in range(100)))
        stats = render(PlotRequest(panel_path=str(drift), kind="drift",
                                   out_path=str(tmp_path / "d.png")))
        assert stats["max_abs_z"] == 0.0


class TestReliabilityStats:
    def test_ten_equal_width_bins(self):
        prob = np.linspace(0.01, 0.99, 1000)
        outcome = (prob > 0.5).astype(int)
        centers, freqs, counts = reliability_stats(prob, outcome)
        assert len(centers) == 10
        assert counts.sum() == 1000

    def test_perfectly_calibrated_on_diagonal(self):
        rng = np.random.default_rng(5)
        prob = rng.uniform(0.05, 0.95, 50_000)
        outcome = (rng.uniform(size=50_000) < prob).astype(int)
        centers, freqs, _ = reliability_stats(prob, outcome)
        assert np.max(np.abs(freqs - centers)) < 0.02


class TestCli:
    def test_renders_all_available_kinds(self, tiny_run, tmp_path, capsys):
        out = tmp_path / "figs"
        rc = main(["--run", str(tiny_run), "--out", str(out)])
        assert rc == 0
        made = {p.name for p in out.glob("*.png")}
        assert made == {f"{k}.png" for k in FIGURE_KINDS}

    def test_single_kind(self, tiny_run, tmp_path):
        out = tmp_path / "figs"
        rc = main(["--run", str(tiny_run), "--out", str(out),
                   "--kind", "binding_bars"])
        assert rc == 0
        assert (out / "binding_bars.png").exists()

    def test_missing_input_is_an_error_for_explicit_kind(self, tmp_path):
        rc = main(["--run", str(tmp_path), "--out", str(tmp_path / "f"),
                   "--kind", "drift"])
        assert rc == 1


def test_panel_reader_roundtrip(tiny_run):
    panel = read_panel(tiny_run / "panel.csv")
    assert panel.methods == ["uncalibrated", "uwc"]
    ts, loss, net, turnover, bound, kappa = panel.for_method("uwc")
    assert len(ts) == 400
    assert np.all(turnover >= 0)
