"""The six figure kinds rendered from run artifacts.

Every renderer returns the plotted statistics (bin positions, heights,
curves) so tests can assert on numbers rather than pixels; rendering is
read-only and repeated renders of the same inputs produce identical
statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import read_calibration, read_drift, read_panel

FIGURE_KINDS = ("reliability", "wealth", "turnover_hist", "binding_bars",
                "drift", "kappa_scatter")

N_RELIABILITY_BINS = 10


@dataclass(frozen=True)
class PlotRequest:
    """One figure: input CSV path, figure kind, output image path."""

    panel_path: str
    kind: str
    out_path: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of "
                f"{', '.join(FIGURE_KINDS)}")


def reliability_stats(prob, outcome, n_bins: int = N_RELIABILITY_BINS):
    """Equal-width probability bins: (bin prob mean, empirical frequency, n)."""
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(prob, edges) - 1, 0, n_bins - 1)
    centers, freqs, counts = [], [], []
    for b in range(n_bins):
        mask = idx == b
        if not np.any(mask):
            continue
        centers.append(float(prob[mask].mean()))
        freqs.append(float(outcome[mask].mean()))
        counts.append(int(mask.sum()))
    return np.array(centers), np.array(freqs), np.array(counts)


def _render_reliability(request):
    cal = read_calibration(request.panel_path)
    fig, ax = plt.subplots(figsize=(6, 6))
    stats = {}
    for method in dict.fromkeys(cal.method):
        mask = cal.method == method
        centers, freqs, counts = reliability_stats(cal.prob_up[mask],
                                                   cal.outcome_up[mask])
        stats[method] = {"bin_prob": centers, "bin_freq": freqs,
                         "bin_count": counts}
        ax.plot(centers, freqs, marker="o", label=method)
    ax.plot([0, 1], [0, 1], "k--", linewidth=1, label="ideal")
    ax.set_xlabel("forecast probability of a positive return")
    ax.set_ylabel("empirical frequency")
    ax.set_title("Reliability diagram")
    ax.legend()
    return fig, stats


def _render_wealth(request):
    panel = read_panel(request.panel_path)
    fig, ax = plt.subplots(figsize=(8, 5))
    stats = {}
    for method in panel.methods:
        ts, _, net, _, _, _ = panel.for_method(method)
        wealth = 1.0 + np.cumsum(net)
        stats[method] = {"timestamp": ts, "wealth": wealth}
        ax.plot(ts, wealth, label=method)
    ax.set_xlabel("decision timestamp")
    ax.set_ylabel("cumulative wealth (net of frictions)")
    ax.set_title("Cumulative wealth")
    ax.legend()
    return fig, stats


def _render_turnover_hist(request):
    panel = read_panel(request.panel_path)
    methods = panel.methods
    hi = max(float(panel.turnover.max()), 1e-12)
    edges = np.linspace(0.0, hi, 31)
    fig, axes = plt.subplots(1, len(methods), figsize=(4 * len(methods), 4),
                             sharey=True, squeeze=False)
    stats = {}
    for ax, method in zip(axes[0], methods):
        _, _, _, turnover, _, _ = panel.for_method(method)
        counts, _ = np.histogram(turnover, bins=edges)
        stats[method] = {"edges": edges, "counts": counts}
        ax.hist(turnover, bins=edges)
        ax.set_title(method)
        ax.set_xlabel("per-period turnover")
    axes[0][0].set_ylabel("periods")
    fig.suptitle("Turnover distribution by method")
    return fig, stats


def _render_binding_bars(request):
    panel = read_panel(request.panel_path)
    methods = panel.methods
    freqs = []
    for method in methods:
        _, _, _, _, bound, _ = panel.for_method(method)
        freqs.append(float(bound.mean()))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(methods, freqs)
    ax.set_ylabel("share of periods with a binding constraint")
    ax.set_title("Constraint-binding frequency")
    stats = dict(zip(methods, freqs))
    return fig, stats


def _render_drift(request):
    ts, z = read_drift(request.panel_path)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(ts, z, linewidth=0.8)
    ax.axhline(2.0, color="r", linestyle="--", label="+2 threshold")
    ax.axhline(-2.0, color="r", linestyle="--", label="-2 threshold")
    ax.set_xlabel("decision timestamp")
    ax.set_ylabel("rolling standardised loss differential")
    ax.set_title("Drift monitor")
    ax.legend()
    finite = z[np.isfinite(z)]
    stats = {"n": len(ts), "n_defined": int(np.isfinite(z).sum()),
             "max_abs_z": float(np.max(np.abs(finite))) if len(finite) else np.nan}
    return fig, stats


def _render_kappa_scatter(request):
    panel = read_panel(request.panel_path)
    methods = panel.methods
    if len(methods) < 2:
        raise ValueError("kappa scatter needs at least two methods "
                         "(a candidate and a reference)")
    reference, candidate = methods[0], methods[-1]
    ts_r, loss_r, _, _, _, kappa = panel.for_method(reference)
    _, loss_c, _, _, _, _ = panel.for_method(candidate)
    diff = loss_r - loss_c  # positive: candidate beats the reference
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(kappa, diff, s=4, alpha=0.3)
    # tercile means overlay; collapses to one point when kappa is constant
    lo, hi = np.quantile(kappa, [1 / 3, 2 / 3])
    masks = [m for m in (kappa <= lo, (kappa > lo) & (kappa <= hi), kappa > hi)
             if np.any(m)]
    centers = [kappa[m].mean() for m in masks]
    means = [diff[m].mean() for m in masks]
    ax.plot(centers, means, "ro-", label="tercile means")
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xlabel("friction state (kappa)")
    ax.set_ylabel(f"loss differential ({reference} minus {candidate})")
    ax.set_title("Loss differential by friction state")
    ax.legend()
    stats = {"tercile_centers": np.array(centers),
             "tercile_means": np.array(means),
             "reference": reference, "candidate": candidate}
    return fig, stats


_RENDERERS = {
    "reliability": _render_reliability,
    "wealth": _render_wealth,
    "turnover_hist": _render_turnover_hist,
    "binding_bars": _render_binding_bars,
    "drift": _render_drift,
    "kappa_scatter": _render_kappa_scatter,
}


def render(request: PlotRequest):
    """Render one figure to the requested path; returns the plotted stats."""
    fig, stats = _RENDERERS[request.kind](request)
    try:
        fig.savefig(request.out_path, dpi=110)
    finally:
        plt.close(fig)
    return stats
