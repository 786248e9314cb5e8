"""Decision-sensitivity weights for calibration diagnostics.

Each diagnostic level u gets a weight equal to the absolute first-order
impact of the u-indexed calibration moment error on the friction-adjusted
objective, scaled by the friction-regime multiplier:

    omega(u) = | w' a(u) - (gamma/2) <w w', B(u)> | * kappa(u).

The influence coefficients (a, B) map a unit of probability mass
reallocated away from the u-quantile state into first-order (mean,
variance) responses.  On the quantile grid this is exact: removing mass
eps * w_gap(u) at the u-quantile (renormalising the rest) changes the
mean by -eps * w_gap(u) * (q(u) - mean) and the variance by
-eps * w_gap(u) * ((q(u) - mean)^2 - var), the classic influence
functions scaled by the trapezoidal cell width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import (
    PredictiveDistribution,
    quantile_eval_many,
    trapezoid_weights,
)

DEFAULT_GRID_POINTS = (0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95)


@dataclass(frozen=True)
class DiagnosticGrid:
    """Finite set of diagnostic coordinates (quantile levels by default)."""

    kind: str = "quantile_levels"  # quantile_levels | thresholds | pit_bins
    points: tuple = DEFAULT_GRID_POINTS

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if self.kind not in ("quantile_levels", "thresholds", "pit_bins"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("grid points must be strictly increasing")
        if self.kind in ("quantile_levels", "pit_bins") and (
                pts[0] <= 0.0 or pts[-1] >= 1.0):
            raise ValueError("quantile levels must lie strictly inside (0, 1)")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points)


def default_grid() -> DiagnosticGrid:
    return DiagnosticGrid()


@dataclass(frozen=True)
class WeightSpec:
    """Per-level influence coefficients and the resulting weights."""

    a_coeff: np.ndarray
    b_coeff: np.ndarray
    kappa_u: np.ndarray
    weights: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be non-negative and finite")


def level_cell_widths(dist: PredictiveDistribution,
                      grid: DiagnosticGrid) -> np.ndarray:
    """Trapezoidal weight of each diagnostic level on the distribution grid."""
    u = grid.array
    gaps = trapezoid_weights(dist.levels)
    # each diagnostic level inherits the cell width of the nearest grid level
    idx = np.clip(np.searchsorted(dist.levels, u), 0, len(dist.levels) - 1)
    left = np.maximum(idx - 1, 0)
    pick_left = np.abs(dist.levels[left] - u) <= np.abs(dist.levels[idx] - u)
    return np.where(pick_left, gaps[left], gaps[idx])


def influence_coeffs(dist: PredictiveDistribution,
                     grid: DiagnosticGrid) -> tuple[np.ndarray, np.ndarray, bool]:
    """First-order (mean, variance) responses per diagnostic level.

    Returns ``(a, B, degenerate)`` with a(u) = -(q(u) - mean) * w_gap(u)
    and B(u) = -((q(u) - mean)^2 - var) * w_gap(u).  For a degenerate
    distribution (sd == 0) both are zero and the flag is set.
    """
    if grid.kind != "quantile_levels":
        raise ValueError("influence coefficients require a quantile-level grid")
    mean, sd = dist.mean, dist.sd
    w_gap = level_cell_widths(dist, grid)
    if sd == 0.0:
        zeros = np.zeros(len(grid.points))
        return zeros, zeros.copy(), True
    q = quantile_eval_many(dist, grid.array)
    centred = q - mean
    a = -centred * w_gap
    b = -(centred * centred - sd * sd) * w_gap
    return a, b, False


def compute_weights(w_star: np.ndarray | float, gamma: float,
                    a: np.ndarray, b: np.ndarray,
                    kappa_u: np.ndarray | float) -> WeightSpec:
    """Canonical quadratic-case utility weights.

    ``w_star`` is the prior period's solved position (scalar in the
    single-asset case), so the weights are measurable at fit time.
    """
    w = float(np.atleast_1d(np.asarray(w_star, dtype=float))[0]) \
        if np.ndim(w_star) else float(w_star)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    kap = np.broadcast_to(np.asarray(kappa_u, dtype=float), a.shape)
    if np.any(kap < 0):
        raise ValueError("kappa multipliers must be >= 0")
    sensitivity = np.abs(w * a - 0.5 * gamma * (w * w) * b)
    omega = sensitivity * kap
    return WeightSpec(a_coeff=a, b_coeff=b, kappa_u=np.asarray(kap),
                      weights=omega)


def kappa_multiplier(kappa_t: float, grid: DiagnosticGrid,
                     tail_boost: bool = False) -> np.ndarray:
    """Per-level friction multiplier; optionally doubled in the tails."""
    u = grid.array
    kap = np.full(len(u), kappa_t, dtype=float)
    if tail_boost:
        kap[(u <= 0.1) | (u >= 0.9)] *= 2.0
    return kap
