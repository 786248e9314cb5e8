"""Quantile-grid predictive distributions and market observations.

A predictive distribution is stored as a monotone quantile function on a
fixed probability grid.  All calibration maps downstream act on CDF or
quantile objects, so a grid representation keeps warps closed under
composition.  Interpolation is piecewise-linear everywhere; beyond the
grid endpoints the quantile function is extended flat (no tail mass is
invented that the forecaster never emitted).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_N_LEVELS = 99


def standard_levels(n: int = DEFAULT_N_LEVELS) -> np.ndarray:
    """Equally spaced probability grid {1/(n+1), ..., n/(n+1)}.

    For the default n=99 this is {0.01, 0.02, ..., 0.99}.
    """
    return np.arange(1, n + 1) / (n + 1.0)


@dataclass(frozen=True)
class PredictiveDistribution:
    """Quantile-grid representation of a one-period predictive law.

    Parameters
    ----------
    levels : array
        Strictly increasing probabilities in the open interval (0, 1),
        at least 3 of them.
    values : array
        Quantile values at each level (per-period simple return units),
        non-decreasing.
    """

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)
        if levels.ndim != 1 or values.shape != levels.shape:
            raise ValueError("levels and values must be 1-d arrays of equal length")
        if len(levels) < 3:
            raise ValueError("need at least 3 quantile levels")
        if levels[0] <= 0.0 or levels[-1] >= 1.0:
            raise ValueError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise ValueError("quantile values must be non-decreasing")
        if not (np.all(np.isfinite(levels)) and np.all(np.isfinite(values))):
            raise ValueError("levels and values must be finite")

    @cached_property
    def _moments(self) -> tuple[float, float]:
        return _grid_moments(self.levels, self.values)

    @property
    def mean(self) -> float:
        return self._moments[0]

    @property
    def sd(self) -> float:
        return self._moments[1]


def trapezoid_weights(levels: np.ndarray) -> np.ndarray:
    """Integration weight of each grid level for moment functionals.

    The quantile function is extended flat to probabilities 0 and 1, so
    integral(f(q(p)) dp) = sum_j w_j f(values_j) for piecewise-linear f
    interpolation.  Weights are positive and sum to 1.
    """
    levels = np.asarray(levels, dtype=float)
    w = np.empty_like(levels)
    if len(levels) == 1:
        return np.array([1.0])
    w[0] = levels[0] + 0.5 * (levels[1] - levels[0])
    w[-1] = (1.0 - levels[-1]) + 0.5 * (levels[-1] - levels[-2])
    if len(levels) > 2:
        w[1:-1] = 0.5 * (levels[2:] - levels[:-2])
    return w


def _grid_moments(levels: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    w = trapezoid_weights(levels)
    mean = float(w @ values)
    second = float(w @ (values * values))
    var = max(second - mean * mean, 0.0)
    return mean, float(np.sqrt(var))


def cdf_eval(dist: PredictiveDistribution, y: float) -> float:
    """CDF implied by the quantile grid, evaluated at return value ``y``.

    Linear interpolation between grid points; outside the grid range the
    probability clamps to the first/last level (flat extrapolation).  At
    a repeated quantile value the highest matching level is returned
    (right-continuous convention).
    """
    v = dist.values
    lv = dist.levels
    if y <= v[0]:
        return float(lv[0])
    if y >= v[-1]:
        return float(lv[-1])
    i = int(np.searchsorted(v, y, side="right")) - 1
    if v[i] == y:
        return float(lv[i])
    t = (y - v[i]) / (v[i + 1] - v[i])
    return float(lv[i] + t * (lv[i + 1] - lv[i]))


def quantile_eval(dist: PredictiveDistribution, alpha: float) -> float:
    """Pseudo-inverse of :func:`cdf_eval` at probability ``alpha`` in (0, 1).

    Levels outside the grid clamp to the endpoint quantile values.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    lv = dist.levels
    v = dist.values
    if alpha <= lv[0]:
        return float(v[0])
    if alpha >= lv[-1]:
        return float(v[-1])
    i = int(np.searchsorted(lv, alpha, side="right")) - 1
    if lv[i] == alpha:
        return float(v[i])
    t = (alpha - lv[i]) / (lv[i + 1] - lv[i])
    return float(v[i] + t * (v[i + 1] - v[i]))


def quantile_eval_many(dist: PredictiveDistribution, alphas: np.ndarray) -> np.ndarray:
    """Vectorised quantile evaluation with endpoint clamping."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
        raise ValueError("all alphas must be in (0, 1)")
    return np.interp(alphas, dist.levels, dist.values)


def moments(dist: PredictiveDistribution) -> tuple[float, float]:
    """(mean, sd) from trapezoidal integrals of the quantile function."""
    return dist.mean, dist.sd


def pit(dist: PredictiveDistribution, y: float) -> float:
    """Probability integral transform of a realised outcome."""
    return cdf_eval(dist, y)


def gaussian_grid(mean: float, sd: float, z_scores: np.ndarray,
                  levels: np.ndarray) -> PredictiveDistribution:
    """Distribution with quantiles mean + sd * z at the given levels."""
    return PredictiveDistribution(levels=levels, values=mean + sd * z_scores)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Symmetric covariance with shrinkage toward its diagonal."""

    matrix: np.ndarray
    shrinkage: float = 0.0

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", m)
        if m.shape[0] != m.shape[1]:
            raise ValueError("covariance matrix must be square")
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ValueError("shrinkage must lie in [0, 1]")
        if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValueError("covariance matrix must be symmetric within 1e-12")
        eig = np.linalg.eigvalsh(self.shrunk())
        if eig[0] < -1e-10 * max(1.0, eig[-1]):
            raise ValueError("covariance must be positive semidefinite after shrinkage")

    def shrunk(self) -> np.ndarray:
        """(1 - s) * matrix + s * diag(matrix)."""
        m = self.matrix
        return (1.0 - self.shrinkage) * m + self.shrinkage * np.diag(np.diag(m))

    @property
    def n_assets(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class MarketObservation:
    """One period of market data: outcome plus friction state variables."""

    timestamp: int
    realized_return: float
    volatility: float
    spread: float
    volume: float

    def __post_init__(self):
        if self.volatility < 0:
            raise ValueError("volatility must be >= 0")
        if self.spread < 0:
            raise ValueError("spread must be >= 0")
        if self.volume <= 0:
            raise ValueError("volume must be > 0")
