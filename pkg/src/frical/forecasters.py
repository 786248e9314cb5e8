"""Baseline predictive-distribution producers.

Two practice-style baselines (rolling empirical quantiles, EWMA volatility
with a parametric innovation law) plus a controlled miscalibrated
forecaster for simulation studies: it sees the true conditional mean up to
additive noise and understates the true dispersion by a configurable
shrink factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm, t as student_t

from .distributions import PredictiveDistribution, standard_levels

MIN_WINDOW = 50


@lru_cache(maxsize=16)
def _innovation_z(innovation: str, dof: float, n_levels: int) -> np.ndarray:
    levels = standard_levels(n_levels)
    if innovation == "student_t":
        z = student_t.ppf(levels, dof)
    else:
        z = norm.ppf(levels)
    z.setflags(write=False)
    return z


@dataclass(frozen=True)
class ForecasterConfig:
    kind: str = "rolling_empirical"  # rolling_empirical | ewma_parametric | overconfident_sim
    window: int = 500
    ewma_lambda: float = 0.94
    innovation: str = "gaussian"  # gaussian | student_t
    t_dof: float = 5.0
    shrink: float = 1.0
    bias_scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rolling_empirical", "ewma_parametric",
                             "overconfident_sim"):
            raise ValueError(f"unknown forecaster kind {self.kind!r}")
        if self.window < MIN_WINDOW:
            raise ValueError(f"window must be >= {MIN_WINDOW}")
        if not 0.0 < self.ewma_lambda < 1.0:
            raise ValueError("ewma_lambda must lie in (0, 1)")
        if not 0.0 < self.shrink <= 1.0:
            raise ValueError("shrink must lie in (0, 1]")
        if self.innovation not in ("gaussian", "student_t"):
            raise ValueError(f"unknown innovation law {self.innovation!r}")

    def innovation_quantiles(self, levels: np.ndarray) -> np.ndarray:
        if len(levels) == len(standard_levels()):
            return _innovation_z(self.innovation, self.t_dof, len(levels))
        if self.innovation == "student_t":
            return student_t.ppf(levels, self.t_dof)
        return norm.ppf(levels)


def rolling_empirical(returns: np.ndarray,
                      levels: np.ndarray | None = None) -> PredictiveDistribution:
    """Empirical order-statistic quantiles of the trailing window."""
    r = np.asarray(returns, dtype=float)
    if len(r) < MIN_WINDOW:
        raise ValueError(f"window must hold >= {MIN_WINDOW} returns, got {len(r)}")
    lv = standard_levels() if levels is None else np.asarray(levels)
    values = np.quantile(r, lv, method="linear")
    return PredictiveDistribution(levels=lv, values=np.maximum.accumulate(values))


def ewma_parametric(returns: np.ndarray, config: ForecasterConfig,
                    levels: np.ndarray | None = None) -> PredictiveDistribution:
    """EWMA variance of the window paired with a parametric innovation law."""
    r = np.asarray(returns, dtype=float)
    if len(r) < MIN_WINDOW:
        raise ValueError(f"window must hold >= {MIN_WINDOW} returns, got {len(r)}")
    lv = standard_levels() if levels is None else np.asarray(levels)
    lam = config.ewma_lambda
    head = MIN_WINDOW // 2
    var0 = float(np.mean(r[:head] ** 2))
    tail = r[head:] ** 2
    m = len(tail)
    # closed form of the recursion var <- lam*var + (1-lam)*x^2
    powers = lam ** np.arange(m - 1, -1, -1)
    var = (lam ** m) * var0 + (1.0 - lam) * float(powers @ tail)
    sd = float(np.sqrt(var))
    mean = float(np.mean(r))
    z = config.innovation_quantiles(lv)
    return PredictiveDistribution(levels=lv, values=mean + sd * z)


def overconfident_sim(true_mean: float, true_sd: float,
                      config: ForecasterConfig, noise: float,
                      levels: np.ndarray | None = None) -> PredictiveDistribution:
    """Simulation forecaster with random mean bias and shrunken dispersion.

    ``noise`` is a standard-normal draw fixed before the forecast is made,
    so the emitted distribution is a deterministic function of time-t
    information.  With shrink = 1 and bias_scale = 0 this is the honest
    forecaster emitting the true conditional law.
    """
    lv = standard_levels() if levels is None else np.asarray(levels)
    sd = config.shrink * true_sd
    mean = true_mean + config.bias_scale * sd * noise
    z = config.innovation_quantiles(lv)
    return PredictiveDistribution(levels=lv, values=mean + sd * z)
