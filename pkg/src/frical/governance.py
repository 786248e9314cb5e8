"""Model-risk stress set, worst-case envelope, and drift monitoring.

Stress scenarios perturb the deployed system along three channels: a
downward shift of the predictive mean (in units of the stressed forecast
sd), a multiplicative cost shock, and an inflation of the forecast
volatility.  The pipeline is re-run under each perturbation; the loss
multiplier is the stressed mean loss over the baseline mean loss.

Drift monitoring standardises the rolling mean of realised loss
differentials by the rolling standard deviation; governance thresholds sit
at plus/minus two with a persistence rule before a breach is declared.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import PredictiveDistribution

DRIFT_WINDOW = 500
DRIFT_THRESHOLD = 2.0
DRIFT_PERSISTENCE = 5


@dataclass(frozen=True)
class StressScenario:
    name: str
    mean_shift_sd: float = 0.0
    cost_multiplier: float = 1.0
    vol_multiplier: float = 1.0
    combined: bool = False

    def __post_init__(self):
        if self.cost_multiplier <= 0 or self.vol_multiplier <= 0:
            raise ValueError("stress multipliers must be > 0")

    @property
    def is_identity(self) -> bool:
        return (self.mean_shift_sd == 0.0 and self.cost_multiplier == 1.0
                and self.vol_multiplier == 1.0)

    def perturb_distribution(self, dist: PredictiveDistribution
                             ) -> PredictiveDistribution:
        """Inflate dispersion, then shift the mean by stressed-sd units."""
        if self.is_identity:
            return dist
        mean, sd = dist.mean, dist.sd
        values = mean + (dist.values - mean) * self.vol_multiplier
        values = values + self.mean_shift_sd * (sd * self.vol_multiplier)
        return PredictiveDistribution(levels=dist.levels, values=values)


def standard_stress_grid() -> list[StressScenario]:
    """The four perturbation scenarios plus the identity baseline."""
    return [
        StressScenario("baseline"),
        StressScenario("adverse_selection", mean_shift_sd=-0.5),
        StressScenario("liquidity_shock", cost_multiplier=2.0),
        StressScenario("volatility_regime", vol_multiplier=1.5),
        StressScenario("combined", mean_shift_sd=-0.5, cost_multiplier=2.0,
                       vol_multiplier=1.5, combined=True),
    ]


@dataclass(frozen=True)
class StressResult:
    scenario: StressScenario
    expected_loss: float
    multiplier: float  # inf sentinel when the baseline loss is zero

    def to_row(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "expected_loss": self.expected_loss,
            "multiplier": self.multiplier,
        }


def apply_stress(run_mean_loss: Callable[[StressScenario], float],
                 scenario: StressScenario,
                 baseline_loss: float | None = None) -> StressResult:
    """Re-run the pipeline under one perturbation scenario.

    ``run_mean_loss`` maps a scenario to the realised mean decision
    loss of the frozen pipeline under that perturbation.
    """
    if baseline_loss is None:
        baseline_loss = run_mean_loss(StressScenario("baseline"))
    loss = baseline_loss if scenario.is_identity else run_mean_loss(scenario)
    if baseline_loss == 0.0:
        multiplier = np.inf if loss != 0.0 else 1.0
    else:
        multiplier = loss / baseline_loss
    return StressResult(scenario=scenario, expected_loss=float(loss),
                        multiplier=float(multiplier))


def run_stress_grid(run_mean_loss: Callable[[StressScenario], float],
                    grid: list[StressScenario] | None = None
                    ) -> list[StressResult]:
    grid = grid if grid is not None else standard_stress_grid()
    if not grid:
        raise ValueError("stress grid is empty")
    baseline = run_mean_loss(StressScenario("baseline"))
    return [apply_stress(run_mean_loss, sc, baseline_loss=baseline)
            for sc in grid]


def worst_case(results: list[StressResult]) -> StressResult:
    """Supremum of expected loss over the grid; first index wins ties."""
    if not results:
        raise ValueError("stress grid is empty")
    best = results[0]
    for r in results[1:]:
        if r.expected_loss > best.expected_loss:
            best = r
    return best


@dataclass(frozen=True)
class DriftStatistic:
    z_series: np.ndarray          # nan where the rolling sd vanishes
    valid: np.ndarray             # which periods carry a defined statistic
    breach_flags: np.ndarray      # persistence-confirmed breach periods
    breach_events: np.ndarray     # timestamps where a breach run is confirmed
    breach_frequency: float
    window: int
    threshold: float
    persistence: int


def drift_monitor(diffs: np.ndarray, window: int = DRIFT_WINDOW,
                  threshold: float = DRIFT_THRESHOLD,
                  persistence: int = DRIFT_PERSISTENCE) -> DriftStatistic:
    """Rolling standardised mean of the loss differential.

    Z_t = rolling_mean / rolling_sd over the trailing ``window``
    observations; |Z| above the threshold for ``persistence`` consecutive
    periods confirms a breach.
    """
    if window < 30:
        raise ValueError("window must be >= 30")
    x = np.asarray(diffs, dtype=float)
    n = len(x)
    z = np.full(n, np.nan)
    valid = np.zeros(n, dtype=bool)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    csum2 = np.concatenate([[0.0], np.cumsum(x * x)])
    for t in range(window - 1, n):
        lo = t + 1 - window
        s = csum[t + 1] - csum[lo]
        s2 = csum2[t + 1] - csum2[lo]
        mean = s / window
        var = max(s2 / window - mean * mean, 0.0)
        sd = np.sqrt(var)
        if sd > 0.0:
            z[t] = mean / sd
            valid[t] = True

    over = valid & (np.abs(z) > threshold)
    breach = np.zeros(n, dtype=bool)
    events = []
    run = 0
    for t in range(n):
        run = run + 1 if over[t] else 0
        if run >= persistence:
            breach[t] = True
            if run == persistence:
                events.append(t)
                breach[t - persistence + 1: t + 1] = True
    n_valid = int(valid.sum())
    freq = float(breach.sum() / n_valid) if n_valid else 0.0
    return DriftStatistic(z_series=z, valid=valid, breach_flags=breach,
                          breach_events=np.asarray(events, dtype=int),
                          breach_frequency=freq, window=window,
                          threshold=threshold, persistence=persistence)
