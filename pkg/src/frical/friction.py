"""Trading-cost functional, feasible-set membership, and the friction state.

Costs decompose into linear terms (fees plus spread crossing, both
proportional to turnover) and a convex impact term.  Two impact shapes are
supported: quadratic in the trade vector, and a square-root participation
law where the per-unit cost scales like sigma * sqrt(q / V), giving a
total cost proportional to |q|^{3/2} V^{-1/2} per asset.  Both are convex,
zero at zero trade, and coercive together with the linear terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class FrictionModel:
    """Cost operator parameters.

    ``spread_rate=None`` means the per-period spread from the friction
    state is used; a float pins a fixed rate instead.  ``cost_multiplier``
    scales the whole operator and drives sensitivity grids.
    """

    fee_rate: float = 0.0
    spread_rate: float | None = None
    impact_kind: str = "none"  # none | quadratic | sqrt_participation
    impact_coeff: float = 0.0
    cost_multiplier: float = 1.0

    def __post_init__(self):
        if self.fee_rate < 0 or self.impact_coeff < 0 or self.cost_multiplier < 0:
            raise ValueError("cost rates must be non-negative")
        if self.spread_rate is not None and self.spread_rate < 0:
            raise ValueError("spread_rate must be non-negative")
        if self.impact_kind not in ("none", "quadratic", "sqrt_participation"):
            raise ValueError(f"unknown impact_kind {self.impact_kind!r}")

    def with_multiplier(self, m: float) -> "FrictionModel":
        return FrictionModel(self.fee_rate, self.spread_rate, self.impact_kind,
                             self.impact_coeff, self.cost_multiplier * m)


@dataclass(frozen=True)
class FrictionState:
    """Per-period friction state: spread, volatility, volume, composite kappa."""

    spread: float
    volatility: float
    volume: float
    kappa: float = 1.0

    def __post_init__(self):
        if self.spread < 0 or self.volatility < 0 or self.kappa < 0:
            raise ValueError("spread, volatility and kappa must be >= 0")
        if self.volume <= 0:
            raise ValueError("volume must be > 0")


def linear_rate(model: FrictionModel, state: FrictionState) -> float:
    """Per-unit-turnover linear cost (fee plus spread), multiplier applied."""
    spread = state.spread if model.spread_rate is None else model.spread_rate
    return model.cost_multiplier * (model.fee_rate + spread)


def cost_total(model: FrictionModel, state: FrictionState,
               delta_w: np.ndarray) -> float:
    """Total trading cost of a weight change, in return-fraction units.

    cost = multiplier * [ (fee + spread) * ||dw||_1 + impact(dw) ] with
    quadratic impact (k/2)||dw||_2^2 or square-root-law impact
    k * sigma * sum_i |dw_i|^{3/2} / sqrt(V_i).
    """
    dw = np.atleast_1d(np.asarray(delta_w, dtype=float))
    if not np.all(np.isfinite(dw)):
        raise ValueError("delta_w must be finite")
    spread = state.spread if model.spread_rate is None else model.spread_rate
    cost = (model.fee_rate + spread) * np.sum(np.abs(dw))
    if model.impact_kind == "quadratic":
        cost += 0.5 * model.impact_coeff * float(dw @ dw)
    elif model.impact_kind == "sqrt_participation":
        cost += model.impact_coeff * state.volatility * float(
            np.sum(np.abs(dw) ** 1.5) / np.sqrt(state.volume))
    return model.cost_multiplier * float(cost)


def kappa(spread: float, volatility: float,
          med_spread: float, med_vol: float) -> float:
    """Composite friction state: spread and volatility, median-normalised."""
    if med_spread <= 0 or med_vol <= 0:
        raise ValueError("rolling normalizers must be > 0")
    return (spread / med_spread) * (volatility / med_vol)


def rolling_kappa(spreads: np.ndarray, vols: np.ndarray,
                  window: int = 500) -> np.ndarray:
    """Kappa series with trailing-median normalisers.

    Medians use the trailing ``window`` observations up to and including
    t (expanding while fewer than ``window`` are available), so the series
    is computable in real time.
    """
    spreads = np.asarray(spreads, dtype=float)
    vols = np.asarray(vols, dtype=float)
    n = len(spreads)
    out = np.empty(n)
    for t in range(n):
        lo = max(0, t + 1 - window)
        ms = np.median(spreads[lo:t + 1])
        mv = np.median(vols[lo:t + 1])
        out[t] = kappa(spreads[t], vols[t], ms, mv)
    return out


@dataclass(frozen=True)
class FeasibleSet:
    """Admissible decision set: budget, box, turnover, leverage, participation.

    ``lower``/``upper`` broadcast to the asset dimension.  The turnover cap
    bounds ||w - w_prev||_1, the leverage cap bounds ||w||_1, and the
    participation cap bounds |dw_i| as a fraction of per-asset volume.
    """

    budget: bool = False
    lower: float | np.ndarray = -np.inf
    upper: float | np.ndarray = np.inf
    turnover_cap: float = np.inf
    leverage_cap: float = np.inf
    participation_cap: float | None = None

    def __post_init__(self):
        if self.turnover_cap <= 0:
            raise ValueError("turnover_cap must be > 0")
        if self.leverage_cap <= 0:
            raise ValueError("leverage_cap must be > 0")
        if self.participation_cap is not None and self.participation_cap <= 0:
            raise ValueError("participation_cap must be > 0")
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")

    def bounds(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        return lo, hi

    def max_delta(self, volume: np.ndarray | None, n: int) -> np.ndarray | None:
        """Per-asset |dw| bound implied by the participation cap, if any."""
        if self.participation_cap is None:
            return None
        if volume is None:
            raise ValueError("participation cap requires per-asset volume")
        vol = np.broadcast_to(np.asarray(volume, dtype=float), (n,))
        return self.participation_cap * vol

    def assert_anchored(self, w_prev: np.ndarray,
                        volume: np.ndarray | None = None) -> None:
        """Check the set contains w_prev projected to the box bounds."""
        w_prev = np.atleast_1d(np.asarray(w_prev, dtype=float))
        lo, hi = self.bounds(len(w_prev))
        anchor = np.clip(w_prev, lo, hi)
        ok, violated = feasible_contains(self, anchor, w_prev, volume)
        if not ok:
            raise ValueError(
                "feasible set does not contain the previous weights projected "
                f"to bounds (violated: {', '.join(violated)})")


def feasible_contains(fs: FeasibleSet, w: np.ndarray, w_prev: np.ndarray,
                      volume: np.ndarray | None = None,
                      tol: float = FEASIBILITY_TOL) -> tuple[bool, list[str]]:
    """Membership test; returns (ok, list of violated constraint names)."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    w_prev = np.atleast_1d(np.asarray(w_prev, dtype=float))
    if w.shape != w_prev.shape:
        raise ValueError("w and w_prev dimensions do not match")
    n = len(w)
    lo, hi = fs.bounds(n)
    violated = []
    if fs.budget and abs(np.sum(w) - 1.0) > tol:
        violated.append("budget")
    if np.any(w < lo - tol):
        violated.append("lower_bound")
    if np.any(w > hi + tol):
        violated.append("upper_bound")
    dw = w - w_prev
    if np.sum(np.abs(dw)) > fs.turnover_cap + tol:
        violated.append("turnover_cap")
    if np.sum(np.abs(w)) > fs.leverage_cap + tol:
        violated.append("leverage_cap")
    md = fs.max_delta(volume, n)
    if md is not None and np.any(np.abs(dw) > md + tol):
        violated.append("participation_cap")
    return (len(violated) == 0), violated
