"""Nested walk-forward evaluation of forecast-to-decision pipelines.

The engine runs, per method, the full per-period recursion: base forecast
from time-t information, calibration map fitted on an embargoed window
strictly before the active test block, friction-aware constrained
decision, and realised decision-loss accounting at the horizon.  Test
blocks are disjoint; hyperparameters are selected per block on validation
decision loss only; the test stream is never touched by any selection.

Timing convention: a decision at index t uses observations with index <= t
and is settled by the return at t + horizon.  Panel rows are indexed by
the decision timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .calibration import (
    MIN_UWC_WINDOW,
    CalibrationWarp,
    monotone_map_apply,
    pit_remap_fit,
    quantile_recalibrate,
    uwc_fit_from_pits,
    warp_apply,
)
from .distributions import (
    CovarianceEstimate,
    PredictiveDistribution,
    cdf_eval,
    pit,
    standard_levels,
)
from .forecasters import (
    ForecasterConfig,
    ewma_parametric,
    overconfident_sim,
    rolling_empirical,
)
from .friction import FeasibleSet, FrictionModel, FrictionState, cost_total, \
    linear_rate, rolling_kappa
from .governance import StressScenario
from .inference import hac_se
from .optimizer import DecisionProblem, solve_constrained
from .synthetic import MarketSeries, STREAM_FORECAST_NOISE, STREAM_PLACEBO, stream
from .weights import DiagnosticGrid, compute_weights, influence_coeffs, \
    kappa_multiplier

DEFAULT_PERIODS_PER_YEAR = 98_280  # 252 trading days of 390 minutes
_SD_FLOOR = 1e-8

CALIBRATION_KINDS = ("identity", "pit_remap", "quantile_recal", "uwc")


class LeakageError(RuntimeError):
    """An index beyond the information set reached a fit or forecast."""


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    name: str
    forecaster: ForecasterConfig
    calibration: str = "identity"
    warp_lambda: float = 1e-4
    tail_boost: bool = False

    def __post_init__(self):
        if self.calibration not in CALIBRATION_KINDS:
            raise ValueError(f"unknown calibration kind {self.calibration!r}")


@dataclass(frozen=True)
class WalkForwardConfig:
    t_train: int
    t_val: int
    t_test: int
    embargo: int
    horizon: int = 1
    refit: str = "rolling"  # rolling | expanding
    t_calib: int | None = 1000  # None: expanding calibration window
    methods: tuple = ()
    warp_lambda_grid: tuple = ()
    ewma_lambda_grid: tuple = ()

    def __post_init__(self):
        if min(self.t_train, self.t_val, self.t_test) <= 0:
            raise ValueError("walk-forward block lengths must be > 0")
        if self.embargo < self.horizon:
            raise ValueError("embargo must be >= horizon")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.refit not in ("rolling", "expanding"):
            raise ValueError(f"unknown refit mode {self.refit!r}")
        if not self.methods:
            raise ValueError("at least one method is required")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "warp_lambda_grid",
                           tuple(self.warp_lambda_grid))
        object.__setattr__(self, "ewma_lambda_grid",
                           tuple(self.ewma_lambda_grid))


@dataclass(frozen=True)
class EconomicsConfig:
    gamma: float = 2.0
    friction: FrictionModel = field(default_factory=FrictionModel)
    feasible: FeasibleSet = field(default_factory=FeasibleSet)
    utility: str = "linear"  # linear | mean_variance
    ce_gamma: float = 0.0
    periods_per_year: float = DEFAULT_PERIODS_PER_YEAR
    kappa_window: int = 500
    grid: DiagnosticGrid = field(default_factory=DiagnosticGrid)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.utility not in ("linear", "mean_variance"):
            raise ValueError(f"unknown utility {self.utility!r}")


@dataclass(frozen=True)
class PanelRow:
    timestamp: int
    symbol: str
    method: str
    decision_loss: float
    net_return: float
    turnover: float
    total_cost: float
    constraint_bound: bool
    kappa: float
    solver_status: str


@dataclass(frozen=True)
class EndpointSummary:
    method: str
    n: int
    mean_loss: float
    mean_net: float
    mean_turnover: float
    constraint_freq: float
    sharpe_annualised: float
    cvar_5: float
    max_drawdown: float
    regime_means: dict

    def to_dict(self) -> dict:
        out = {
            "method": self.method, "n": self.n, "mean_loss": self.mean_loss,
            "mean_net": self.mean_net, "mean_turnover": self.mean_turnover,
            "constraint_freq": self.constraint_freq,
            "sharpe_annualised": self.sharpe_annualised,
            "cvar_5": self.cvar_5, "max_drawdown": self.max_drawdown,
        }
        out.update({f"mean_net_{k}": v for k, v in self.regime_means.items()})
        return out


@dataclass(frozen=True)
class PlaceboSpec:
    mode: str  # shuffle_within_block | time_shift
    shift: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("shuffle_within_block", "time_shift"):
            raise ValueError(f"unknown placebo mode {self.mode!r}")
        if self.mode == "time_shift" and self.shift < 0:
            raise ValueError("time shift must be >= 0")


@dataclass
class EvaluationResult:
    rows: list
    calibration_rows: list
    solver_log: list
    blocks: list
    kappa: np.ndarray
    symbol: str
    calibration_fits: list = field(default_factory=list)

    def method_rows(self, name: str) -> list:
        return [r for r in self.rows if r.method == name]

    def losses(self, name: str) -> np.ndarray:
        return np.array([r.decision_loss for r in self.method_rows(name)])

    def nets(self, name: str) -> np.ndarray:
        return np.array([r.net_return for r in self.method_rows(name)])


# ---------------------------------------------------------------------------
# accounting
# ---------------------------------------------------------------------------

def utility_value(net: float, utility: str = "linear",
                  ce_gamma: float = 0.0) -> float:
    if utility == "mean_variance":
        return net - 0.5 * ce_gamma * net * net
    return net


def decision_loss(weights: np.ndarray, w_prev: np.ndarray,
                  realized_returns: np.ndarray, friction: FrictionModel,
                  state: FrictionState, utility: str = "linear",
                  ce_gamma: float = 0.0) -> tuple[float, float]:
    """(net return, decision loss) of one settled decision."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    wp = np.atleast_1d(np.asarray(w_prev, dtype=float))
    y = np.atleast_1d(np.asarray(realized_returns, dtype=float))
    if w.shape != wp.shape or w.shape != y.shape:
        raise ValueError("weights, w_prev and returns dimensions do not match")
    gross = float(w @ y)
    cost = cost_total(friction, state, w - wp)
    net = gross - cost
    return net, -utility_value(net, utility, ce_gamma)


def regret(loss_candidate: float, loss_benchmark: float) -> float:
    return loss_candidate - loss_benchmark


# ---------------------------------------------------------------------------
# forecasting plumbing
# ---------------------------------------------------------------------------

def _forecast_window(market: MarketSeries, cfg: ForecasterConfig, t: int,
                     refit: str) -> np.ndarray:
    lo = 0 if refit == "expanding" else max(0, t + 1 - cfg.window)
    if t + 1 - lo < cfg.window:
        lo = max(0, t + 1 - cfg.window)
    window = market.returns[lo: t + 1]
    if lo + len(window) - 1 > t:
        raise LeakageError(f"forecast window reaches past index {t}")
    return window


def _base_forecast(market: MarketSeries, method: MethodSpec, t: int,
                   refit: str, eps: np.ndarray,
                   ewma_lambda: float | None = None) -> PredictiveDistribution:
    cfg = method.forecaster
    if ewma_lambda is not None and cfg.kind == "ewma_parametric":
        cfg = replace(cfg, ewma_lambda=ewma_lambda)
    if cfg.kind == "overconfident_sim":
        return overconfident_sim(market.cond_mean[t], market.volatility[t],
                                 cfg, noise=eps[t])
    window = _forecast_window(market, cfg, t, refit)
    if cfg.kind == "rolling_empirical":
        return rolling_empirical(window)
    return ewma_parametric(window, cfg)


# ---------------------------------------------------------------------------
# calibration plumbing
# ---------------------------------------------------------------------------

def _fit_calibration(method: MethodSpec, pits: np.ndarray,
                     weights: np.ndarray, grid: DiagnosticGrid,
                     warp_lambda: float, fitted_on: str):
    if method.calibration == "identity":
        return None
    if method.calibration == "pit_remap":
        return pit_remap_fit(pits)
    if method.calibration == "quantile_recal":
        levels = standard_levels()
        rates = np.mean(pits[:, None] <= levels[None, :], axis=0)
        return quantile_recalibrate(levels, rates)
    return uwc_fit_from_pits(pits, weights, grid,
                             penalty_lambda=warp_lambda, fitted_on=fitted_on)


def _apply_calibration(method: MethodSpec, cal,
                       dist: PredictiveDistribution) -> PredictiveDistribution:
    if cal is None:
        return dist
    if method.calibration == "pit_remap":
        return monotone_map_apply(cal, dist)
    if method.calibration == "quantile_recal":
        return cal.apply(dist)
    return warp_apply(cal, dist)


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

class _MethodState:
    def __init__(self, spec: MethodSpec, n: int):
        self.spec = spec
        self.w_prev = np.zeros(1)
        self.calibration = None
        self.warp_lambda = spec.warp_lambda
        self.ewma_lambda = None  # None: keep the method's configured decay
        self.pits = np.full(n, np.nan)
        self.weights = None  # allocated on first use (n x U)
        self.w_star = np.zeros(n)


def _block_layout(n: int, wf: WalkForwardConfig, warm: int) -> list[tuple[int, int]]:
    first = warm + wf.t_train + wf.t_val + wf.embargo
    last_decision = n - 1 - wf.horizon
    blocks = []
    s = first
    while s <= last_decision:
        blocks.append((s, min(s + wf.t_test - 1, last_decision)))
        s += wf.t_test
    if len(blocks) < 3:
        raise InsufficientDataError(
            f"series supports only {len(blocks)} outer test blocks; >= 3 required")
    return blocks


def _placebo_map(n: int, blocks, placebo: PlaceboSpec | None) -> np.ndarray:
    """forecast source index per decision index (identity off-placebo)."""
    idx = np.arange(n)
    if placebo is None:
        return idx
    if placebo.mode == "time_shift":
        return np.maximum(idx - placebo.shift, 0)
    rng = stream(placebo.seed, STREAM_PLACEBO)
    for lo, hi in blocks:
        block = np.arange(lo, hi + 1)
        idx[lo: hi + 1] = rng.permutation(block)
    return idx


def run_walk_forward(market: MarketSeries, wf: WalkForwardConfig,
                     econ: EconomicsConfig, seed: int,
                     symbol: str = "SYN",
                     stress: StressScenario | None = None,
                     placebo: PlaceboSpec | None = None) -> EvaluationResult:
    n = len(market)
    h = wf.horizon
    warm = max(m.forecaster.window for m in wf.methods)
    blocks = _block_layout(n, wf, warm)
    kappa_series = rolling_kappa(market.spread, market.volatility,
                                 window=econ.kappa_window)
    eps = stream(seed, STREAM_FORECAST_NOISE).standard_normal(n)
    fmap = _placebo_map(n, blocks, placebo)
    grid = econ.grid
    n_levels = len(grid.points)

    states = [_MethodState(m, n) for m in wf.methods]
    for st in states:
        st.weights = np.zeros((n, n_levels))

    test_flags = np.zeros(n, dtype=bool)
    block_of = np.full(n, -1, dtype=int)
    for b, (lo, hi) in enumerate(blocks):
        test_flags[lo: hi + 1] = True
        block_of[lo: hi + 1] = b

    rows: list[PanelRow] = []
    calib_rows: list[dict] = []
    solver_log: list[dict] = []
    calibration_fits: list[dict] = []

    def market_state(t: int) -> FrictionState:
        return FrictionState(spread=market.spread[t],
                             volatility=market.volatility[t],
                             volume=market.volume[t],
                             kappa=kappa_series[t])

    def friction_for_run() -> FrictionModel:
        if stress is not None and stress.cost_multiplier != 1.0:
            return econ.friction.with_multiplier(stress.cost_multiplier)
        return econ.friction

    run_friction = friction_for_run()

    def planner_eta(dist_sd: float, state: FrictionState) -> tuple[float, float]:
        eta_l1 = linear_rate(run_friction, state)
        if run_friction.impact_kind == "quadratic":
            eta_quad = run_friction.impact_coeff * run_friction.cost_multiplier
        else:
            eta_quad = 0.0
        return eta_l1, eta_quad

    def decide(st: _MethodState, dist: PredictiveDistribution, t: int,
               w_prev: np.ndarray, record: bool):
        state = market_state(t)
        sd = max(dist.sd, _SD_FLOOR)
        eta_l1, eta_quad = planner_eta(sd, state)
        problem = DecisionProblem(
            mu=np.array([dist.mean]),
            sigma=CovarianceEstimate(matrix=np.array([[sd * sd]])),
            gamma=econ.gamma, eta_l1=eta_l1, eta_quad=eta_quad,
            w_prev=w_prev, feasible=econ.feasible,
            volume=np.array([market.volume[t]]))
        outcome = solve_constrained(problem)
        if outcome.status == "fallback_previous":
            w = w_prev.copy()
        else:
            w = outcome.weights
        y = np.array([market.returns[t + h]])
        net, loss = decision_loss(w, w_prev, y, run_friction, state,
                                  econ.utility, econ.ce_gamma)
        if record:
            rows.append(PanelRow(
                timestamp=t, symbol=symbol, method=st.spec.name,
                decision_loss=loss, net_return=net,
                turnover=outcome.turnover,
                total_cost=cost_total(run_friction, state, w - w_prev),
                constraint_bound=outcome.any_binding,
                kappa=kappa_series[t], solver_status=outcome.status))
            solver_log.append({
                "timestamp": t, "method": st.spec.name,
                "status": outcome.status, "iterations": outcome.iterations,
                "kkt_residual": outcome.kkt_residual,
                "binding": {k: bool(v) for k, v in outcome.binding.items()},
                "planned_cost": eta_l1 * outcome.turnover
                + 0.5 * eta_quad * float(outcome.delta_w @ outcome.delta_w),
                "realised_cost": cost_total(run_friction, state, w - w_prev),
            })
        return w, net, loss

    def calibration_window(block_start: int) -> tuple[int, int]:
        hi = block_start - wf.embargo - h  # outcome index <= block_start - embargo
        lo = warm if wf.t_calib is None else max(warm, hi - wf.t_calib + 1)
        if hi + h > block_start - wf.embargo:
            raise LeakageError("calibration window enters the embargo region")
        return lo, hi

    def weighted_pits(st: _MethodState, lo: int, hi: int):
        sl = slice(lo, hi + 1)
        pits = st.pits[sl]
        if np.any(np.isnan(pits)):
            raise LeakageError("calibration window holds unscored periods")
        return pits, st.weights[sl]

    def select_hypers(st: _MethodState, block_start: int) -> None:
        """Inner loop: pick (ewma_lambda, warp_lambda) by validation loss."""
        spec = st.spec
        ewma_grid = (wf.ewma_lambda_grid
                     if spec.forecaster.kind == "ewma_parametric" else ())
        warp_grid = wf.warp_lambda_grid if spec.calibration == "uwc" else ()
        if not ewma_grid and not warp_grid:
            return
        ewma_opts = ewma_grid or (None,)
        warp_opts = warp_grid or (spec.warp_lambda,)
        val_hi = block_start - wf.embargo - 1
        val_lo = val_hi - wf.t_val + 1
        fit_hi = val_lo - h
        fit_lo = max(warm, fit_hi - (wf.t_calib or wf.t_train) + 1)
        best = (np.inf, st.ewma_lambda, st.warp_lambda)
        for ew, wl in product(ewma_opts, warp_opts):
            if (fit_hi - fit_lo + 1 >= MIN_UWC_WINDOW
                    and spec.calibration != "identity"):
                if ew is None:
                    pits_fit, w_fit = weighted_pits(st, fit_lo, fit_hi)
                else:
                    pits_fit = np.array([
                        pit(_base_forecast(market, spec, s, wf.refit, eps, ew),
                            market.returns[s + h])
                        for s in range(fit_lo, fit_hi + 1)])
                    w_fit = st.weights[fit_lo: fit_hi + 1]
                try:
                    cal = _fit_calibration(spec, pits_fit, w_fit, grid, wl,
                                           fitted_on=f"val<{block_start}")
                except ValueError:
                    cal = None
            else:
                cal = None
            w_prev = np.zeros(1)
            losses = []
            for s in range(val_lo, val_hi + 1):
                dist = _base_forecast(market, spec, fmap[s], wf.refit, eps, ew)
                dist = _apply_calibration(spec, cal, dist)
                w_prev, _, loss = decide(st, dist, s, w_prev, record=False)
                losses.append(loss)
            mean_loss = float(np.mean(losses))
            if mean_loss < best[0]:
                best = (mean_loss, ew, wl)
        _, st.ewma_lambda, st.warp_lambda = best

    def refit_calibration(st: _MethodState, block_start: int) -> None:
        if st.spec.calibration == "identity":
            return
        lo, hi = calibration_window(block_start)
        if hi - lo + 1 < MIN_UWC_WINDOW:
            st.calibration = None
            return
        if st.ewma_lambda is None:
            pits_fit, w_fit = weighted_pits(st, lo, hi)
        else:
            pits_fit = np.array([
                pit(_base_forecast(market, st.spec, s, wf.refit, eps,
                                   st.ewma_lambda), market.returns[s + h])
                for s in range(lo, hi + 1)])
            w_fit = st.weights[lo: hi + 1]
        try:
            st.calibration = _fit_calibration(
                st.spec, pits_fit, w_fit, grid, st.warp_lambda,
                fitted_on=f"[{lo},{hi}]")
        except ValueError:
            st.calibration = None
        record = {"method": st.spec.name, "block_start": block_start,
                  "window": [lo, hi], "kind": st.spec.calibration,
                  "warp_lambda": st.warp_lambda,
                  "ewma_lambda": st.ewma_lambda}
        if isinstance(st.calibration, CalibrationWarp):
            record["warp"] = st.calibration.to_dict()
        calibration_fits.append(record)

    last_decision = n - 1 - h
    for t in range(warm, last_decision + 1):
        starting_block = block_of[t] >= 0 and (t == blocks[block_of[t]][0])
        for st in states:
            if starting_block:
                select_hypers(st, t)
                refit_calibration(st, t)
            src = fmap[t] if test_flags[t] else t
            if src > t and placebo is None:
                raise LeakageError(f"forecast source {src} is beyond time {t}")
            dist_base = _base_forecast(market, st.spec, src, wf.refit, eps,
                                       st.ewma_lambda)
            # measurable bookkeeping for later calibration fits
            st.pits[t] = pit(dist_base, market.returns[t + h])
            a, b, _ = influence_coeffs(dist_base, grid)
            w_star_prev = st.w_star[t - 1] if t > warm else 0.0
            st.weights[t, :] = compute_weights(
                w_star_prev, econ.gamma, a, b,
                kappa_multiplier(kappa_series[t], grid,
                                 tail_boost=st.spec.tail_boost)).weights

            dist = _apply_calibration(st.spec, st.calibration, dist_base)
            if test_flags[t]:
                calib_rows.append({
                    "timestamp": t, "method": st.spec.name,
                    "pit": pit(dist, market.returns[t + h]),
                    "prob_up": 1.0 - cdf_eval(dist, 0.0),
                    "outcome_up": int(market.returns[t + h] > 0.0),
                })
            if stress is not None:
                dist = stress.perturb_distribution(dist)
            w, _, _ = decide(st, dist, t, st.w_prev, record=test_flags[t])
            st.w_star[t] = float(w[0])
            st.w_prev = w

    rows.sort(key=lambda r: (r.timestamp, r.method))
    calib_rows.sort(key=lambda r: (r["timestamp"], r["method"]))
    return EvaluationResult(rows=rows, calibration_rows=calib_rows,
                            solver_log=solver_log, blocks=blocks,
                            kappa=kappa_series, symbol=symbol,
                            calibration_fits=calibration_fits)


# ---------------------------------------------------------------------------
# endpoints and regime analysis
# ---------------------------------------------------------------------------

def endpoints(result: EvaluationResult, method: str,
              periods_per_year: float = DEFAULT_PERIODS_PER_YEAR
              ) -> EndpointSummary:
    rows = result.method_rows(method)
    if not rows:
        raise ValueError(f"no panel rows for method {method!r}")
    loss = np.array([r.decision_loss for r in rows])
    net = np.array([r.net_return for r in rows])
    turnover = np.array([r.turnover for r in rows])
    bound = np.array([r.constraint_bound for r in rows])
    kap = np.array([r.kappa for r in rows])

    sd = net.std(ddof=1) if len(net) > 1 else 0.0
    degenerate = sd <= 1e-12 * (abs(net.mean()) + 1e-12)
    sharpe = np.nan if degenerate else float(
        np.sqrt(periods_per_year) * net.mean() / sd)

    k = max(1, int(np.floor(0.05 * len(net))))
    cvar = float(np.sort(net)[:k].mean())

    # drawdown on the additive cumulative-return path, in return units
    wealth = 1.0 + np.cumsum(net)
    peaks = np.maximum.accumulate(wealth)
    max_dd = float(np.max(peaks - wealth))

    lo_b, hi_b = np.quantile(kap, [1 / 3, 2 / 3], method="inverted_cdf")
    names = np.where(kap <= lo_b, "low_kappa",
                     np.where(kap <= hi_b, "mid_kappa", "high_kappa"))
    regime_means = {lab: float(net[names == lab].mean())
                    for lab in ("low_kappa", "mid_kappa", "high_kappa")
                    if np.any(names == lab)}

    return EndpointSummary(
        method=method, n=len(rows), mean_loss=float(loss.mean()),
        mean_net=float(net.mean()), mean_turnover=float(turnover.mean()),
        constraint_freq=float(bound.mean()), sharpe_annualised=sharpe,
        cvar_5=cvar, max_drawdown=max_dd, regime_means=regime_means)


@dataclass(frozen=True)
class RegimeSplit:
    degenerate: bool
    boundaries: tuple
    terciles: dict  # name -> {n, mean_diff, t_stat}


def regime_split(result: EvaluationResult, method: str, reference: str,
                 bandwidth: int | None = None) -> RegimeSplit:
    """Per-tercile mean paired loss differentials with HAC t-stats.

    The differential convention is reference minus method, so positive
    values mean the method beats the reference.
    """
    m_rows = result.method_rows(method)
    r_rows = result.method_rows(reference)
    if len(m_rows) != len(r_rows):
        raise ValueError("method panels are not aligned")
    diff = np.array([rr.decision_loss - mr.decision_loss
                     for mr, rr in zip(m_rows, r_rows)])
    kap = np.array([r.kappa for r in m_rows])
    if np.allclose(kap, kap[0]):
        return RegimeSplit(degenerate=True, boundaries=(np.nan, np.nan),
                           terciles={"all": {
                               "n": len(diff),
                               "mean_diff": float(diff.mean()),
                               "t_stat": float(diff.mean() / hac_se(diff))
                               if diff.std() > 0 else np.nan}})
    lo_b, hi_b = np.quantile(kap, [1 / 3, 2 / 3], method="inverted_cdf")
    out = {}
    masks = {
        "low_kappa": kap <= lo_b,
        "mid_kappa": (kap > lo_b) & (kap <= hi_b),
        "high_kappa": kap > hi_b,
    }
    for name, mask in masks.items():
        d = diff[mask]
        if len(d) == 0:
            continue
        se = hac_se(d) if len(d) > 8 and d.std() > 0 else np.nan
        out[name] = {"n": int(mask.sum()), "mean_diff": float(d.mean()),
                     "t_stat": float(d.mean() / se) if se and se > 0 else np.nan}
    return RegimeSplit(degenerate=False, boundaries=(float(lo_b), float(hi_b)),
                       terciles=out)
