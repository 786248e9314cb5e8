"""Forecast recalibration maps.

Standard post-processing: Platt-style logistic recalibration and isotonic
regression for event probabilities, level remapping from empirical hit
rates for quantile forecasts, and PIT remapping for full distributions.

Utility-weighted recalibration restricts the map to a monotone
piecewise-linear CDF warp g on five fixed knots with pinned endpoints,
fitted by minimising the squared weighted calibration-moment averages over
a diagnostic grid plus a curvature penalty that regularises toward the
identity map.  The indicator moments are piecewise constant in the knot
values, so the fit runs projected gradient descent on a ramp-smoothed
surrogate and the exact indicator objective arbitrates the result: a fit
that does not improve on the identity warp is discarded in favour of the
identity (conservative fallback).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import PredictiveDistribution, pit
from .weights import DiagnosticGrid

WARP_KNOTS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_PENALTY = 1e-4
MIN_UWC_WINDOW = 250
MIN_PIT_SAMPLE = 100
_SMOOTH_WIDTH = 0.05
_GRAD_TOL = 1e-6
_MAX_FIT_ITER = 5000


# ---------------------------------------------------------------------------
# monotone maps on [0, 1]
# ---------------------------------------------------------------------------

class PiecewiseMonotoneMap:
    """Non-decreasing piecewise-linear map of [0, 1] onto [0, 1]."""

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs[0] != 0.0 or xs[-1] != 1.0 or ys[0] != 0.0 or ys[-1] != 1.0:
            raise ValueError("map must pin (0, 0) and (1, 1)")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("map abscissae must be strictly increasing")
        if np.any(np.diff(ys) < -1e-12):
            raise ValueError("map must be non-decreasing")
        self.xs = xs
        self.ys = np.maximum.accumulate(ys)

    def forward(self, p):
        return np.interp(p, self.xs, self.ys)

    def inverse(self, u):
        """Left-continuous inverse: min{p : forward(p) >= u}."""
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.ys, u, side="left")
        k = np.clip(k, 1, len(self.ys) - 1)
        y0, y1 = self.ys[k - 1], self.ys[k]
        x0, x1 = self.xs[k - 1], self.xs[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(y1 > y0, (u - y0) / np.where(y1 > y0, y1 - y0, 1.0), 1.0)
        out = x0 + np.clip(t, 0.0, 1.0) * (x1 - x0)
        out = np.where(u <= self.ys[0], self.xs[0], out)
        return out if out.ndim else float(out)


def monotone_map_apply(cdf_map: PiecewiseMonotoneMap,
                       dist: PredictiveDistribution) -> PredictiveDistribution:
    """Compose a CDF map with a distribution: F_new = map(F).

    The new quantile function at level p is the old quantile at
    map^{-1}(p); levels outside the stored grid clamp to its endpoints
    (flat tail extension).
    """
    p = np.clip(cdf_map.inverse(dist.levels), 1e-15, 1.0 - 1e-15)
    values = np.interp(p, dist.levels, dist.values)
    return PredictiveDistribution(levels=dist.levels,
                                  values=np.maximum.accumulate(values))


# ---------------------------------------------------------------------------
# utility-weighted warp
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationWarp:
    """Monotone CDF warp g on fixed knots with pinned endpoints."""

    theta: np.ndarray
    knots: tuple = WARP_KNOTS
    penalty_lambda: float = DEFAULT_PENALTY
    grid: DiagnosticGrid = field(default_factory=DiagnosticGrid)
    fitted_on: str = ""
    fallback_identity: bool = False

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        knots = np.asarray(self.knots, dtype=float)
        if len(theta) != len(knots):
            raise ValueError("theta must have one value per knot")
        if abs(theta[0]) > 0 or abs(theta[-1] - 1.0) > 0:
            raise ValueError("warp endpoints must be pinned to 0 and 1")
        if np.any(np.diff(theta) < -1e-12):
            raise ValueError("theta must be non-decreasing")

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.theta, np.asarray(self.knots)))

    def as_map(self) -> PiecewiseMonotoneMap:
        return PiecewiseMonotoneMap(np.asarray(self.knots), self.theta)

    def g(self, p):
        return self.as_map().forward(p)

    def g_inv(self, u):
        return self.as_map().inverse(u)

    def to_dict(self) -> dict:
        return {
            "knots": list(self.knots),
            "theta": [float(t) for t in self.theta],
            "penalty_lambda": self.penalty_lambda,
            "grid": list(self.grid.points),
            "fitted_on": self.fitted_on,
            "fallback_identity": self.fallback_identity,
        }


def identity_warp(grid: DiagnosticGrid | None = None,
                  penalty_lambda: float = DEFAULT_PENALTY) -> CalibrationWarp:
    return CalibrationWarp(theta=np.asarray(WARP_KNOTS),
                           grid=grid or DiagnosticGrid(),
                           penalty_lambda=penalty_lambda)


def warp_apply(warp: CalibrationWarp,
               dist: PredictiveDistribution) -> PredictiveDistribution:
    if warp.is_identity:
        return dist
    return monotone_map_apply(warp.as_map(), dist)


def quantile_hit_moments(pits: np.ndarray, grid: DiagnosticGrid,
                         warp: CalibrationWarp | None = None) -> np.ndarray:
    """m_u = 1{PIT <= g^{-1}(u)} - u per observation and grid level (T x U)."""
    pits = np.asarray(pits, dtype=float)
    u = grid.array
    cut = u if warp is None or warp.is_identity else np.asarray(warp.g_inv(u))
    return (pits[:, None] <= cut[None, :]).astype(float) - u[None, :]


def uwc_criterion(pits: np.ndarray, weights: np.ndarray, grid: DiagnosticGrid,
                  warp: CalibrationWarp | None = None) -> float:
    """Sum over levels of the squared weighted moment averages (>= 0)."""
    m = quantile_hit_moments(pits, grid, warp)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w[:, None], m.shape)
    avg = np.mean(w * m, axis=0)
    return float(np.sum(avg * avg))


def uwc_criterion_dists(dists, ys, weights, grid,
                        warp: CalibrationWarp | None = None) -> float:
    pits = np.array([pit(d, y) for d, y in zip(dists, ys)])
    return uwc_criterion(pits, weights, grid, warp)


def _hat_basis(pits: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Piecewise-linear hat-function basis so that g(p) = Phi(p) @ theta."""
    t = np.clip(pits, 0.0, 1.0)
    k = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 2)
    frac = (t - knots[k]) / (knots[k + 1] - knots[k])
    phi = np.zeros((len(t), len(knots)))
    rows = np.arange(len(t))
    phi[rows, k] = 1.0 - frac
    phi[rows, k + 1] = frac
    return phi


def _penalty_and_grad(theta: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    d2 = theta[2:] - 2.0 * theta[1:-1] + theta[:-2]
    grad = np.zeros_like(theta)
    grad[2:] += 2.0 * lam * d2
    grad[1:-1] += -4.0 * lam * d2
    grad[:-2] += 2.0 * lam * d2
    return lam * float(d2 @ d2), grad


def _pav(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted pool-adjacent-violators; returns non-decreasing fitted values."""
    values = []
    weights = []
    counts = []
    for yi, wi in zip(y, w):
        values.append(float(yi))
        weights.append(float(wi))
        counts.append(1)
        while len(values) > 1 and values[-2] > values[-1]:
            v = (values[-2] * weights[-2] + values[-1] * weights[-1]) / (
                weights[-2] + weights[-1])
            w_new = weights[-2] + weights[-1]
            c_new = counts[-2] + counts[-1]
            values = values[:-2] + [v]
            weights = weights[:-2] + [w_new]
            counts = counts[:-2] + [c_new]
    return np.repeat(values, counts)


def _project_theta(theta: np.ndarray) -> np.ndarray:
    """Projection onto {theta: 0 = t0 <= t1 <= ... <= tK = 1}."""
    out = theta.copy()
    out[0], out[-1] = 0.0, 1.0
    interior = _pav(out[1:-1], np.ones(len(out) - 2))
    out[1:-1] = np.clip(interior, 0.0, 1.0)
    return out


def uwc_fit(dists, ys, weights, grid: DiagnosticGrid | None = None,
            penalty_lambda: float = DEFAULT_PENALTY,
            fitted_on: str = "", max_iter: int = _MAX_FIT_ITER) -> CalibrationWarp:
    """Fit the utility-weighted warp on a calibration window.

    Parameters
    ----------
    dists, ys
        Window of (forecast distribution, realised outcome) pairs; the
        window must hold at least 250 observations.
    weights
        Per-period weight vectors over the diagnostic grid, shape (T, U)
        (or (T,) for level-constant weights).  They must be computed from
        information available at each period.
    """
    grid = grid or DiagnosticGrid()
    pits = np.array([pit(d, y) for d, y in zip(dists, ys)])
    if weights is None:
        weights = np.ones((len(pits), len(grid.points)))
    return uwc_fit_from_pits(pits, np.asarray(weights, dtype=float), grid,
                             penalty_lambda, fitted_on, max_iter)


def uwc_fit_from_pits(pits: np.ndarray, weights: np.ndarray,
                      grid: DiagnosticGrid,
                      penalty_lambda: float = DEFAULT_PENALTY,
                      fitted_on: str = "",
                      max_iter: int = _MAX_FIT_ITER) -> CalibrationWarp:
    pits = np.asarray(pits, dtype=float)
    if len(pits) < MIN_UWC_WINDOW:
        raise ValueError(
            f"calibration window needs >= {MIN_UWC_WINDOW} observations, "
            f"got {len(pits)}")
    u = grid.array
    w = weights if weights.ndim == 2 else np.broadcast_to(
        weights[:, None], (len(pits), len(u))).copy()
    if w.shape != (len(pits), len(u)):
        raise ValueError("weights shape must be (T, n_grid_levels)")
    knots = np.asarray(WARP_KNOTS)
    identity = knots.copy()
    # the weights are defined up to proportionality; normalise to unit mean
    # so the curvature penalty keeps a fixed meaning across regimes
    w_mean = float(np.mean(w))
    if w_mean <= 0.0:
        return CalibrationWarp(theta=identity, grid=grid,
                               penalty_lambda=penalty_lambda,
                               fitted_on=fitted_on)
    w = w / w_mean
    phi = _hat_basis(pits, knots)
    t_c = len(pits)

    def smooth_value(theta, delta):
        warped = phi @ theta
        x = (u[None, :] - warped[:, None]) / delta
        s = np.clip(x + 0.5, 0.0, 1.0)
        avg = np.mean(w * (s - u[None, :]), axis=0)
        pen, _ = _penalty_and_grad(theta, penalty_lambda)
        return float(avg @ avg) + pen

    def smooth_gradient(theta, delta):
        warped = phi @ theta
        x = (u[None, :] - warped[:, None]) / delta
        s = np.clip(x + 0.5, 0.0, 1.0)
        avg = np.mean(w * (s - u[None, :]), axis=0)
        _, pen_grad = _penalty_and_grad(theta, penalty_lambda)
        on_ramp = ((x > -0.5) & (x < 0.5)).astype(float) / delta
        # dA_u/dtheta = -(1/T) sum_s w[s,u] * ramp'[s,u] * phi[s,:]
        grad_a = -(w * on_ramp).T @ phi / t_c
        return 2.0 * (avg @ grad_a) + pen_grad

    # exact criterion via one sort: weighted counts of pits below a cut are
    # cumulative sums looked up with searchsorted
    order = np.argsort(pits, kind="stable")
    sorted_pits = pits[order]
    cum_w = np.vstack([np.zeros(len(u)), np.cumsum(w[order, :], axis=0)])
    mean_w = np.mean(w, axis=0)

    def exact_moment_part(theta):
        cuts = PiecewiseMonotoneMap(knots, theta).inverse(u)
        pos = np.searchsorted(sorted_pits, cuts, side="right")
        avg = cum_w[pos, np.arange(len(u))] / t_c - u * mean_w
        return float(avg @ avg)

    def exact_objective(theta):
        pen, _ = _penalty_and_grad(theta, penalty_lambda)
        return exact_moment_part(theta) + pen

    def coordinate_polish(theta, sweeps=4, n_cand=33):
        """Deterministic per-knot scan minimising the exact objective."""
        theta = theta.copy()
        best = exact_objective(theta)
        for _ in range(sweeps):
            improved = False
            for k in range(1, len(theta) - 1):
                lo, hi = theta[k - 1], theta[k + 1]
                for cand in np.linspace(lo, hi, n_cand):
                    trial = theta.copy()
                    trial[k] = cand
                    val = exact_objective(trial)
                    if val < best - 1e-15:
                        theta, best = trial, val
                        improved = True
            if not improved:
                break
        return theta

    def descend(start: np.ndarray, budget: int) -> tuple[np.ndarray, bool, int]:
        theta = start.copy()
        done = False
        # anneal the ramp width: wide ramps give informative gradients far
        # from the optimum, narrow ramps remove the smoothing bias near it
        for delta in (2.0 * _SMOOTH_WIDTH, _SMOOTH_WIDTH, 0.4 * _SMOOTH_WIDTH):
            stage_iters = min(budget, 150)
            obj = smooth_value(theta, delta)
            grad = smooth_gradient(theta, delta)
            step = 1.0
            stalled = 0
            while stage_iters > 0:
                stage_iters -= 1
                budget -= 1
                step = min(4.0 * step, 1.0)
                moved = False
                for _ in range(24):
                    cand = _project_theta(theta - step * grad)
                    cand_obj = smooth_value(cand, delta)
                    if cand_obj < obj - 1e-14:
                        stalled = stalled + 1 if obj - cand_obj < 1e-11 else 0
                        theta, obj = cand, cand_obj
                        grad = smooth_gradient(theta, delta)
                        moved = True
                        break
                    step *= 0.5
                pg_norm = np.max(np.abs(theta - _project_theta(theta - grad)))
                if pg_norm <= _GRAD_TOL or not moved or stalled >= 8:
                    done = True
                    break
        return theta, done, budget

    # fixed deterministic starts: identity plus mid-steep and mid-flat shapes
    starts = (identity,
              np.array([0.0, 0.125, 0.5, 0.875, 1.0]),
              np.array([0.0, 0.42, 0.5, 0.58, 1.0]))
    budget = max_iter
    theta, converged, best_exact = identity.copy(), False, np.inf
    for start in starts:
        cand, done, budget = descend(start, budget)
        if exact_objective(cand) < best_exact:
            theta, best_exact = cand, exact_objective(cand)
        converged = converged or done
        if budget <= 0:
            break

    # bounded deterministic polish directly on the indicator objective
    theta = coordinate_polish(theta)

    if not converged or exact_objective(theta) > exact_objective(identity):
        return CalibrationWarp(theta=identity, grid=grid,
                               penalty_lambda=penalty_lambda,
                               fitted_on=fitted_on,
                               fallback_identity=not converged)
    theta[0], theta[-1] = 0.0, 1.0
    return CalibrationWarp(theta=theta, grid=grid,
                           penalty_lambda=penalty_lambda, fitted_on=fitted_on)


# ---------------------------------------------------------------------------
# Platt-style logistic recalibration
# ---------------------------------------------------------------------------

_PROB_CLIP = 1e-6


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _PROB_CLIP, 1.0 - _PROB_CLIP)
    return np.log(p / (1.0 - p))


def platt_fit(probs: np.ndarray, outcomes: np.ndarray,
              max_iter: int = 200, tol: float = 1e-8) -> tuple[float, float]:
    """Logistic recalibration p_cal = 1 / (1 + exp(a + b * logit(p))).

    Fitted by Newton iterations on the log likelihood; (a, b) = (0, -1)
    is the identity map.
    """
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if len(probs) < 10:
        raise ValueError("need at least 10 observations")
    if outcomes.min() == outcomes.max():
        raise ValueError("both outcome classes must be present")
    z = _logit(probs)

    def loglik(a_, b_):
        eta = -(a_ + b_ * z)
        # log sigma(eta) and log(1 - sigma(eta)), computed stably
        return float(np.sum(outcomes * -np.logaddexp(0.0, -eta)
                            + (1.0 - outcomes) * -np.logaddexp(0.0, eta)))

    a, b = 0.0, -1.0
    ll = loglik(a, b)
    for _ in range(max_iter):
        eta = -(a + b * z)
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -35, 35)))
        # d(loglik)/d(eta) = y - p, and d(eta)/d(a, b) = -(1, z)
        resid = outcomes - p
        grad = np.array([-resid.sum(), -(resid * z).sum()])
        if np.max(np.abs(grad)) <= tol:
            break
        wgt = p * (1.0 - p)
        hess = np.array([[wgt.sum(), (wgt * z).sum()],
                         [(wgt * z).sum(), (wgt * z * z).sum()]])
        try:
            delta = np.linalg.solve(hess + 1e-12 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            break
        # damped ascent: the Newton direction is delta since hess = -Hessian
        step = 1.0
        for _ in range(30):
            cand = loglik(a + step * delta[0], b + step * delta[1])
            if cand >= ll:
                a, b = a + step * delta[0], b + step * delta[1]
                ll = cand
                break
            step *= 0.5
        else:
            break
    return float(a), float(b)


def platt_apply(a: float, b: float, probs: np.ndarray) -> np.ndarray:
    z = _logit(np.asarray(probs, dtype=float))
    return 1.0 / (1.0 + np.exp(a + b * z))


# ---------------------------------------------------------------------------
# isotonic regression (pool adjacent violators)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsotonicMap:
    """Non-decreasing step map fitted on (prob, outcome) pairs."""

    thresholds: np.ndarray  # sorted unique predictor values
    fitted: np.ndarray      # non-decreasing fitted value per threshold

    def apply(self, probs) -> np.ndarray:
        probs = np.asarray(probs, dtype=float)
        idx = np.clip(np.searchsorted(self.thresholds, probs, side="right") - 1,
                      0, len(self.thresholds) - 1)
        return self.fitted[idx]


def isotonic_fit(probs: np.ndarray, outcomes: np.ndarray) -> IsotonicMap:
    """Least-squares monotone fit of outcomes on probs (exact PAV)."""
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if len(probs) < 2:
        raise ValueError("need at least 2 observations")
    order = np.argsort(probs, kind="stable")
    x, y = probs[order], outcomes[order]
    # average ties so the fitted map is a function of the predictor
    ux, inverse_idx, counts = np.unique(x, return_inverse=True,
                                        return_counts=True)
    sums = np.zeros(len(ux))
    np.add.at(sums, inverse_idx, y)
    means = sums / counts
    fitted = _pav(means, counts.astype(float))
    return IsotonicMap(thresholds=ux, fitted=fitted)


# ---------------------------------------------------------------------------
# quantile recalibration from empirical hit rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelMap:
    """Monotone remapping of nominal quantile levels alpha -> alpha_cal."""

    levels: np.ndarray
    mapped: np.ndarray

    def map_level(self, alpha) -> np.ndarray:
        return np.interp(alpha, self.levels, self.mapped)

    def apply(self, dist: PredictiveDistribution) -> PredictiveDistribution:
        target = np.clip(self.map_level(dist.levels), 1e-15, 1.0 - 1e-15)
        values = np.interp(target, dist.levels, dist.values)
        return PredictiveDistribution(levels=dist.levels,
                                      values=np.maximum.accumulate(values))


def quantile_recalibrate(levels: np.ndarray, hit_rates: np.ndarray) -> LevelMap:
    """Level map alpha -> alpha_cal chosen so realised coverage matches alpha.

    The empirical hit-rate curve is isotonic-projected, then inverted:
    alpha_cal(alpha) = h^{-1}(alpha), so that the hit rate of the remapped
    quantile equals the nominal level in sample.
    """
    levels = np.asarray(levels, dtype=float)
    rates = np.asarray(hit_rates, dtype=float)
    if levels.shape != rates.shape:
        raise ValueError("levels and hit_rates must have equal length")
    iso = _pav(rates, np.ones(len(rates)))
    # strictly increasing abscissae are needed to invert; nudge flats
    eps = 1e-12
    iso = np.maximum.accumulate(iso + eps * np.arange(len(iso)))
    mapped = np.interp(levels, iso, levels, left=levels[0], right=levels[-1])
    mapped = np.maximum.accumulate(mapped)
    return LevelMap(levels=levels, mapped=mapped)


# ---------------------------------------------------------------------------
# PIT remapping
# ---------------------------------------------------------------------------

def pit_remap_fit(past_pits: np.ndarray) -> PiecewiseMonotoneMap:
    """Monotone map psi = empirical CDF of past PITs (interpolated).

    Composing psi with the forecast CDF pushes future PITs toward
    uniformity.  Requires at least 100 past PIT values.
    """
    pits = np.asarray(past_pits, dtype=float)
    if len(pits) < MIN_PIT_SAMPLE:
        raise ValueError(
            f"need >= {MIN_PIT_SAMPLE} past PIT values, got {len(pits)}")
    srt = np.sort(pits)
    uniq, counts = np.unique(srt, return_counts=True)
    ranks = np.cumsum(counts) / (len(pits) + 1.0)
    xs = np.concatenate([[0.0], uniq, [1.0]])
    ys = np.concatenate([[0.0], ranks, [1.0]])
    keep = np.concatenate([[True], np.diff(xs) > 0])
    return PiecewiseMonotoneMap(xs[keep], np.maximum.accumulate(ys[keep]))
