"""Friction-adjusted mean-variance decisions under hard constraints.

The programme solved here, in minimisation form, is

    min_w  -mu'w + (gamma/2) w'Sigma w + eta ||w - w_prev||_1
           + (eta2/2) ||w - w_prev||_2^2
    s.t.   w in the feasible set (budget, box, turnover, leverage,
           participation caps).

The solver is a proximal-gradient scheme: a gradient step on the smooth
quadratic part with a fixed step from its Lipschitz constant, followed by
the proximal map of the L1 trade penalty plus the feasible-set indicator.
The proximal map is an exact soft-threshold when the thresholded point is
feasible, a closed-form interval solution for a single asset, and a cyclic
Dykstra iteration over the component sets otherwise.  Everything is
deterministic: warm start at the previous weights, fixed iteration order,
no randomisation.

On non-convergence the decision falls back to the previous weights; on an
infeasible constraint system the weights are projected onto a pre-specified
relaxed set that drops the turnover cap but keeps budget and bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import CovarianceEstimate
from .friction import FeasibleSet, feasible_contains

KKT_TOL = 1e-6
MAX_ITER = 10_000
_STEP_TOL = 1e-13
_ACTIVE_TOL = 1e-9


class SingularProblemError(ValueError):
    """The curvature matrix gamma*Sigma + eta2*I is numerically singular."""


@dataclass(frozen=True)
class DecisionProblem:
    mu: np.ndarray
    sigma: CovarianceEstimate
    gamma: float
    eta_l1: float
    eta_quad: float
    w_prev: np.ndarray
    feasible: FeasibleSet
    volume: np.ndarray | None = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        w_prev = np.atleast_1d(np.asarray(self.w_prev, dtype=float))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "w_prev", w_prev)
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.eta_l1 < 0 or self.eta_quad < 0:
            raise ValueError("cost parameters must be >= 0")
        if self.sigma.n_assets != len(mu) or len(w_prev) != len(mu):
            raise ValueError("mu, sigma and w_prev dimensions do not match")

    @property
    def n(self) -> int:
        return len(self.mu)

    def curvature(self) -> np.ndarray:
        return self.gamma * self.sigma.shrunk() + self.eta_quad * np.eye(self.n)

    def smooth_grad(self, w: np.ndarray) -> np.ndarray:
        return (-self.mu + self.gamma * (self.sigma.shrunk() @ w)
                + self.eta_quad * (w - self.w_prev))

    def objective_max_form(self, w: np.ndarray) -> float:
        """Forecast-implied objective net of planned costs at ``w``."""
        dw = w - self.w_prev
        quad = 0.5 * self.gamma * float(w @ (self.sigma.shrunk() @ w))
        return (float(self.mu @ w) - quad
                - self.eta_l1 * float(np.sum(np.abs(dw)))
                - 0.5 * self.eta_quad * float(dw @ dw))


@dataclass(frozen=True)
class DecisionOutcome:
    weights: np.ndarray
    delta_w: np.ndarray
    objective_value: float
    turnover: float
    kkt_residual: float
    multipliers: dict
    binding: dict
    status: str  # optimal | fallback_previous | infeasible_relaxed
    iterations: int = 0

    @property
    def any_binding(self) -> bool:
        return any(self.binding.values())


@dataclass(frozen=True)
class KKTReport:
    applicable: bool
    stationarity: float = np.nan
    primal: float = np.nan
    dual: float = np.nan
    complementarity: float = np.nan

    @property
    def max_residual(self) -> float:
        if not self.applicable:
            return np.nan
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


def solve_closed_form(mu: np.ndarray, sigma: np.ndarray, gamma: float,
                      eta_quad: float, w_prev: np.ndarray) -> np.ndarray:
    """Unconstrained stationary point (gamma*Sigma + eta2*I)^-1 (mu + eta2*w_prev)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    w_prev = np.atleast_1d(np.asarray(w_prev, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    a = gamma * sigma + eta_quad * np.eye(len(mu))
    try:
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > 1e14:
            raise np.linalg.LinAlgError
        return np.linalg.solve(a, mu + eta_quad * w_prev)
    except np.linalg.LinAlgError as exc:
        raise SingularProblemError(
            "gamma*Sigma + eta_quad*I is singular or too ill-conditioned "
            "to invert; increase eta_quad or regularise Sigma") from exc


def _soft_threshold(z: np.ndarray, center: np.ndarray, thresh: float) -> np.ndarray:
    d = z - center
    return center + np.sign(d) * np.maximum(np.abs(d) - thresh, 0.0)


def _project_l1_ball(x: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {v : ||v||_1 <= radius}."""
    if radius == np.inf or np.sum(np.abs(x)) <= radius:
        return x.copy()
    mag = np.sort(np.abs(x))[::-1]
    css = np.cumsum(mag)
    k = np.arange(1, len(x) + 1)
    usable = mag - (css - radius) / k > 0
    rho = int(np.max(np.nonzero(usable)[0]))
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def _solve_interval_1d(problem: DecisionProblem, lo: float, hi: float) -> float:
    """Exact single-asset solution on the interval [lo, hi].

    The objective is strictly convex piecewise-quadratic in one variable;
    the minimiser is the soft-thresholded stationary point clipped to the
    interval.
    """
    a = problem.gamma * problem.sigma.shrunk()[0, 0] + problem.eta_quad
    mu = problem.mu[0]
    wp = problem.w_prev[0]
    b = mu + problem.eta_quad * wp
    # stationary candidates for trade sign +1 / -1, else no trade
    w_plus = (b - problem.eta_l1) / a
    w_minus = (b + problem.eta_l1) / a
    if w_plus > wp:
        w_star = w_plus
    elif w_minus < wp:
        w_star = w_minus
    else:
        w_star = wp
    return float(min(max(w_star, lo), hi))


def _prox_sets(problem: DecisionProblem) -> list:
    """Proximal operators of the L1 penalty and each feasible-set component."""
    n = problem.n
    fs = problem.feasible
    lo, hi = fs.bounds(n)
    wp = problem.w_prev
    ops = []
    if problem.eta_l1 > 0:
        ops.append(("l1", None))
    ops.append(("box", (lo, hi)))
    if fs.budget:
        ops.append(("budget", None))
    if fs.turnover_cap != np.inf:
        ops.append(("turnover", fs.turnover_cap))
    if fs.leverage_cap != np.inf:
        ops.append(("leverage", fs.leverage_cap))
    md = fs.max_delta(problem.volume, n)
    if md is not None:
        ops.append(("participation", md))
    return ops


def _apply_prox(kind: str, arg, z: np.ndarray, problem: DecisionProblem,
                step: float) -> np.ndarray:
    wp = problem.w_prev
    if kind == "l1":
        return _soft_threshold(z, wp, step * problem.eta_l1)
    if kind == "box":
        lo, hi = arg
        return np.clip(z, lo, hi)
    if kind == "budget":
        n = len(z)
        return z - (np.sum(z) - 1.0) / n
    if kind == "turnover":
        return wp + _project_l1_ball(z - wp, arg)
    if kind == "leverage":
        return _project_l1_ball(z, arg)
    if kind == "participation":
        return wp + np.clip(z - wp, -arg, arg)
    raise AssertionError(kind)


def _prox_dykstra(z: np.ndarray, problem: DecisionProblem, step: float,
                  max_cycles: int = 500, tol: float = 1e-12) -> np.ndarray:
    """Proximal map of the L1 penalty plus feasible-set indicator via Dykstra.

    Cyclic Dykstra over the component proxes converges to the prox of the
    sum for convex components.
    """
    ops = _prox_sets(problem)
    x = z.copy()
    corrections = [np.zeros_like(z) for _ in ops]
    for _ in range(max_cycles):
        x_old = x.copy()
        for i, (kind, arg) in enumerate(ops):
            y = x + corrections[i]
            x = _apply_prox(kind, arg, y, problem, step)
            corrections[i] = y - x
        if np.max(np.abs(x - x_old)) <= tol * max(1.0, np.max(np.abs(x))):
            break
    return x


def _prox_step(z: np.ndarray, problem: DecisionProblem, step: float) -> np.ndarray:
    candidate = _soft_threshold(z, problem.w_prev, step * problem.eta_l1)
    ok, _ = feasible_contains(problem.feasible, candidate, problem.w_prev,
                              problem.volume, tol=0.0)
    if ok:
        return candidate
    if problem.n == 1:
        fs = problem.feasible
        lo, hi = fs.bounds(1)
        wp = problem.w_prev[0]
        lo_all = max(lo[0], wp - fs.turnover_cap, -fs.leverage_cap)
        hi_all = min(hi[0], wp + fs.turnover_cap, fs.leverage_cap)
        md = fs.max_delta(problem.volume, 1)
        if md is not None:
            lo_all = max(lo_all, wp - md[0])
            hi_all = min(hi_all, wp + md[0])
        w = _soft_threshold(z, problem.w_prev, step * problem.eta_l1)[0]
        return np.array([min(max(w, lo_all), hi_all)])
    return _prox_dykstra(z, problem, step)


def _binding_flags(problem: DecisionProblem, w: np.ndarray,
                   tol: float = 1e-7) -> dict:
    fs = problem.feasible
    n = problem.n
    lo, hi = fs.bounds(n)
    dw = w - problem.w_prev
    flags = {
        "turnover_cap": fs.turnover_cap != np.inf
        and np.sum(np.abs(dw)) >= fs.turnover_cap - tol,
        "leverage_cap": fs.leverage_cap != np.inf
        and np.sum(np.abs(w)) >= fs.leverage_cap - tol,
        "lower_bound": bool(np.any(w <= lo + tol)),
        "upper_bound": bool(np.any(w >= hi - tol)),
    }
    md = fs.max_delta(problem.volume, n)
    flags["participation_cap"] = md is not None and bool(
        np.any(np.abs(dw) >= md - tol))
    return flags


def _recover_multipliers(problem: DecisionProblem, w: np.ndarray,
                         binding: dict) -> dict:
    """Multipliers from stationarity on the traded coordinates.

    For coordinates with a non-zero trade and no active bound, stationarity
    reads  grad_i + (eta + lam_tau) s_i + lam_L u_i + nu = 0  with
    s_i = sign(dw_i), u_i = sign(w_i).  The active multipliers are
    recovered by least squares over those coordinates and clipped at zero.
    """
    g = problem.smooth_grad(w)
    dw = w - problem.w_prev
    fs = problem.feasible
    lo, hi = fs.bounds(problem.n)
    at_bound = (w <= lo + _ACTIVE_TOL) | (w >= hi - _ACTIVE_TOL)
    free = (np.abs(dw) > _ACTIVE_TOL) & ~at_bound
    unknowns = []  # (name, column)
    if binding.get("turnover_cap"):
        unknowns.append(("turnover_cap", np.sign(dw)))
    if binding.get("leverage_cap"):
        unknowns.append(("leverage_cap", np.sign(w)))
    if fs.budget:
        unknowns.append(("budget", np.ones(problem.n)))
    out = {"turnover_cap": 0.0, "leverage_cap": 0.0, "budget": 0.0}
    if not np.any(free):
        return out
    rhs = -(g + problem.eta_l1 * np.sign(dw))[free]
    if unknowns:
        cols = np.stack([c[free] for _, c in unknowns], axis=1)
        sol, *_ = np.linalg.lstsq(cols, rhs, rcond=None)
        for (name, _), val in zip(unknowns, sol):
            if name == "budget":
                out[name] = float(val)
            else:
                out[name] = float(max(val, 0.0))
    return out


def _stationarity_residual(problem: DecisionProblem, w: np.ndarray,
                           multipliers: dict) -> float:
    """Distance from zero to the subdifferential of the Lagrangian at w."""
    g = problem.smooth_grad(w)
    dw = w - problem.w_prev
    fs = problem.feasible
    lo, hi = fs.bounds(problem.n)
    lam_t = multipliers.get("turnover_cap", 0.0)
    lam_l = multipliers.get("leverage_cap", 0.0)
    nu = multipliers.get("budget", 0.0)
    eta_eff = problem.eta_l1 + lam_t
    res = np.zeros(problem.n)
    for i in range(problem.n):
        base = g[i] + nu
        # interval of values the nonsmooth subdifferential can contribute
        if abs(dw[i]) > _ACTIVE_TOL:
            lo_c = hi_c = eta_eff * np.sign(dw[i])
        else:
            lo_c, hi_c = -eta_eff, eta_eff
        if abs(w[i]) > _ACTIVE_TOL:
            lo_c += lam_l * np.sign(w[i])
            hi_c += lam_l * np.sign(w[i])
        else:
            lo_c -= lam_l
            hi_c += lam_l
        # box normal cone widens the admissible interval one-sidedly
        if w[i] >= hi[i] - _ACTIVE_TOL:
            hi_c = np.inf
        if w[i] <= lo[i] + _ACTIVE_TOL:
            lo_c = -np.inf
        target = -base
        if target < lo_c:
            res[i] = lo_c - target
        elif target > hi_c:
            res[i] = target - hi_c
    return float(np.max(np.abs(res))) if problem.n else 0.0


def _complementarity_residual(problem: DecisionProblem, w: np.ndarray,
                              multipliers: dict) -> float:
    dw = w - problem.w_prev
    fs = problem.feasible
    out = 0.0
    if fs.turnover_cap != np.inf:
        out = max(out, abs(multipliers.get("turnover_cap", 0.0)
                           * (np.sum(np.abs(dw)) - fs.turnover_cap)))
    if fs.leverage_cap != np.inf:
        out = max(out, abs(multipliers.get("leverage_cap", 0.0)
                           * (np.sum(np.abs(w)) - fs.leverage_cap)))
    return float(out)


def _finish(problem: DecisionProblem, w: np.ndarray, status: str,
            iterations: int) -> DecisionOutcome:
    dw = w - problem.w_prev
    if status == "optimal":
        binding = _binding_flags(problem, w)
        multipliers = _recover_multipliers(problem, w, binding)
        kkt = _stationarity_residual(problem, w, multipliers)
    else:
        binding = _binding_flags(problem, w)
        multipliers = {"turnover_cap": 0.0, "leverage_cap": 0.0, "budget": 0.0}
        kkt = np.nan
    return DecisionOutcome(
        weights=w,
        delta_w=dw,
        objective_value=problem.objective_max_form(w),
        turnover=float(np.sum(np.abs(dw))),
        kkt_residual=kkt,
        multipliers=multipliers,
        binding=binding,
        status=status,
        iterations=iterations,
    )


def _relaxed_projection(problem: DecisionProblem) -> np.ndarray:
    """Projection of w_prev onto the relaxed set (turnover cap dropped)."""
    fs = problem.feasible
    relaxed = FeasibleSet(budget=fs.budget, lower=fs.lower, upper=fs.upper,
                          turnover_cap=np.inf, leverage_cap=fs.leverage_cap,
                          participation_cap=None)
    relaxed_problem = DecisionProblem(
        mu=np.zeros(problem.n), sigma=problem.sigma, gamma=problem.gamma,
        eta_l1=0.0, eta_quad=problem.eta_quad, w_prev=problem.w_prev,
        feasible=relaxed, volume=None)
    return _prox_dykstra(problem.w_prev.copy(), relaxed_problem, 1.0)


def solve_constrained(problem: DecisionProblem,
                      max_iter: int = MAX_ITER) -> DecisionOutcome:
    """Solve the friction-adjusted decision problem over the feasible set."""
    n = problem.n
    fs = problem.feasible
    lo, hi = fs.bounds(n)
    w_prev = problem.w_prev

    anchor = np.clip(w_prev, lo, hi)
    ok, violated = feasible_contains(fs, anchor, w_prev, problem.volume)
    if not ok:
        w = _relaxed_projection(problem)
        ok2, _ = feasible_contains(fs, w, w_prev, problem.volume, tol=1e-7)
        status = "optimal" if ok2 else "infeasible_relaxed"
        if status == "infeasible_relaxed":
            return _finish(problem, w, "infeasible_relaxed", 0)

    if n == 1:
        lo_all = max(lo[0], w_prev[0] - fs.turnover_cap, -fs.leverage_cap)
        hi_all = min(hi[0], w_prev[0] + fs.turnover_cap, fs.leverage_cap)
        md = fs.max_delta(problem.volume, 1)
        if md is not None:
            lo_all = max(lo_all, w_prev[0] - md[0])
            hi_all = min(hi_all, w_prev[0] + md[0])
        if lo_all > hi_all:
            w = _relaxed_projection(problem)
            return _finish(problem, w, "infeasible_relaxed", 0)
        w = np.array([_solve_interval_1d(problem, lo_all, hi_all)])
        return _finish(problem, w, "optimal", 1)

    curvature = problem.curvature()
    lipschitz = float(np.linalg.eigvalsh(curvature)[-1])
    if lipschitz <= 0 or not np.isfinite(lipschitz):
        return _finish(problem, w_prev.copy(), "fallback_previous", 0)
    step = 1.0 / lipschitz

    w = anchor.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = w - step * problem.smooth_grad(w)
        w_new = _prox_step(z, problem, step)
        change = np.max(np.abs(w_new - w))
        w = w_new
        if change <= _STEP_TOL * max(1.0, np.max(np.abs(w))):
            converged = True
            break

    if not converged:
        # accept the iterate if it already satisfies the KKT tolerance
        binding = _binding_flags(problem, w)
        multipliers = _recover_multipliers(problem, w, binding)
        if _stationarity_residual(problem, w, multipliers) <= KKT_TOL:
            return _finish(problem, w, "optimal", it)
        return _finish(problem, w_prev.copy(), "fallback_previous", it)
    return _finish(problem, w, "optimal", it)


def kkt_report(problem: DecisionProblem, outcome: DecisionOutcome) -> KKTReport:
    """First-order optimality residuals for an optimal outcome."""
    if outcome.status != "optimal":
        return KKTReport(applicable=False)
    w = outcome.weights
    multipliers = outcome.multipliers
    ok, violated = feasible_contains(problem.feasible, w, problem.w_prev,
                                     problem.volume, tol=0.0)
    primal = 0.0
    if violated:
        fs = problem.feasible
        lo, hi = fs.bounds(problem.n)
        dw = w - problem.w_prev
        primal = max(
            abs(np.sum(w) - 1.0) if fs.budget else 0.0,
            float(np.max(np.maximum(lo - w, 0.0))),
            float(np.max(np.maximum(w - hi, 0.0))),
            max(np.sum(np.abs(dw)) - fs.turnover_cap, 0.0)
            if fs.turnover_cap != np.inf else 0.0,
            max(np.sum(np.abs(w)) - fs.leverage_cap, 0.0)
            if fs.leverage_cap != np.inf else 0.0,
        )
    dual = max(0.0, -multipliers.get("turnover_cap", 0.0),
               -multipliers.get("leverage_cap", 0.0))
    return KKTReport(
        applicable=True,
        stationarity=_stationarity_residual(problem, w, multipliers),
        primal=float(primal),
        dual=float(dual),
        complementarity=_complementarity_residual(problem, w, multipliers),
    )
