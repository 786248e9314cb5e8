import numpy as np
import pytest
from scipy.stats import norm

from frical.distributions import (
    PredictiveDistribution,
    standard_levels,
    trapezoid_weights,
)
from frical.weights import (
    DiagnosticGrid,
    WeightSpec,
    compute_weights,
    default_grid,
    influence_coeffs,
    kappa_multiplier,
    level_cell_widths,
)


def normal_dist(mean=0.0, sd=1.0):
    lv = standard_levels()
    return PredictiveDistribution(levels=lv, values=mean + sd * norm.ppf(lv))


def grid_moments_under_reweighting(dist, j, eps):
    """Oracle: moments after removing eps*w_gap_j mass at the j-th grid level.

    The level-grid measure w is tilted to (1 + eps*w_j) * w - eps*w_j at
    index j, which keeps total mass one; moments are recomputed from the
    explicit weighted sums.
    """
    w = trapezoid_weights(dist.levels)
    wj = w[j]
    tilted = w * (1.0 + eps * wj)
    tilted[j] -= eps * wj
    mean = float(tilted @ dist.values)
    second = float(tilted @ (dist.values ** 2))
    return mean, second - mean * mean


class TestDiagnosticGrid:
    def test_default_covers_tails_and_center(self):
        g = default_grid()
        assert g.points == (0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95)

    def test_rejects_unsorted_points(self):
        with pytest.raises(ValueError):
            DiagnosticGrid(points=(0.5, 0.25))

    def test_rejects_levels_outside_unit_interval(self):
        with pytest.raises(ValueError):
            DiagnosticGrid(points=(0.0, 0.5))


class TestInfluenceCoeffs:
    def test_median_of_symmetric_distribution_has_zero_mean_influence(self):
        a, _, degen = influence_coeffs(normal_dist(), default_grid())
        assert not degen
        i_med = list(default_grid().points).index(0.50)
        assert a[i_med] == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_distribution_zeroed_with_flag(self):
        d = PredictiveDistribution(levels=[0.25, 0.5, 0.75], values=[0.3, 0.3, 0.3])
        a, b, degen = influence_coeffs(d, default_grid())
        assert degen
        assert np.all(a == 0) and np.all(b == 0)

    def test_finite_difference_moment_oracle(self):
        # reallocating eps*w_gap mass away from the u=0.9 state must move the
        # mean by a(0.9)*eps to first order, with quadratic error in eps
        d = normal_dist()
        grid = DiagnosticGrid(points=tuple(d.levels[[4, 49, 89]]))  # 0.05,0.5,0.9
        a, b, _ = influence_coeffs(d, grid)
        j = 89  # index of level 0.9 on the distribution grid
        mean0, var0 = d.mean, d.sd ** 2

        def errors(eps):
            mean1, var1 = grid_moments_under_reweighting(d, j, eps)
            return (abs((mean1 - mean0) - a[2] * eps),
                    abs((var1 - var0) - b[2] * eps))

        e_mu_1, e_var_1 = errors(1e-2)
        e_mu_2, e_var_2 = errors(5e-3)
        assert e_mu_1 < 1e-5 and e_var_1 < 1e-5
        # quadratic decay: halving eps divides the error by about four
        assert e_mu_2 <= 0.3 * e_mu_1 + 1e-14
        assert e_var_2 <= 0.3 * e_var_1 + 1e-14


class TestComputeWeights:
    def test_zero_exposure_zero_weights(self):
        a = np.array([0.5, -0.2])
        b = np.array([0.1, 0.3])
        spec = compute_weights(0.0, 2.0, a, b, 1.0)
        assert np.all(spec.weights == 0.0)

    def test_hand_evaluation(self):
        spec = compute_weights(0.5, 2.0, np.array([1.0]), np.array([0.0]), 1.0)
        assert spec.weights[0] == pytest.approx(0.5)

    def test_homogeneous_in_kappa(self):
        a = np.array([0.4, -0.1, 0.2])
        b = np.array([0.05, 0.2, -0.3])
        w1 = compute_weights(0.3, 1.5, a, b, 1.0).weights
        w2 = compute_weights(0.3, 1.5, a, b, 2.0).weights
        assert np.allclose(w2, 2.0 * w1)

    def test_weights_nonnegative_validated(self):
        with pytest.raises(ValueError):
            WeightSpec(a_coeff=np.zeros(1), b_coeff=np.zeros(1),
                       kappa_u=np.ones(1), weights=np.array([-0.1]))


class TestValueDeltaConsistency:
    def test_predicted_value_change_matches_resolve(self):
        # interior quadratic instance: predicted dV = w'dmu - (gamma/2)<ww', dSigma>
        # must match the re-solved objective change with quadratic error decay
        from frical.distributions import CovarianceEstimate
        from frical.friction import FeasibleSet
        from frical.optimizer import DecisionProblem, solve_constrained

        rng = np.random.Generator(np.random.Philox(key=np.uint64(99)))
        wide = FeasibleSet(lower=-1e6, upper=1e6, turnover_cap=1e6,
                           leverage_cap=1e6)
        n = 2
        sigma = np.array([[1.0, 0.3], [0.3, 0.7]])
        mu = np.array([0.05, -0.02])
        gamma, eta2 = 2.0, 0.2
        w_prev = np.array([0.1, 0.0])

        def value(mu_, sig_):
            p = DecisionProblem(mu=mu_, sigma=CovarianceEstimate(matrix=sig_),
                                gamma=gamma, eta_l1=0.0, eta_quad=eta2,
                                w_prev=w_prev, feasible=wide)
            return solve_constrained(p).objective_value

        p0 = DecisionProblem(mu=mu, sigma=CovarianceEstimate(matrix=sigma),
                             gamma=gamma, eta_l1=0.0, eta_quad=eta2,
                             w_prev=w_prev, feasible=wide)
        w0 = solve_constrained(p0).weights
        v0 = value(mu, sigma)

        d_mu = rng.normal(scale=0.01, size=n)
        raw = rng.normal(scale=0.01, size=(n, n))
        d_sig = 0.5 * (raw + raw.T)

        def err(scale):
            dv_actual = value(mu + scale * d_mu, sigma + scale * d_sig) - v0
            dv_pred = (w0 @ (scale * d_mu)
                       - 0.5 * gamma * float(w0 @ ((scale * d_sig) @ w0)))
            return abs(dv_actual - dv_pred)

        e1, e2 = err(1.0), err(0.5)
        assert e1 < 1e-3
        assert e2 <= 0.3 * e1 + 1e-12


class TestKappaMultiplier:
    def test_constant_by_default(self):
        k = kappa_multiplier(1.7, default_grid())
        assert np.all(k == 1.7)

    def test_tail_boost_doubles_tail_levels(self):
        g = default_grid()
        k = kappa_multiplier(1.0, g, tail_boost=True)
        u = g.array
        assert np.all(k[(u <= 0.1) | (u >= 0.9)] == 2.0)
        assert np.all(k[(u > 0.1) & (u < 0.9)] == 1.0)

    def test_cell_widths_positive(self):
        w = level_cell_widths(normal_dist(), default_grid())
        assert np.all(w > 0)
