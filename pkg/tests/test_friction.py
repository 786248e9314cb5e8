import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frical.friction import (
    FeasibleSet,
    FrictionModel,
    FrictionState,
    cost_total,
    feasible_contains,
    kappa,
    linear_rate,
    rolling_kappa,
)


def state(spread=2e-4, vol=0.02, volume=1.0):
    return FrictionState(spread=spread, volatility=vol, volume=volume)


class TestCostTotal:
    def test_zero_trade_is_free(self):
        m = FrictionModel(fee_rate=1e-4, impact_kind="quadratic", impact_coeff=0.5)
        assert cost_total(m, state(), np.zeros(3)) == 0.0

    def test_linear_terms_by_hand(self):
        # fee 1e-4 + spread 2e-4 on |dw|=0.1 -> 3.0e-5
        m = FrictionModel(fee_rate=1e-4)
        assert cost_total(m, state(spread=2e-4), np.array([0.1])) == pytest.approx(3.0e-5)

    def test_sqrt_impact_by_hand(self):
        # k=1, sigma=0.02, V=1, dw=0.04: impact = 0.02 * 0.04^1.5 = 1.6e-4
        m = FrictionModel(fee_rate=1e-4, spread_rate=2e-4,
                          impact_kind="sqrt_participation", impact_coeff=1.0)
        linear = 3e-4 * 0.04
        got = cost_total(m, state(vol=0.02, volume=1.0), np.array([0.04]))
        assert got == pytest.approx(linear + 1.6e-4)

    def test_rejects_non_finite_trade(self):
        m = FrictionModel()
        with pytest.raises(ValueError):
            cost_total(m, state(), np.array([np.nan]))

    def test_multiplier_scales_cost(self):
        m = FrictionModel(fee_rate=1e-4, impact_kind="quadratic", impact_coeff=0.3)
        dw = np.array([0.2, -0.1])
        c1 = cost_total(m, state(), dw)
        c3 = cost_total(m.with_multiplier(3.0), state(), dw)
        assert c3 == pytest.approx(3.0 * c1, rel=1e-12)

    @given(
        st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=4),
        st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=4),
        st.floats(0.0, 1.0),
        st.sampled_from(["none", "quadratic", "sqrt_participation"]),
    )
    @settings(max_examples=80, deadline=None)
    def test_convexity(self, d1, d2, lam, kind):
        n = min(len(d1), len(d2))
        a, b = np.array(d1[:n]), np.array(d2[:n])
        m = FrictionModel(fee_rate=1e-4, spread_rate=2e-4, impact_kind=kind,
                          impact_coeff=0.7)
        s = state()
        mix = cost_total(m, s, lam * a + (1 - lam) * b)
        hull = lam * cost_total(m, s, a) + (1 - lam) * cost_total(m, s, b)
        assert mix <= hull + 1e-12

    @given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=4))
    @settings(max_examples=60, deadline=None)
    def test_coercivity_floor(self, dws):
        # cost >= (fee + spread) * ||dw||_1 for every convex impact shape
        dw = np.array(dws)
        m = FrictionModel(fee_rate=1e-4, spread_rate=2e-4,
                          impact_kind="quadratic", impact_coeff=0.4)
        assert cost_total(m, state(), dw) >= 3e-4 * np.abs(dw).sum() - 1e-15


class TestKappa:
    def test_normalised_state_is_one(self):
        assert kappa(2e-4, 0.02, 2e-4, 0.02) == 1.0

    def test_homogeneous_in_spread(self):
        assert kappa(4e-4, 0.02, 2e-4, 0.02) == pytest.approx(2.0 * kappa(2e-4, 0.02, 2e-4, 0.02))

    def test_rejects_zero_normalizers(self):
        with pytest.raises(ValueError):
            kappa(1e-4, 0.01, 0.0, 0.01)

    def test_tercile_boundaries_match_sort_oracle(self):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(42)))
        spreads = np.exp(rng.normal(size=900)) * 1e-4
        vols = np.exp(rng.normal(size=900)) * 0.01
        k = rolling_kappa(spreads, vols, window=500)
        srt = np.sort(k)
        n = len(k)
        lo_oracle = srt[int(np.ceil(n / 3)) - 1]
        hi_oracle = srt[int(np.ceil(2 * n / 3)) - 1]
        lo, hi = np.quantile(k, [1 / 3, 2 / 3], method="inverted_cdf")
        assert lo == pytest.approx(lo_oracle)
        assert hi == pytest.approx(hi_oracle)


class TestFeasibleSet:
    def test_zero_turnover_always_feasible(self):
        fs = FeasibleSet(turnover_cap=0.1, leverage_cap=5.0, lower=-1, upper=1)
        w_prev = np.array([0.3, -0.2])
        ok, violated = feasible_contains(fs, w_prev, w_prev)
        assert ok and violated == []

    def test_turnover_violation_reported_by_name(self):
        fs = FeasibleSet(turnover_cap=0.1)
        ok, violated = feasible_contains(fs, np.array([0.15]), np.array([0.0]))
        assert not ok and "turnover_cap" in violated

    def test_budget_violation_beyond_tolerance(self):
        fs = FeasibleSet(budget=True)
        ok, violated = feasible_contains(fs, np.array([0.5, 0.499]), np.zeros(2))
        assert not ok and "budget" in violated

    def test_dimension_mismatch_raises(self):
        fs = FeasibleSet()
        with pytest.raises(ValueError):
            feasible_contains(fs, np.array([0.1, 0.2]), np.array([0.1]))

    def test_participation_cap(self):
        fs = FeasibleSet(participation_cap=0.01)
        vol = np.array([10.0])
        ok, violated = feasible_contains(fs, np.array([0.2]), np.array([0.0]), vol)
        assert not ok and "participation_cap" in violated

    def test_anchoring_check(self):
        fs = FeasibleSet(budget=True, lower=0.0, upper=0.4, turnover_cap=10.0)
        # box-projected w_prev cannot satisfy the budget with 2 assets
        with pytest.raises(ValueError):
            fs.assert_anchored(np.array([0.1, 0.1]))

    def test_rejects_nonpositive_caps(self):
        with pytest.raises(ValueError):
            FeasibleSet(turnover_cap=0.0)
        with pytest.raises(ValueError):
            FeasibleSet(leverage_cap=-1.0)


def test_linear_rate_uses_state_spread_when_unpinned():
    m = FrictionModel(fee_rate=1e-4)
    assert linear_rate(m, state(spread=5e-4)) == pytest.approx(6e-4)
    pinned = FrictionModel(fee_rate=1e-4, spread_rate=2e-4)
    assert linear_rate(pinned, state(spread=5e-4)) == pytest.approx(3e-4)
