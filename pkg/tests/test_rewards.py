import numpy as np
import pytest

from agentscale.rewards import (
    RewardParams,
    breakdown,
    shared_reward,
    total_reward,
    utilization_reward,
    weighted_response_time,
)

from .oracles import reward_oracle

PARAMS = RewardParams()  # band [30, 60], alpha 5, beta 0.5


class TestUtilizationReward:
    def test_in_band_value(self):
        assert utilization_reward(45.0, 99.0, PARAMS) == pytest.approx(2.5)

    def test_in_band_ignores_previous(self):
        assert utilization_reward(45.0, 0.0, PARAMS) == utilization_reward(45.0, 80.0, PARAMS)

    def test_rising_below_band_clamped(self):
        assert utilization_reward(20.0, 5.0, PARAMS) == pytest.approx(1.0)  # min(1.5, 1)

    def test_rising_below_band_unclamped(self):
        assert utilization_reward(20.0, 15.0, PARAMS) == pytest.approx(0.5)

    def test_falling_below_band_clamped(self):
        assert utilization_reward(5.0, 50.0, PARAMS) == pytest.approx(-1.0)

    def test_above_band_is_zero(self):
        assert utilization_reward(80.0, 10.0, PARAMS) == 0.0

    def test_band_boundaries_inclusive(self):
        assert utilization_reward(30.0, 0.0, PARAMS) == pytest.approx(2.0)
        assert utilization_reward(60.0, 0.0, PARAMS) == pytest.approx(3.0)

    def test_in_band_monotone_and_bounded(self):
        low = 1.0 + PARAMS.eta_low / (PARAMS.eta_high - PARAMS.eta_low)
        high = 1.0 + PARAMS.eta_high / (PARAMS.eta_high - PARAMS.eta_low)
        previous = None
        for eta in np.linspace(30.0, 60.0, 31):
            rho = utilization_reward(float(eta), 0.0, PARAMS)
            assert low <= rho <= high
            if previous is not None:
                assert rho > previous
            previous = rho

    def test_below_band_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            eta = float(rng.uniform(0, 30))
            prev = float(rng.uniform(0, 100))
            assert -1.0 <= utilization_reward(eta, prev, PARAMS) <= 1.0


class TestWeightedResponseTime:
    def test_hand_example(self):
        pairs = [(0, 0.1), (1, 0.1), (2, 0.1)]
        assert weighted_response_time(pairs) == pytest.approx(0.6)

    def test_empty_set(self):
        assert weighted_response_time([]) == 0.0

    def test_single_zero_priority(self):
        assert weighted_response_time([(0, 0.25)]) == pytest.approx(0.25)

    def test_priority_raises_weight(self):
        low = weighted_response_time([(0, 0.2), (0, 0.1)])
        high = weighted_response_time([(2, 0.2), (0, 0.1)])
        assert high > low


class TestSharedReward:
    def test_zero_point(self):
        assert shared_reward(0.01, PARAMS) == pytest.approx(1.0)

    def test_hand_values(self):
        assert shared_reward(0.21, PARAMS) == pytest.approx(0.0)
        assert shared_reward(1.01, PARAMS) == pytest.approx(-4.0)

    def test_not_clipped_by_default(self):
        assert shared_reward(100.0, PARAMS) == pytest.approx(1.0 - 5.0 * (100.0 - 0.01))

    def test_optional_floor(self):
        guarded = RewardParams(shared_floor=-10.0)
        assert shared_reward(100.0, guarded) == -10.0
        assert shared_reward(0.01, guarded) == pytest.approx(1.0)

    def test_affine_decreasing_slope(self):
        r1 = shared_reward(0.5, PARAMS)
        r2 = shared_reward(0.7, PARAMS)
        assert (r2 - r1) / 0.2 == pytest.approx(-PARAMS.alpha)


class TestTotalReward:
    def test_hand_values(self):
        assert total_reward(2.5, 1.0, PARAMS) == pytest.approx(2.25)
        assert total_reward(0.0, 0.0, PARAMS) == 0.0
        assert total_reward(-1.0, 1.0, PARAMS) == pytest.approx(0.5)

    def test_breakdown_identity(self):
        rb = breakdown(eta=45.0, eta_prev=40.0, omega=0.3, params=PARAMS)
        assert rb.r_total == PARAMS.beta * rb.rho + rb.r_shared


class TestParamsValidation:
    def test_band_ordering(self):
        with pytest.raises(ValueError):
            RewardParams(eta_low=60, eta_high=30)

    def test_beta_range(self):
        with pytest.raises(ValueError):
            RewardParams(beta=0.0)
        with pytest.raises(ValueError):
            RewardParams(beta=1.5)


def test_matches_independent_oracle():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        eta = float(rng.uniform(0, 100))
        eta_prev = float(rng.uniform(0, 100))
        pairs = [
            (int(rng.integers(0, 3)), float(rng.uniform(0, 2.0)))
            for _ in range(int(rng.integers(0, 5)))
        ]
        rho, omega, r_s, r_total = reward_oracle(
            eta, eta_prev, pairs, PARAMS.eta_low, PARAMS.eta_high, PARAMS.alpha, PARAMS.beta
        )
        assert abs(utilization_reward(eta, eta_prev, PARAMS) - rho) <= 1e-12
        got_omega = weighted_response_time(pairs)
        assert abs(got_omega - omega) <= 1e-12
        assert abs(shared_reward(got_omega, PARAMS) - r_s) <= 1e-12
        assert abs(total_reward(rho, r_s, PARAMS) - r_total) <= 1e-12
