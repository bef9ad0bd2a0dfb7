"""
test_inference.py - 승수 부트스트랩, 분위수, step-down 테스트
"""

import math

import numpy as np
import pytest

from core.estimation import PrecisionEstimate, default_lambda, estimate_precision
from core.inference import (
    BootstrapConfig, TestOutcome, bootstrap_multipliers, bootstrap_quantile, bootstrap_statistics,
    observation_products, rate_surrogate, step_down, step_down_from_stats,
)
from core.model import Dataset, PrecisionModel, chain_graph, sample
from error_handler import ConfigError, GraphStructureError


def identity_estimate(d: int) -> PrecisionEstimate:
    return PrecisionEstimate(np.eye(d), 0.1, np.eye(d))


class TestBootstrapStatistics:
    def test_constant_summands_give_zero(self):
        x = Dataset(np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]))
        stats = bootstrap_statistics(x, identity_estimate(2), [(1, 2)], BootstrapConfig(B=100))
        assert stats.shape == (100, 1)
        assert np.all(stats == 0.0)

    def test_hand_values(self):
        theta = np.array([[2.0, 0.5], [0.5, 1.0]])
        est = PrecisionEstimate(theta, 0.1, theta)
        x = Dataset(np.array([[1.0, 2.0], [3.0, -1.0]]))
        products = observation_products(x, est, [(1, 2)])
        assert products[:, 0] == pytest.approx([7.0, 2.25])
        cfg = BootstrapConfig(B=300, seed=4)
        zeta = bootstrap_multipliers(2, 300, 4)
        expected = (zeta[:, 0] * 7.0 + zeta[:, 1] * 2.25) / math.sqrt(2)
        assert np.allclose(bootstrap_statistics(x, est, [(1, 2)], cfg)[:, 0], expected)

    def test_deterministic_across_workers(self):
        data = sample(PrecisionModel(0.3, chain_graph(6)), 200, seed=1)
        est = estimate_precision(data, default_lambda(data.n, data.d))
        edges = [(1, 2), (2, 3), (4, 6)]
        serial = bootstrap_statistics(data, est, edges, BootstrapConfig(B=600, seed=9, n_jobs=1))
        parallel = bootstrap_statistics(data, est, edges, BootstrapConfig(B=600, seed=9, n_jobs=2))
        assert np.array_equal(serial, parallel)

    def test_empty_edges(self):
        x = Dataset(np.ones((4, 2)))
        with pytest.raises(GraphStructureError):
            bootstrap_statistics(x, identity_estimate(2), [], BootstrapConfig(B=100))

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            observation_products(Dataset(np.ones((4, 3))), identity_estimate(2), [(1, 2)])

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            BootstrapConfig(B=50)
        with pytest.raises(ConfigError):
            BootstrapConfig(alpha=1.0)


class TestQuantile:
    def test_order_statistic(self):
        stats = np.array([[1.0], [2.0], [3.0], [4.0]])
        assert bootstrap_quantile(stats, [0], 0.25) == 3.0

    def test_zero_stats(self):
        assert bootstrap_quantile(np.zeros((200, 3)), [0, 1, 2], 0.05) == 0.0

    def test_monotone_in_alpha_and_subset(self):
        stats = np.random.default_rng(0).standard_normal((1000, 5))
        assert bootstrap_quantile(stats, [0, 1], 0.01) >= bootstrap_quantile(stats, [0, 1], 0.1)
        assert bootstrap_quantile(stats, [0, 1], 0.05) <= bootstrap_quantile(stats, [0, 1, 2, 3], 0.05)

    def test_empty_subset(self):
        with pytest.raises(GraphStructureError):
            bootstrap_quantile(np.zeros((100, 2)), [], 0.05)


class TestStepDown:
    def test_two_round_replay(self):
        stats = np.column_stack([np.full(4, 7.0), np.full(4, 4.0), np.full(4, 1.0)])
        result = step_down_from_stats(stats, np.array([10.0, 5.0, 0.1]), alpha=0.25)
        assert result.rejected.tolist() == [True, True, False]
        assert result.quantiles == [7.0, 4.0, 1.0]
        assert result.rounds == 3

    def test_nothing_rejected(self):
        stats = np.ones((100, 3))
        result = step_down_from_stats(stats, np.zeros(3), alpha=0.05)
        assert not result.rejected.any()
        assert result.rounds == 1

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(2)
        stats = rng.standard_normal((500, 8))
        scaled = rng.uniform(0, 4, 8)
        strict = step_down_from_stats(stats, scaled, alpha=0.01).rejected
        loose = step_down_from_stats(stats, scaled, alpha=0.2).rejected
        assert np.all(loose[strict])

    def test_threshold_shift(self):
        stats = np.ones((100, 1))
        assert step_down_from_stats(stats, np.array([5.0]), 0.05, mu=1.0, n=4).rejected[0]
        assert not step_down_from_stats(stats, np.array([5.0]), 0.05, mu=2.5, n=4).rejected[0]
        with pytest.raises(ConfigError):
            step_down_from_stats(stats, np.array([5.0]), 0.05, mu=1.0)

    def test_strong_edge_rejected(self):
        data = sample(PrecisionModel(0.45, chain_graph(5)), 2000, seed=3)
        est = estimate_precision(data, default_lambda(data.n, data.d))
        outcome = step_down(data, est, [(2, 1)], BootstrapConfig(B=200, seed=1))
        assert isinstance(outcome, TestOutcome)
        assert outcome.reject
        assert outcome.rejected == outcome.witness == frozenset({(1, 2)})
        assert outcome.rounds == 1

    def test_outcome_record(self):
        data = sample(PrecisionModel(0.45, chain_graph(5)), 600, seed=4)
        est = estimate_precision(data, default_lambda(data.n, data.d))
        outcome = step_down(data, est, [(1, 2), (3, 4)], BootstrapConfig(B=200, seed=2))
        record = outcome.to_record()
        assert set(record) >= {'property', 'reject', 'alpha', 'mu', 'witness', 'rejected', 'rounds', 'quantiles'}
        assert record['witness'] == [[1, 2], [3, 4]]
        assert outcome.rejected <= outcome.witness
        assert outcome.reject == (outcome.rejected == outcome.witness)


def test_rate_surrogate():
    n, d, s = 400, 100, 3
    log_nd = math.log(n * d)
    expected = s * log_nd * math.sqrt(math.log(d) * log_nd) / math.sqrt(n)
    assert rate_surrogate(n, d, s) == pytest.approx(expected)
