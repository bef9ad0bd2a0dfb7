"""
test_witness.py - 데이터 분할, 증인 탐색, 증인 검정, 클릭 탐지 테스트
"""

import math

import numpy as np
import pytest

from core.estimation import PrecisionEstimate, default_lambda, estimate_precision
from core.graphs import Graph, GraphProperty, PropertySpec
from core.inference import BootstrapConfig
from core.model import Dataset, PrecisionModel, chain_graph, chord_graph, sample
from core.witness import (
    WitnessTestSpec, clique_detection_test, clique_threshold, find_witness, run_witness_test, split,
)
from error_handler import ConfigError, SubsetLimitError
from harness import NULL_STREAM, create_scenario


def estimate_from(matrix: np.ndarray) -> PrecisionEstimate:
    matrix = np.asarray(matrix, dtype=float)
    return PrecisionEstimate(matrix, 0.1, matrix)


def random_estimate(d: int, seed: int) -> PrecisionEstimate:
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.uniform(-1.0, 1.0, (d, d)), 1)
    return estimate_from(upper + upper.T + np.eye(d))


def planted_clique_data(d: int, members, theta: float, n: int, seed: int) -> Dataset:
    sigma = np.eye(d)
    idx = np.array(members) - 1
    sigma[np.ix_(idx, idx)] = (1 - theta) * np.eye(len(idx)) + theta
    rng = np.random.default_rng(seed)
    return Dataset(rng.multivariate_normal(np.zeros(d), sigma, size=n))


class TestSplit:
    def test_odd_sizes(self):
        x = Dataset(np.arange(14, dtype=float).reshape(7, 2))
        first, second = split(x)
        assert (first.n, second.n) == (3, 4)
        assert np.array_equal(first.x, x.x[:3])

    def test_too_small(self):
        with pytest.raises(ConfigError):
            split(Dataset(np.ones((3, 2))))

    def test_shuffle_deterministic(self):
        x = Dataset(np.arange(40, dtype=float).reshape(20, 2))
        a1, _ = split(x, shuffle=True, seed=5)
        a2, _ = split(x, shuffle=True, seed=5)
        assert np.array_equal(a1.x, a2.x)
        assert not np.array_equal(a1.x, x.x[:10])


class TestFindWitness:
    def test_spanning_tree_example(self):
        est = estimate_from([[1.0, 0.9, 0.5], [0.9, 1.0, 0.8], [0.5, 0.8, 1.0]])
        witness = find_witness(est, PropertySpec(GraphProperty.CONNECTIVITY))
        assert witness == frozenset({(1, 2), (2, 3)})

    def test_components_equal_to_d_is_empty(self):
        est = random_estimate(6, seed=0)
        assert find_witness(est, PropertySpec(GraphProperty.COMPONENTS, 6)) == frozenset()

    def test_planted_cycle(self):
        est = estimate_from(PrecisionModel(0.3, chord_graph(8, 5)).matrix)
        witness = find_witness(est, PropertySpec(GraphProperty.CYCLE))
        assert witness == frozenset({(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)})

    @pytest.mark.parametrize("prop", [
        PropertySpec(GraphProperty.CONNECTIVITY),
        PropertySpec(GraphProperty.COMPONENTS, 3),
        PropertySpec(GraphProperty.CYCLE),
        PropertySpec(GraphProperty.TRIANGLE),
        PropertySpec(GraphProperty.SAP, 2),
        PropertySpec(GraphProperty.MAX_DEGREE, 2),
    ])
    def test_witness_is_alternative(self, prop):
        for seed in range(10):
            witness = find_witness(random_estimate(8, seed), prop)
            assert prop.alternative(Graph(8, witness))

    def test_clique_has_no_witness(self):
        with pytest.raises(ConfigError):
            find_witness(random_estimate(5, 0), PropertySpec(GraphProperty.CLIQUE, 3))


class TestNullWitness:
    """귀무 그래프에서 뽑힌 증인에는 항상 Θ_e = 0 인 간선이 있다"""

    @pytest.mark.parametrize("name", ['connectivity', 'cycle'])
    def test_witness_contains_true_zero(self, name):
        scenario = create_scenario(name)
        for seed in range(20):
            graph = scenario.draw(NULL_STREAM, 15, np.random.default_rng(seed))
            data = sample(PrecisionModel(0.4, graph), 200, seed=100 + seed)
            first, _ = split(data)
            est1 = estimate_precision(first, default_lambda(data.n, data.d))
            witness = find_witness(est1, scenario.prop)
            assert witness - graph.edges


class TestWitnessTest:
    def test_components_equal_to_d_out_of_range(self):
        data = sample(PrecisionModel(0.3, chain_graph(5)), 200, seed=0)
        with pytest.raises(ConfigError):
            run_witness_test(data, WitnessTestSpec(PropertySpec(GraphProperty.COMPONENTS, 5)))

    def test_default_lambda_uses_full_sample(self):
        data = sample(PrecisionModel(0.3, chain_graph(6)), 400, seed=7)
        spec = WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY), bootstrap=BootstrapConfig(B=200, seed=1))
        outcome = run_witness_test(data, spec)
        assert outcome.extras['lambda'] == pytest.approx(1.5 * math.sqrt(math.log(6) / 400))

    def test_connected_chain_rejected(self):
        data = sample(PrecisionModel(0.45, chain_graph(10)), 1000, seed=1)
        spec = WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY), bootstrap=BootstrapConfig(B=300, seed=2))
        outcome = run_witness_test(data, spec)
        assert outcome.witness == chain_graph(10).edges
        assert outcome.reject
        assert outcome.extras['lambda'] > 0

    def test_independent_null_not_rejected(self):
        data = sample(PrecisionModel(0.0, Graph.empty(10)), 400, seed=3)
        spec = WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY), bootstrap=BootstrapConfig(B=300, seed=4))
        outcome = run_witness_test(data, spec)
        assert len(outcome.witness) == 9
        assert not outcome.reject

    def test_threshold_level_reports_components(self):
        data = sample(PrecisionModel(0.45, chain_graph(8)), 800, seed=5)
        spec = WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY_AT_LEVEL), mu=0.05,
                               bootstrap=BootstrapConfig(B=200, seed=6))
        outcome = run_witness_test(data, spec)
        assert outcome.mu == 0.05
        assert 1 <= outcome.extras['rejected_components'] <= 8

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY), mu=0.1)
        with pytest.raises(ConfigError):
            WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY), lambda_policy='bic')
        with pytest.raises(ConfigError):
            WitnessTestSpec(PropertySpec(GraphProperty.CONNECTIVITY), alpha=0.0)

    def test_parameter_out_of_range(self):
        data = sample(PrecisionModel(0.2, chain_graph(5)), 100, seed=0)
        with pytest.raises(ConfigError):
            run_witness_test(data, WitnessTestSpec(PropertySpec(GraphProperty.COMPONENTS, 9)))


class TestCliqueDetection:
    def test_threshold_formula(self):
        n, d, s, alpha = 2000, 12, 3, 0.05
        spread = (math.sqrt(2) + 1) * math.sqrt((s * math.log(math.e * d / s) + math.log(2 / alpha)) / n)
        assert clique_threshold(n, d, s, alpha) == pytest.approx((1 - spread) ** 2)

    def test_threshold_clamped(self):
        assert clique_threshold(5, 100, 10, 0.05) == 0.0

    def test_full_subset_is_min_eigenvalue(self):
        x = Dataset(np.random.default_rng(0).standard_normal((100, 4)))
        result = clique_detection_test(x, 4, 0.05)
        assert result.n_subsets == 1
        assert result.subset == (1, 2, 3, 4)
        expected = np.linalg.eigvalsh(x.x.T @ x.x / x.n)[0]
        assert result.statistic == pytest.approx(expected)

    def test_subset_cap(self):
        x = Dataset(np.random.default_rng(1).standard_normal((10, 40)))
        with pytest.raises(SubsetLimitError):
            clique_detection_test(x, 20, 0.05)

    def test_planted_clique_found(self):
        data = planted_clique_data(12, [2, 5, 9], 0.9, 2000, seed=2)
        result = clique_detection_test(data, 3, 0.05)
        assert result.reject
        assert len(set(result.subset) & {2, 5, 9}) >= 2
        assert result.n_subsets == math.comb(12, 3)

    def test_identity_not_rejected(self):
        data = planted_clique_data(12, [1, 2, 3], 0.0, 2000, seed=3)
        assert not clique_detection_test(data, 3, 0.05).reject

    def test_through_witness_runner(self):
        data = planted_clique_data(12, [2, 5, 9], 0.9, 2000, seed=2)
        outcome = run_witness_test(data, WitnessTestSpec(PropertySpec(GraphProperty.CLIQUE, 3)))
        assert outcome.reject
        assert len(outcome.witness) == 3
        assert outcome.rejected == outcome.witness
        assert outcome.extras['statistic'] < outcome.extras['threshold']
