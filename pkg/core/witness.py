"""
witness.py - 대립 증인(witness) 검정
데이터 분할 → 첫 절반 추정 → 최소 대립 구조 탐색 → 둘째 절반 추정 → step-down 인증,
그리고 클릭 탐지 고유값 검정
"""

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import combinations, islice
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.special import comb

from core.config import Config
from core.estimation import (
    ClimeConfig, PrecisionEstimate, clime, cv_select_lambda, default_lambda, empirical_covariance,
)
from core.graphs import (
    EdgeSet, EdgeWeights, Graph, GraphProperty, PropertySpec, StructureKind,
    component_count, greedy_structure_search, max_spanning_forest, max_spanning_tree,
)
from core.inference import BootstrapConfig, TestOutcome, step_down
from core.model import Dataset
from error_handler import ConfigError, EigenSolveError, SubsetLimitError, stage

logger = logging.getLogger(__name__)

LAMBDA_POLICIES = ('fixed', 'cv')


@dataclass(frozen=True)
class WitnessTestSpec:
    """증인 검정 설정

    clime 이 None 이면 두 절반 모두 전체 표본 크기 n 으로 λ = 1.5√(log d / n) 을 사용한다.
    mu 는 connectivity_at_level 에서만 0 보다 클 수 있다.
    """
    property: PropertySpec
    alpha: float = Config.ALPHA
    clime: Optional[ClimeConfig] = None
    lambda_policy: str = 'fixed'
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    mu: float = 0.0
    shuffle: bool = False
    split_seed: int = 0

    def __post_init__(self):
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigError(f"유의수준은 (0, 1) 범위여야 합니다: {self.alpha}")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ConfigError(f"알 수 없는 λ 정책: {self.lambda_policy} (fixed|cv)")
        if self.mu < 0:
            raise ConfigError(f"μ 는 0 이상이어야 합니다: {self.mu}")
        if self.mu > 0 and self.property.kind != GraphProperty.CONNECTIVITY_AT_LEVEL:
            raise ConfigError("μ > 0 은 connectivity_at_level 성질에서만 허용됩니다.")

    @property
    def bootstrap_config(self) -> BootstrapConfig:
        return replace(self.bootstrap, alpha=self.alpha)

    def validate(self, d: int) -> None:
        try:
            self.property.validate(d)
        except Exception as e:
            raise ConfigError(str(e)) from e


def split(x: Dataset, shuffle: bool = False, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """D₁ = 앞 ⌊n/2⌋ 행, D₂ = 나머지 (선택적으로 시드 순열 후)"""
    if x.n < 4:
        raise ConfigError(f"데이터 분할에는 n ≥ 4 가 필요합니다: n={x.n}")
    data = x.x
    if shuffle:
        data = data[np.random.default_rng(seed).permutation(x.n)]
    half = x.n // 2
    return Dataset(data[:half]), Dataset(data[half:])


_GREEDY_TARGETS = {
    GraphProperty.CYCLE: StructureKind.CYCLE,
    GraphProperty.TRIANGLE: StructureKind.TRIANGLE,
    GraphProperty.SAP: StructureKind.SAP,
    GraphProperty.MAX_DEGREE: StructureKind.DEGREE,
}


def find_witness(est1: PrecisionEstimate, spec: Union[WitnessTestSpec, PropertySpec]) -> EdgeSet:
    """|Θ̂⁽¹⁾_e| 가중치 위 max-min 구조 (성질별 정확한 풀이)"""
    prop = spec.property if isinstance(spec, WitnessTestSpec) else spec
    weights = EdgeWeights.from_estimate(est1.matrix)
    kind = prop.kind
    if kind in (GraphProperty.CONNECTIVITY, GraphProperty.CONNECTIVITY_AT_LEVEL):
        return max_spanning_tree(weights)
    if kind == GraphProperty.COMPONENTS:
        if prop.param == 1:
            return max_spanning_tree(weights)
        return max_spanning_forest(weights, m=prop.param)
    if kind in _GREEDY_TARGETS:
        return greedy_structure_search(weights, target=_GREEDY_TARGETS[kind], param=prop.param)
    raise ConfigError(f"{prop.label} 성질은 증인 구조가 아닌 클릭 탐지 검정을 사용합니다.")


def _estimate_half(data: Dataset, spec: WitnessTestSpec, n_total: int) -> PrecisionEstimate:
    sigma = empirical_covariance(data)
    if spec.clime is not None:
        return clime(sigma, spec.clime)
    if spec.lambda_policy == 'cv':
        lam = cv_select_lambda(data)
    else:
        lam = default_lambda(n_total, data.d)
    return clime(sigma, ClimeConfig(lam=lam))


def run_witness_test(x: Dataset, spec: WitnessTestSpec) -> TestOutcome:
    """분할 → Θ̂⁽¹⁾ → 증인 → Θ̂⁽²⁾ → step-down (증인 전체 기각 시에만 reject)"""
    spec.validate(x.d)
    label = spec.property.label
    if spec.property.kind == GraphProperty.CLIQUE:
        return _clique_outcome(x, spec)

    with stage('split'):
        first, second = split(x, spec.shuffle, spec.split_seed)
    with stage('estimate-first-half'):
        est1 = _estimate_half(first, spec, x.n)
    with stage('witness'):
        witness = find_witness(est1, spec)
        logger.info(f"{label}: 증인 간선 {len(witness)}개")

    with stage('estimate-second-half'):
        est2 = _estimate_half(second, spec, x.n)
    with stage('step-down'):
        outcome = step_down(second, est2, witness, spec.bootstrap_config, spec.mu, label)

    outcome.extras['lambda'] = est2.lam
    if spec.property.kind == GraphProperty.CONNECTIVITY_AT_LEVEL:
        outcome.extras['rejected_components'] = component_count(Graph(x.d, outcome.rejected))
    return outcome


# ---------------------------------------------------------------------------
# 클릭 탐지
# ---------------------------------------------------------------------------

@dataclass
class CliqueTestResult:
    reject: bool
    statistic: float          # λ̂_min
    threshold: float          # ν
    subset: Tuple[int, ...]   # 최소 고유값을 주는 정점 집합 (1-기준)
    n_subsets: int

    def to_record(self) -> Dict[str, Any]:
        return {
            'reject': bool(self.reject),
            'statistic': self.statistic,
            'threshold': self.threshold,
            'subset': list(self.subset),
            'n_subsets': self.n_subsets,
        }


def clique_threshold(n: int, d: int, s: int, alpha: float) -> float:
    """ν = (1 − (√2+1)√((s·log(ed/s) + log(2/α))/n))², 괄호 안은 0 에서 절단"""
    spread = (math.sqrt(2.0) + 1.0) * math.sqrt((s * math.log(math.e * d / s) + math.log(2.0 / alpha)) / n)
    return max(0.0, 1.0 - spread) ** 2


def clique_detection_test(x: Dataset, s: int, alpha: float = Config.ALPHA) -> CliqueTestResult:
    """모든 크기 s 정점 부분집합 C 에 대한 min λ_min(Σ̂_CC) 와 ν 비교"""
    d = x.d
    if not 1 <= s <= d:
        raise ConfigError(f"클릭 크기는 1..{d} 이어야 합니다: {s}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"유의수준은 (0, 1) 범위여야 합니다: {alpha}")
    count = int(comb(d, s, exact=True))
    if count > Config.CLIQUE_SUBSET_CAP:
        raise SubsetLimitError(count, Config.CLIQUE_SUBSET_CAP)

    sigma = empirical_covariance(x)
    best_value, best_subset = math.inf, ()
    subsets = combinations(range(d), s)
    while True:
        chunk = np.array(list(islice(subsets, Config.CLIQUE_CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        blocks = sigma[chunk[:, :, None], chunk[:, None, :]]
        try:
            minima = np.linalg.eigvalsh(blocks)[:, 0]
        except np.linalg.LinAlgError as e:
            raise EigenSolveError(f"부분행렬 고유값 계산 실패: {e}") from e
        i = int(np.argmin(minima))
        if minima[i] < best_value:
            best_value, best_subset = float(minima[i]), tuple(int(v) + 1 for v in chunk[i])

    nu = clique_threshold(x.n, d, s, alpha)
    logger.info(f"클릭 탐지: λ̂_min={best_value:.4f}, ν={nu:.4f}, 부분집합 {count}개")
    return CliqueTestResult(best_value < nu, best_value, nu, best_subset, count)


def _clique_outcome(x: Dataset, spec: WitnessTestSpec) -> TestOutcome:
    s = spec.property.param
    with stage('clique-detection'):
        result = clique_detection_test(x, s, spec.alpha)
    members = result.subset
    edges = frozenset((a, b) for i, a in enumerate(members) for b in members[i + 1:])
    return TestOutcome(
        spec.property.label, result.reject, spec.alpha, 0.0,
        witness=edges, rejected=edges if result.reject else frozenset(),
        extras={'statistic': result.statistic, 'threshold': result.threshold},
    )
