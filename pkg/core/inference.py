"""
inference.py - 승수 부트스트랩과 단계적 다중 간선 검정
부트스트랩 통계량, 조건부 분위수, step-down 절차(임계값 μ 변형 포함), 검정 결과 기록
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from core.config import Config
from core.estimation import PrecisionEstimate, empirical_covariance, debias_edges
from core.graphs import Edge, EdgeSet, make_edge
from core.model import Dataset
from error_handler import ConfigError, GraphStructureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = Config.BOOTSTRAP_B
    alpha: float = Config.ALPHA
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.B) < 100:
            raise ConfigError(f"부트스트랩 반복 수 B 는 100 이상이어야 합니다: {self.B}")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigError(f"유의수준은 (0, 1) 범위여야 합니다: {self.alpha}")


@dataclass
class TestOutcome:
    """ψ^B 검정 결과: reject 는 witness 전체가 기각되었을 때만 참"""
    property: str
    reject: bool
    alpha: float
    mu: float
    witness: EdgeSet
    rejected: EdgeSet
    statistics: Dict[Edge, float] = field(default_factory=dict)
    quantiles: List[float] = field(default_factory=list)
    rounds: int = 0
    extras: Dict[str, Any] = field(default_factory=dict)

    __test__ = False  # pytest 수집 제외

    def to_record(self) -> Dict[str, Any]:
        record = {
            'property': self.property,
            'reject': bool(self.reject),
            'alpha': float(self.alpha),
            'mu': float(self.mu),
            'witness': [list(e) for e in sorted(self.witness)],
            'rejected': [list(e) for e in sorted(self.rejected)],
            'rounds': int(self.rounds),
            'quantiles': [float(q) for q in self.quantiles],
            'statistics': [[j, k, float(v)] for (j, k), v in sorted(self.statistics.items())],
        }
        record.update(self.extras)
        return record


# ---------------------------------------------------------------------------
# 부트스트랩
# ---------------------------------------------------------------------------

def _chunk_sizes(B: int) -> List[int]:
    chunk = Config.BOOTSTRAP_CHUNK
    return [min(chunk, B - start) for start in range(0, B, chunk)]


def _chunk_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(count)


def bootstrap_multipliers(n: int, B: int, seed: int) -> np.ndarray:
    """B×n 표준정규 승수 ζ (고정 청크별 자식 시드)"""
    sizes = _chunk_sizes(int(B))
    return np.vstack([
        np.random.default_rng(child).standard_normal((size, int(n)))
        for child, size in zip(_chunk_seeds(seed, len(sizes)), sizes)
    ])


def _chunk_statistics(products: np.ndarray, child: np.random.SeedSequence, size: int) -> np.ndarray:
    zeta = np.random.default_rng(child).standard_normal((size, products.shape[0]))
    return zeta @ products / math.sqrt(products.shape[0])


def observation_products(x: Dataset, est: PrecisionEstimate, edges: Sequence[Edge]) -> np.ndarray:
    """n×|E| 행렬: Θ̂ᵀ_{*j}xᵢxᵢᵀΘ̂_{*k} − Θ̂_jk"""
    data = x.x if isinstance(x, Dataset) else np.asarray(x, dtype=float)
    if data.shape[1] != est.d:
        raise ConfigError(f"데이터 차원 {data.shape[1]} 와 추정 차원 {est.d} 가 다릅니다.")
    y = data @ est.matrix
    rows = np.array([j - 1 for j, _ in edges])
    cols = np.array([k - 1 for _, k in edges])
    return y[:, rows] * y[:, cols] - est.matrix[rows, cols]


def bootstrap_statistics(x: Dataset, est: PrecisionEstimate, edges: Iterable[Edge],
                         cfg: BootstrapConfig) -> np.ndarray:
    """B×|E| 행렬 Ŵ (청크 분할이 고정되어 스레드 수와 무관하게 동일)"""
    edges = [make_edge(j, k) for j, k in edges]
    if not edges:
        raise GraphStructureError("부트스트랩 대상 간선 집합이 비어 있습니다.")
    products = observation_products(x, est, edges)
    sizes = _chunk_sizes(int(cfg.B))
    seeds = _chunk_seeds(cfg.seed, len(sizes))
    if cfg.n_jobs == 1:
        blocks = [_chunk_statistics(products, child, size) for child, size in zip(seeds, sizes)]
    else:
        blocks = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_chunk_statistics)(products, child, size) for child, size in zip(seeds, sizes)
        )
    return np.vstack(blocks)


def bootstrap_quantile(stats: np.ndarray, subset: Sequence[int], alpha: float) -> float:
    """부분집합 위 max|Ŵ| 의 ⌈(1−α)B⌉ 번째 순서통계량"""
    subset = np.asarray(list(subset), dtype=np.int64)
    if subset.size == 0:
        raise GraphStructureError("분위수 계산 대상 부분집합이 비어 있습니다.")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"유의수준은 (0, 1) 범위여야 합니다: {alpha}")
    maxima = np.sort(np.abs(stats[:, subset]).max(axis=1))
    rank = max(1, math.ceil((1.0 - alpha) * maxima.size - 1e-9))
    return float(maxima[min(rank, maxima.size) - 1])


# ---------------------------------------------------------------------------
# Step-down
# ---------------------------------------------------------------------------

@dataclass
class StepDownResult:
    rejected: np.ndarray      # bool 마스크
    quantiles: List[float]
    rounds: int


def step_down_from_stats(stats: np.ndarray, scaled: np.ndarray, alpha: float,
                         mu: float = 0.0, n: Optional[int] = None) -> StepDownResult:
    """고정된 부트스트랩 행렬 위 step-down: √n|Θ̃_e| ≥ √n·μ + c_{1−α, 남은 집합}"""
    scaled = np.abs(np.asarray(scaled, dtype=float))
    if mu < 0:
        raise ConfigError(f"임계값 μ 는 0 이상이어야 합니다: {mu}")
    if mu > 0 and n is None:
        raise ConfigError("μ > 0 이면 표본 수 n 이 필요합니다.")
    shift = math.sqrt(n) * mu if mu > 0 else 0.0
    active = np.ones(scaled.size, dtype=bool)
    quantiles: List[float] = []
    while active.any():
        c = bootstrap_quantile(stats, np.flatnonzero(active), alpha)
        quantiles.append(c)
        hits = active & (scaled >= shift + c)
        if not hits.any():
            break
        active &= ~hits
    return StepDownResult(~active, quantiles, len(quantiles))


def step_down(x: Dataset, est: PrecisionEstimate, edges: Iterable[Edge], cfg: BootstrapConfig,
              mu: float = 0.0, label: str = "edges") -> TestOutcome:
    """다중 간선 검정: 부트스트랩 행렬은 한 번 계산하고 라운드마다 재분할"""
    ordered = sorted(make_edge(j, k) for j, k in edges)
    if not ordered:
        raise GraphStructureError("검정할 간선 집합이 비어 있습니다.")
    sigma = empirical_covariance(x)
    sqrt_n = math.sqrt(x.n)
    scaled = sqrt_n * debias_edges(sigma, est, ordered)
    stats = bootstrap_statistics(x, est, ordered, cfg)
    result = step_down_from_stats(stats, scaled, cfg.alpha, mu, x.n)

    rejected = frozenset(e for e, hit in zip(ordered, result.rejected) if hit)
    witness = frozenset(ordered)
    logger.info(f"step-down: {len(rejected)}/{len(witness)} 간선 기각, 라운드 {result.rounds}")
    return TestOutcome(
        property=label,
        reject=rejected == witness,
        alpha=cfg.alpha,
        mu=mu,
        witness=witness,
        rejected=rejected,
        statistics={e: float(v) for e, v in zip(ordered, scaled)},
        quantiles=result.quantiles,
        rounds=result.rounds,
    )


def rate_surrogate(n: int, d: int, s: int) -> float:
    """유한 표본 대용 조건 s·log(nd)·√(log d·log(nd))/√n (≤ 1 이면 충족)"""
    log_nd = math.log(n * d)
    return s * log_nd * math.sqrt(math.log(d) * log_nd) / math.sqrt(n)
