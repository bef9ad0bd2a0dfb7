"""
lowerbound.py - 정보이론적 하한 계산
분할자, 구조적 패킹 엔트로피, 정점 버퍼와 버퍼 엔트로피, 분할자 통계(Γ, Λ, R, B, U),
단일/다중 간선 카이제곱 위험 하한과 신호 세기 임계값 보고
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _csgraph_components
from scipy.special import comb, logsumexp

from core.config import Config
from core.graphs import (
    UNREACHABLE, Distance, Edge, EdgeSet, Graph, make_edge, trace_power, vertex_buffer,
    vertex_support,
)
from error_handler import (
    EigenSolveError, GraphStructureError, PreconditionError, SubsetLimitError,
)

if TYPE_CHECKING:
    from core.model import ModelClassParams

logger = logging.getLogger(__name__)


class DividerMode(Enum):
    ADD = "add"
    DELETE = "delete"


class BufferRule(Enum):
    DEFINITION = "definition"   # V(E₀∪S)∩V(S′) ∪ V(E₀∪S′)∩V(S)
    SUPPORT = "support"         # V(S)∩V(S′)


class Setting(Enum):
    S1 = "S1"
    S2 = "S2"


# ---------------------------------------------------------------------------
# 지연 열거 분할자
# ---------------------------------------------------------------------------

def _unrank_combination(rank: int, n: int, k: int) -> List[int]:
    """사전순 rank 번째 k-조합 (0-기준 위치)"""
    chosen = []
    x = 0
    for slot in range(k):
        while True:
            block = int(comb(n - x - 1, k - slot - 1, exact=True))
            if rank < block:
                chosen.append(x)
                x += 1
                break
            rank -= block
            x += 1
    return chosen


class SubsetFamily(Sequence):
    """앵커 × (pool 의 size-부분집합) 을 필요할 때만 간선 집합으로 만드는 시퀀스"""

    def __init__(self, anchors: Sequence[Any], pool: Sequence[int], size: int,
                 builder: Callable[[Any, Tuple[int, ...]], EdgeSet]):
        if size < 1 or size > len(pool):
            raise GraphStructureError(f"부분집합 크기 {size} 가 풀 크기 {len(pool)} 와 맞지 않습니다.")
        self.anchors = tuple(anchors)
        self.pool = tuple(pool)
        self.size = int(size)
        self.builder = builder
        self.per_anchor = int(comb(len(self.pool), self.size, exact=True))

    def __len__(self) -> int:
        return len(self.anchors) * self.per_anchor

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        index = int(index)
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(index)
        anchor, rank = divmod(index, self.per_anchor)
        members = tuple(self.pool[p] for p in _unrank_combination(rank, len(self.pool), self.size))
        return self.builder(self.anchors[anchor], members)

    def __repr__(self):
        return f"SubsetFamily(anchors={len(self.anchors)}, pool={len(self.pool)}, size={self.size})"


# ---------------------------------------------------------------------------
# 분할자
# ---------------------------------------------------------------------------

@dataclass
class Divider:
    """기반 그래프와 간선 집합 모음 (추가 또는 삭제 모드)"""
    base: Graph
    sets: Sequence[EdgeSet]
    mode: DividerMode = DividerMode.ADD
    buffer_rule: BufferRule = BufferRule.DEFINITION
    incoherent: bool = False

    def __post_init__(self):
        self.mode = DividerMode(self.mode)
        self.buffer_rule = BufferRule(self.buffer_rule)
        if not isinstance(self.sets, SubsetFamily):
            self.sets = [frozenset(make_edge(j, k) for j, k in s) for s in self.sets]
            for s in self.sets:
                if not s:
                    raise GraphStructureError("분할자 원소는 비어 있을 수 없습니다.")
                if max(vertex_support(s)) > self.base.d:
                    raise GraphStructureError(f"분할자 원소 {sorted(s)} 가 정점 범위를 벗어납니다.")
                if self.mode == DividerMode.ADD and s & self.base.edges:
                    raise GraphStructureError(f"추가 원소 {sorted(s)} 가 기반 간선과 겹칩니다.")
                if self.mode == DividerMode.DELETE and not s <= self.base.edges:
                    raise GraphStructureError(f"삭제 원소 {sorted(s)} 가 기반 간선이 아닙니다.")

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def single_edge(self) -> bool:
        if isinstance(self.sets, SubsetFamily):
            return len(self.sets[0]) == 1
        return all(len(s) == 1 for s in self.sets)

    def members(self, indices: Sequence[int]) -> List[EdgeSet]:
        return [self.sets[int(i)] for i in indices]


def _require_nonempty(divider: Divider) -> None:
    if len(divider) == 0:
        raise GraphStructureError("비어 있는 분할자입니다.")


# ---------------------------------------------------------------------------
# 공통 행렬 도구
# ---------------------------------------------------------------------------

def _spectral_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    try:
        eigenvalues = np.linalg.eigvalsh(matrix)
    except np.linalg.LinAlgError as e:
        raise EigenSolveError(f"스펙트럼 노름 계산 실패: {e}") from e
    return float(np.abs(eigenvalues).max())


def _set_adjacency(d: int, edges: Sequence[Edge]) -> np.ndarray:
    a = np.zeros((d, d))
    for j, k in edges:
        a[j - 1, k - 1] += 1.0
        a[k - 1, j - 1] += 1.0
    return a


class _BaseSpectra:
    """기반 그래프 요소 구조를 이용한 ‖A₀ + ΣA_S‖ 계산

    음이 아닌 대칭 행렬의 스펙트럼 노름은 블록별 최대이므로
    집합이 닿는 기반 요소들 위의 부분행렬과 ‖A₀‖₂ 만 비교하면 된다.
    """

    def __init__(self, base: Graph):
        self.base = base
        self.a0 = base.adjacency.astype(float)
        self.deg0 = base.degrees().astype(float)
        _, self.labels = _csgraph_components(sparse.csr_matrix(base.adjacency), directed=False)
        self.norm0 = _spectral_norm(self.a0) if base.n_edges else 0.0

    def touched(self, edge_sets: Sequence[EdgeSet]) -> np.ndarray:
        verts = np.fromiter(vertex_support(e for s in edge_sets for e in s), dtype=np.int64) - 1
        return np.flatnonzero(np.isin(self.labels, self.labels[verts]))

    def combined(self, weighted_sets: Sequence[Tuple[EdgeSet, float]]) -> Tuple[float, float]:
        """(‖A₀ + Σ w·A_S‖₁, ‖A₀ + Σ w·A_S‖₂)"""
        idx = self.touched([s for s, _ in weighted_sets])
        position = {int(v): p for p, v in enumerate(idx)}
        matrix = self.a0[np.ix_(idx, idx)].copy()
        deg = self.deg0[idx].copy()
        for s, weight in weighted_sets:
            for j, k in s:
                a, b = position[j - 1], position[k - 1]
                matrix[a, b] += weight
                matrix[b, a] += weight
                deg[a] += weight
                deg[b] += weight
        norm1 = max(float(self.deg0.max(initial=0)), float(deg.max(initial=0)))
        return norm1, max(self.norm0, _spectral_norm(matrix))


# ---------------------------------------------------------------------------
# 집합 쌍 표 (교집합 크기, 정점 버퍼 크기)
# ---------------------------------------------------------------------------

@dataclass
class _SetTable:
    sets: List[EdgeSet]
    vertices: np.ndarray          # k×d 정점 발생 (int64)
    edges: sparse.csr_matrix      # k×d² 간선 발생
    base_hits: np.ndarray         # k×d, 기반 정점과의 교집합


def _set_table(divider: Divider, members: List[EdgeSet]) -> _SetTable:
    d = divider.d
    vertices = np.zeros((len(members), d), dtype=np.int64)
    rows, cols = [], []
    for i, s in enumerate(members):
        for j, k in s:
            vertices[i, j - 1] = vertices[i, k - 1] = 1
            rows.append(i)
            cols.append((j - 1) * d + (k - 1))
    edges = sparse.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)),
                              shape=(len(members), d * d))
    base_mask = np.zeros(d, dtype=np.int64)
    support = np.fromiter(vertex_support(divider.base.edges), dtype=np.int64)
    if support.size:
        base_mask[support - 1] = 1
    return _SetTable(members, vertices, edges, vertices * base_mask)


def _pair_block(divider: Divider, rows: _SetTable, cols: _SetTable) -> Tuple[np.ndarray, np.ndarray]:
    """(|S∩S′|, |V_{S,S′}|) 행렬"""
    intersections = (rows.edges @ cols.edges.T).toarray()
    overlap = rows.vertices @ cols.vertices.T
    if divider.buffer_rule == BufferRule.SUPPORT:
        return intersections, overlap
    b_rows = rows.base_hits.sum(axis=1)
    b_cols = cols.base_hits.sum(axis=1)
    triple = rows.base_hits @ cols.base_hits.T
    return intersections, overlap + b_rows[:, None] + b_cols[None, :] - 2 * triple


def _chunks(n: int, size: int) -> List[np.ndarray]:
    return [np.arange(start, min(start + size, n)) for start in range(0, n, size)]


@dataclass
class _PairScan:
    row_means: np.ndarray
    max_ratio: float
    max_buffer: int


def _scan_pairs(divider: Divider, row_members: List[EdgeSet], col_members: List[EdgeSet],
                mean_columns: Optional[np.ndarray] = None) -> _PairScan:
    """행 집합 × 열 집합 쌍을 청크 단위로 훑어 평균 버퍼, 최대 R, 최대 버퍼를 계산"""
    cols = _set_table(divider, col_members)
    if mean_columns is None:
        mean_columns = np.arange(len(col_members))
    means = np.zeros(len(row_members))
    max_ratio, max_buffer = 0.0, 0
    for chunk in _chunks(len(row_members), Config.PAIR_CHUNK):
        rows = _set_table(divider, [row_members[i] for i in chunk])
        inter, buffers = _pair_block(divider, rows, cols)
        means[chunk] = buffers[:, mean_columns].mean(axis=1)
        nonempty = buffers > 0
        if nonempty.any():
            max_ratio = max(max_ratio, float((inter[nonempty] / buffers[nonempty]).max()))
            max_buffer = max(max_buffer, int(buffers.max()))
    return _PairScan(means, max_ratio, max_buffer)


def _sample_indices(total: int, size: int, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.choice(total, size=min(size, total), replace=False))


# ---------------------------------------------------------------------------
# 전거리
# ---------------------------------------------------------------------------

def _set_predistances(base: Graph, members: List[EdgeSet]) -> np.ndarray:
    """집합 쌍 전거리 행렬 (도달 불가는 np.inf)"""
    dist = base.distances
    supports = [np.fromiter(vertex_support(s), dtype=np.int64) - 1 for s in members]
    nearest = np.vstack([dist[v].min(axis=0) for v in supports])
    out = np.empty((len(members), len(members)))
    for j, v in enumerate(supports):
        out[:, j] = nearest[:, v].min(axis=1)
    return out


def _as_distance(value: float) -> Distance:
    return UNREACHABLE if np.isinf(value) else int(value)


def _require_pair_scale(divider: Divider, cap: int, what: str) -> None:
    if len(divider) > cap:
        logger.error(f"{what}: 분할자 크기 {len(divider)} 가 쌍 계산 한도 {cap} 를 넘습니다.")
        raise SubsetLimitError(len(divider), cap)


def predistance_histogram(divider: Divider, ordered: bool = False) -> Dict[Distance, int]:
    """K_r: 전거리 r 인 집합 쌍 수 (자기 쌍 포함, 기본은 비순서쌍)"""
    _require_nonempty(divider)
    _require_pair_scale(divider, Config.PAIR_EXACT_MAX, "predistance histogram")
    pred = _set_predistances(divider.base, list(divider.sets))
    if ordered:
        values = pred.ravel()
    else:
        values = pred[np.triu_indices(len(divider))]
    counts = Counter(_as_distance(v) for v in values)
    return dict(sorted(counts.items(), key=lambda item: item[0]))


# ---------------------------------------------------------------------------
# 패킹 엔트로피
# ---------------------------------------------------------------------------

@dataclass
class PackingResult:
    """구조적 r-패킹 (exact=False 이면 M 의 하한)"""
    entropy: float
    packing: List[int]
    radius: float
    exact: bool

    @property
    def size(self) -> int:
        return len(self.packing)


def _max_independent_set(conflicts: List[int], n: int) -> List[int]:
    """비트마스크 분기한정 최대 독립집합 (차수 내림차순 분기)"""
    order = sorted(range(n), key=lambda v: (-bin(conflicts[v]).count('1'), v))
    best = {'size': -1, 'mask': 0}

    def search(candidates: List[int], chosen: int, size: int):
        if size + len(candidates) <= best['size']:
            return
        if not candidates:
            best['size'], best['mask'] = size, chosen
            return
        v, rest = candidates[0], candidates[1:]
        search([u for u in rest if not conflicts[v] >> u & 1], chosen | (1 << v), size + 1)
        search(rest, chosen, size)

    search(order, 0, 0)
    return [v for v in range(n) if best['mask'] >> v & 1]


def _greedy_independent_set(conflict: np.ndarray) -> List[int]:
    """최소 차수 우선 (동률은 낮은 번호) 탐욕적 극대 독립집합"""
    alive = np.ones(conflict.shape[0], dtype=bool)
    chosen = []
    while alive.any():
        candidates = np.flatnonzero(alive)
        degrees = conflict[np.ix_(candidates, candidates)].sum(axis=1)
        v = int(candidates[np.argmin(degrees)])
        chosen.append(v)
        alive[v] = False
        alive[conflict[v]] = False
    return sorted(chosen)


def packing_entropy(divider: Divider, r: float, exact_max: Optional[int] = None) -> PackingResult:
    """전거리가 모두 r 이상인 최대 부분집합의 로그 크기"""
    _require_nonempty(divider)
    _require_pair_scale(divider, Config.PAIR_EXACT_MAX, "packing")
    exact_max = Config.PACKING_EXACT_MAX if exact_max is None else exact_max
    k = len(divider)
    pred = _set_predistances(divider.base, list(divider.sets))
    conflict = pred < float(r)
    np.fill_diagonal(conflict, False)

    if k <= exact_max:
        masks = [int(sum(1 << int(u) for u in np.flatnonzero(conflict[v]))) for v in range(k)]
        packing, exact = _max_independent_set(masks, k), True
    else:
        logger.warning(f"분할자 크기 {k} > {exact_max}: 탐욕적 패킹 사용 (하한)")
        packing, exact = _greedy_independent_set(conflict), False
    return PackingResult(math.log(len(packing)), packing, float(r), exact)


# ---------------------------------------------------------------------------
# 버퍼 엔트로피와 분할자 통계
# ---------------------------------------------------------------------------

@dataclass
class BufferEntropy:
    """M_B = log(1 / max_S E_{S′}|V_{S,S′}|)"""
    value: float
    mean_buffer: float
    standard_error: float
    method: str
    anchor: int

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'buffer_entropy': self.value,
            'mean_buffer': self.mean_buffer,
            'standard_error': self.standard_error,
            'method': self.method,
        }


def _entropy_from_mean(mean: float) -> float:
    return math.inf if mean <= 0 else -math.log(mean)


def buffer_entropy(divider: Divider, method: str = "auto", anchors: Optional[int] = None,
                   draws: Optional[int] = None, seed: int = 0) -> BufferEntropy:
    """정확 합산(|C| ≤ 10⁴) 또는 시드 몬테카를로 (앵커별 평균 중 최대와 그 표준오차)"""
    _require_nonempty(divider)
    k = len(divider)
    if method == "auto":
        method = "exact" if k <= Config.BUFFER_EXACT_MAX else "monte-carlo"
    if method == "exact":
        _require_pair_scale(divider, Config.BUFFER_EXACT_MAX, "buffer entropy")
        members = list(divider.sets)
        scan = _scan_pairs(divider, members, members)
        anchor = int(np.argmax(scan.row_means))
        mean = float(scan.row_means[anchor])
        return BufferEntropy(_entropy_from_mean(mean), mean, 0.0, "exact", anchor)
    if method != "monte-carlo":
        raise GraphStructureError(f"알 수 없는 버퍼 엔트로피 방법: {method}")

    rng = np.random.default_rng(seed)
    anchor_idx = _sample_indices(k, Config.BUFFER_MC_ANCHORS if anchors is None else anchors, rng)
    n_draws = Config.BUFFER_MC_DRAWS if draws is None else int(draws)
    best = (-1.0, 0.0, -1)
    for a in anchor_idx:
        partners = divider.members(rng.integers(0, k, size=n_draws))
        _, buffers = _pair_block(divider, _set_table(divider, [divider.sets[int(a)]]),
                                 _set_table(divider, partners))
        values = buffers[0].astype(float)
        mean = float(values.mean())
        se = float(values.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else math.inf
        if mean > best[0]:
            best = (mean, se, int(a))
    logger.info(f"버퍼 엔트로피 몬테카를로: 앵커 {len(anchor_idx)}개 × {n_draws}회, 평균 {best[0]:.4f}")
    return BufferEntropy(_entropy_from_mean(best[0]), best[0], best[1], "monte-carlo", best[2])


@dataclass
class DividerStats:
    """분할자 통계 (sampled=True 이면 R, B, buffer_mean 은 앵커 표본 기준)

    Gamma, Lambda, B 는 모든 쌍 (S, S′) 위 최대 (S = S′ 포함).
    Gamma_set, Lambda_set, B_set 은 단일 대립 행렬 A₀ + A_S 기준이며
    예제별 차수 상한 (예: 사이클 분할자의 Γ ≤ 2, B ≤ 16) 은 이 값에 적용된다.
    """
    U: int
    Gamma: float
    Lambda: float
    R: float
    B: float
    buffer_mean: float
    n_sets: int
    sampled: bool = False
    Gamma_set: float = 0.0
    Lambda_set: float = 0.0
    B_set: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'U': self.U, 'Gamma': self.Gamma, 'Lambda': self.Lambda, 'R': self.R,
            'B': self.B, 'buffer_mean': self.buffer_mean, 'n_sets': self.n_sets,
            'sampled': self.sampled, 'Gamma_set': self.Gamma_set, 'Lambda_set': self.Lambda_set,
            'B_set': self.B_set,
        }


def divider_stats(divider: Divider, seed: int = 0) -> DividerStats:
    """A_{S,S′} = A₀ + A_S + A_{S′} 기준 Γ, Λ, R, B, U 와 평균 버퍼"""
    _require_nonempty(divider)
    k = len(divider)
    sampled = k > Config.PAIR_EXACT_MAX
    rng = np.random.default_rng(seed)
    if sampled:
        logger.warning(f"분할자 크기 {k} > {Config.PAIR_EXACT_MAX}: 앵커 표본으로 통계 계산")
        anchor_idx = _sample_indices(k, Config.PAIR_SAMPLE_ANCHORS, rng)
        draw_idx = rng.integers(0, k, size=Config.BUFFER_MC_DRAWS)
        anchors = divider.members(anchor_idx)
        partners = divider.members(draw_idx) + anchors
        scan = _scan_pairs(divider, anchors, partners, mean_columns=np.arange(len(draw_idx)))
    else:
        anchors = list(divider.sets)
        scan = _scan_pairs(divider, anchors, anchors)

    # 노름의 볼록성: A_{S,S′} = ½(A₀+2A_S) + ½(A₀+2A_{S′}) 이므로 최대는 대각 쌍에서 달성
    spectra = _BaseSpectra(divider.base)
    gamma, lam, gamma_set, lam_set = 0.0, 0.0, 0.0, 0.0
    for s in anchors:
        norm1, norm2 = spectra.combined([(s, 2.0)])
        gamma, lam = max(gamma, norm1), max(lam, norm2)
        norm1, norm2 = spectra.combined([(s, 1.0)])
        gamma_set, lam_set = max(gamma_set, norm1), max(lam_set, norm2)
    U = max(len(s) for s in anchors)
    B = min(lam ** 4, gamma ** 2 * scan.max_buffer)
    B_set = min(lam_set ** 4, gamma_set ** 2 * scan.max_buffer)
    return DividerStats(U=U, Gamma=gamma, Lambda=lam, R=scan.max_ratio, B=B,
                        buffer_mean=float(scan.row_means.max()), n_sets=k, sampled=sampled,
                        Gamma_set=gamma_set, Lambda_set=lam_set, B_set=B_set)


# ---------------------------------------------------------------------------
# 카이제곱 하한
# ---------------------------------------------------------------------------

def _bound_from_log_terms(log_terms: np.ndarray, k: int) -> float:
    """1 − ½√(Σ expm1(x)/k²) 를 로그 공간에서 평가"""
    if log_terms.size == 0:
        return 1.0
    log_total = float(logsumexp(log_terms)) - 2.0 * math.log(k)
    if log_total == -math.inf:
        return 1.0
    if log_total > 1400:
        return -math.inf
    return 1.0 - 0.5 * math.exp(0.5 * log_total)


def _log_expm1(x: np.ndarray) -> np.ndarray:
    """log(eˣ − 1), x ≥ 0 (x = 0 은 −∞)"""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    small = pos & (x < 30)
    out[small] = np.log(np.expm1(x[small]))
    large = pos & ~small
    out[large] = x[large] + np.log1p(-np.exp(-x[large]))
    return out


def _check_theta(theta: float, n: int) -> None:
    if theta < 0 or not math.isfinite(theta):
        raise PreconditionError(f"θ 는 0 이상의 유한값이어야 합니다: {theta}")
    if int(n) < 1:
        raise PreconditionError(f"n 은 1 이상이어야 합니다: {n}")


def single_edge_chi2_bound(divider: Divider, theta: float, n: int,
                           C: Optional[float] = None) -> float:
    """단일 간선 분할자의 르캠 카이제곱 위험 하한 (삭제 분할자는 대립 기반 사용)"""
    _require_nonempty(divider)
    if not divider.single_edge:
        raise GraphStructureError("단일 간선 분할자가 아닙니다.")
    _check_theta(theta, n)
    C = Config.SPECTRAL_BOUND_C if C is None else float(C)
    base = divider.base
    norm1 = float(base.degrees().max(initial=0))
    limit = (1.0 - 1.0 / C) / (math.sqrt(2.0) * (norm1 + 2.0))
    if theta > limit:
        raise PreconditionError(f"θ={theta} 가 전제조건 θ ≤ {limit:.6g} 를 위반합니다.")

    norm2 = _spectral_norm(base.adjacency.astype(float)) if base.n_edges else 0.0
    radius = math.sqrt(2.0) * (norm2 + 2.0)
    histogram = predistance_histogram(divider, ordered=True)
    distances = np.array([r for r in histogram if r is not UNREACHABLE], dtype=float)
    counts = np.array([histogram[r] for r in histogram if r is not UNREACHABLE], dtype=float)
    # 도달 불가 쌍은 exp(0) − 1 = 0 기여
    exponents = n * (radius * theta) ** (2 * distances + 2) / (distances + 1)
    log_terms = np.log(counts) + _log_expm1(exponents)
    return _bound_from_log_terms(log_terms, len(divider))


@dataclass
class _SetProfile:
    edges: EdgeSet
    support: frozenset
    norm2: float


def _buffer_vertices(divider: Divider, s: EdgeSet, t: EdgeSet) -> frozenset:
    if divider.buffer_rule == BufferRule.SUPPORT:
        return vertex_support(s) & vertex_support(t)
    return vertex_buffer(divider.base, s, t)


def _pair_log_terms(divider: Divider, profiles: List[_SetProfile], pred: np.ndarray,
                    rows: np.ndarray, theta: float, n: int, setting: Setting) -> np.ndarray:
    """rows 의 각 S 와 S′ (S′ ≥ S) 쌍의 log 기여 (비대각 쌍은 2배)"""
    spectra = _BaseSpectra(divider.base)
    terms = []
    for i in rows:
        s = profiles[i]
        for j in range(i, len(profiles)):
            if np.isinf(pred[i, j]):
                continue
            t = profiles[j]
            shared = len(s.edges & t.edges)
            buffer_set = _buffer_vertices(divider, s.edges, t.edges)
            norm1, norm2 = spectra.combined([(s.edges, 1.0), (t.edges, 1.0)])
            if not buffer_set:
                h_value, k_value = 0.0, 0.0
            elif setting == Setting.S1:
                h_value = (min(len(buffer_set & s.support), len(buffer_set & t.support))
                           * s.norm2 * t.norm2 / norm2 ** 2)
                k_value = 2.0 * norm2
            else:
                h_value = len(buffer_set & s.support) * len(buffer_set & t.support) / norm1 ** 2
                k_value = 2.0 * norm1
            q = max(pred[i, j], 1.0) + 1.0
            exponent = n * (shared * theta ** 2 + h_value * (k_value * theta) ** (2 * q) / (2 * q))
            weight = 1.0 if i == j else 2.0
            terms.append(math.log(weight) + float(_log_expm1(np.array([exponent]))[0]))
    return np.array(terms)


def multi_edge_chi2_bound(divider: Divider, theta: float, n: int,
                          setting: Union[Setting, str] = Setting.S1,
                          C: Optional[float] = None, n_jobs: int = 1) -> float:
    """다중 간선 분할자의 카이제곱 위험 하한 (설정 S1: 버퍼×스펙트럼, S2: 차수 기반)"""
    _require_nonempty(divider)
    _check_theta(theta, n)
    _require_pair_scale(divider, Config.CHI2_PAIR_MAX, "multi-edge bound")
    setting = Setting(setting)
    C = Config.SPECTRAL_BOUND_C if C is None else float(C)
    members = list(divider.sets)

    spectra = _BaseSpectra(divider.base)
    gamma = max(spectra.combined([(s, 2.0)])[0] for s in members)
    limit = (1.0 - 1.0 / C) / (2.0 * math.sqrt(2.0) * gamma)
    if theta >= limit and theta > 0:
        raise PreconditionError(f"θ={theta} 가 전제조건 θ < {limit:.6g} 를 위반합니다.")

    profiles = [
        _SetProfile(s, vertex_support(s),
                    _spectral_norm(_set_adjacency(divider.d, list(s))))
        for s in members
    ]
    pred = _set_predistances(divider.base, members)
    blocks = _chunks(len(members), max(1, math.ceil(len(members) / max(1, 4 * abs(n_jobs)))))
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_pair_log_terms)(divider, profiles, pred, rows, theta, n, setting) for rows in blocks
    )
    log_terms = np.concatenate([p for p in parts if p.size] or [np.array([])])
    return _bound_from_log_terms(log_terms, len(members))


# ---------------------------------------------------------------------------
# 폐쇄 보행 상쇄
# ---------------------------------------------------------------------------

def closed_walk_excess(base: Graph, e: Edge, f: Edge, k: int) -> int:
    """Tr(A_{e,e′}^k) + Tr(A₀^k) − Tr((A₀+A_e)^k) − Tr((A₀+A_{e′})^k)"""
    a0 = base.adjacency
    a_e = _set_adjacency(base.d, [make_edge(*e)]).astype(np.int64)
    a_f = _set_adjacency(base.d, [make_edge(*f)]).astype(np.int64)
    return (trace_power(a0 + a_e + a_f, k) + trace_power(a0, k)
            - trace_power(a0 + a_e, k) - trace_power(a0 + a_f, k))


# ---------------------------------------------------------------------------
# 임계값 보고
# ---------------------------------------------------------------------------

@dataclass
class ThresholdReport:
    """적용 정리의 우변 (각 항과 구속 항)"""
    theorem: str
    value: float
    binding: str
    terms: Dict[str, float]
    entropy: float
    entropy_kind: str
    stats: Optional[DividerStats] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        record = {
            'theorem': self.theorem,
            'threshold': self.value,
            'binding': self.binding,
            'terms': dict(self.terms),
            'entropy': self.entropy,
            'entropy_kind': self.entropy_kind,
            'notes': list(self.notes),
        }
        if self.stats is not None:
            record['stats'] = self.stats.to_dict()
        return record


def _report(theorem: str, terms: Dict[str, float], entropy: float, entropy_kind: str,
            stats: Optional[DividerStats] = None, notes: Optional[List[str]] = None) -> ThresholdReport:
    binding = min(terms, key=lambda name: terms[name])
    return ThresholdReport(theorem, terms[binding], binding, terms, entropy, entropy_kind,
                           stats, notes or [])


def threshold_report(divider: Divider, n: int, params: 'ModelClassParams',
                     kappa: Optional[float] = None, seed: int = 0) -> ThresholdReport:
    """분할자 모드와 크기에 맞는 정리의 신호 세기 임계값"""
    _require_nonempty(divider)
    kappa = Config.KAPPA if kappa is None else float(kappa)
    C = float(params.C)
    k = len(divider)
    base = divider.base
    max_deg = float(base.degrees().max(initial=0))
    notes = ["entropy term is κ-scaled"]

    if divider.mode == DividerMode.DELETE:
        packing = packing_entropy(divider, math.log(k))
        terms = {'entropy': kappa * math.sqrt(packing.entropy / n),
                 'degree_cap': (1.0 - 1.0 / C) / (math.sqrt(2.0) * max_deg)
                 if max_deg > 0 else math.inf}
        return _report("deletion", terms, packing.entropy, "packing", notes=notes)

    if divider.single_edge and not divider.incoherent:
        packing = packing_entropy(divider, math.log(k))
        if not packing.exact:
            notes.append("packing entropy is a greedy lower bound")
        cap = min(1.0 - 1.0 / C, math.exp(-0.5)) / (math.sqrt(2.0) * (max_deg + 2.0))
        terms = {'entropy': kappa * math.sqrt(packing.entropy / n), 'degree_cap': cap}
        return _report("single-edge", terms, packing.entropy, "packing", notes=notes)

    stats = divider_stats(divider, seed=seed)
    if stats.sampled:
        notes.append("divider statistics computed on sampled anchors")

    if divider.incoherent:
        entropy = buffer_entropy(divider, seed=seed)
        if entropy.method != "exact":
            notes.append(f"buffer entropy by Monte Carlo (se {entropy.standard_error:.3g})")
        ratio = stats.R if stats.R > 0 else math.inf
        terms = {
            'entropy': math.sqrt(entropy.value / (4.0 * n * ratio)),
            'ratio_cap': math.sqrt(stats.R / stats.B) if stats.B > 0 else math.inf,
            'degree_cap': (1.0 - 1.0 / C) / (2.0 * math.sqrt(2.0) * stats.Gamma),
        }
        return _report("incoherent multi-edge", terms, entropy.value, "buffer", stats, notes)

    packing = packing_entropy(divider, math.log(k))
    if not packing.exact:
        notes.append("packing entropy is a greedy lower bound")
    U = stats.U
    norm2 = _spectral_norm(base.adjacency.astype(float)) if base.n_edges else 0.0
    terms = {
        'entropy': kappa * math.sqrt(packing.entropy / (n * U)),
        'spectral_cap': kappa / (U * (norm2 + 2.0 * U)),
        'degree_cap': (1.0 - 1.0 / C) / (4.0 * (max_deg + 2.0 * U)),
    }
    return _report("multi-edge", terms, packing.entropy, "packing", stats, notes)
