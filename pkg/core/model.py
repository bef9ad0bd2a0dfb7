"""
model.py - 정밀도 행렬 모델, 예제 그래프 패밀리, 가우시안 표본 생성
Θ = I + θA 구성, M(s) 소속 확인, 데이터셋 입출력
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.linalg import cholesky, solve_triangular

from core.config import Config
from core.graphs import (
    Edge, EdgeSet, Graph, GraphProperty, PropertySpec,
    chain_edges, edge_set, make_edge,
)
from core.lowerbound import BufferRule, Divider, DividerMode, SubsetFamily
from error_handler import (
    ConfigError, EigenSolveError, FamilyParameterError, GraphStructureError,
    NotPositiveDefiniteError, NumericalError,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, None]

BINARY_MAGIC = b"GWDS"


def derive_seed(parent: int, *keys: int) -> int:
    """자식 시드 = hash(부모 시드, 키...) (병렬 호출자용 분할 규약)"""
    return int(np.random.SeedSequence([int(parent), *(int(k) for k in keys)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# 모델 클래스와 정밀도 행렬
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelClassParams:
    """M(s) 파라미터: 열 희소도 s, 스펙트럼 한계 C, ℓ1 한계 L"""
    s: int
    C: float
    L: float

    def __post_init__(self):
        if int(self.s) < 1:
            raise ConfigError(f"s 는 양의 정수여야 합니다: {self.s}")
        if not 1.0 <= float(self.C) <= float(self.L):
            raise ConfigError(f"1 ≤ C ≤ L 이어야 합니다: C={self.C}, L={self.L}")


@dataclass
class MembershipReport:
    """M(s) 소속 확인 결과 (각 항목의 계산값 포함)"""
    min_eigenvalue: float
    max_eigenvalue: float
    max_l1_norm: float
    max_support: int
    spectral_ok: bool
    l1_ok: bool
    sparsity_ok: bool

    @property
    def passed(self) -> bool:
        return self.spectral_ok and self.l1_ok and self.sparsity_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            'min_eigenvalue': self.min_eigenvalue,
            'max_eigenvalue': self.max_eigenvalue,
            'max_l1_norm': self.max_l1_norm,
            'max_support': self.max_support,
            'spectral_ok': self.spectral_ok,
            'l1_ok': self.l1_ok,
            'sparsity_ok': self.sparsity_ok,
            'passed': self.passed,
        }


def _eigvalsh(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(matrix)
    except np.linalg.LinAlgError as e:
        raise EigenSolveError(f"고유값 계산이 수렴하지 않았습니다: {e}") from e


@dataclass(frozen=True)
class PrecisionModel:
    """Θ = I + θA (생성 시 양의 정부호 확인)"""
    theta: float
    base: Graph
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        theta = float(self.theta)
        if theta < 0 or not math.isfinite(theta):
            raise ConfigError(f"θ 는 0 이상의 유한값이어야 합니다: {self.theta}")
        object.__setattr__(self, 'theta', theta)
        matrix = np.eye(self.base.d) + theta * self.base.adjacency
        min_eig = float(_eigvalsh(matrix)[0])
        if min_eig <= Config.PD_TOLERANCE:
            raise NotPositiveDefiniteError(min_eig)
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def d(self) -> int:
        return self.base.d

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def check_membership(model: PrecisionModel, params: ModelClassParams) -> MembershipReport:
    """C⁻¹ ≤ Θ ≤ C, ‖Θ‖₁ ≤ L, 열 지지 크기 ≤ s"""
    eigenvalues = _eigvalsh(model.matrix)
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenSolveError("고유값에 유한하지 않은 값이 있습니다.")
    lo, hi = float(eigenvalues[0]), float(eigenvalues[-1])
    l1 = float(np.abs(model.matrix).sum(axis=0).max())
    support = int((model.matrix != 0).sum(axis=0).max())
    tol = Config.EIGEN_TOLERANCE
    return MembershipReport(
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        max_l1_norm=l1,
        max_support=support,
        spectral_ok=lo >= 1.0 / params.C - tol and hi <= params.C + tol,
        l1_ok=l1 <= params.L + tol,
        sparsity_ok=support <= params.s,
    )


# ---------------------------------------------------------------------------
# 데이터셋
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """n×d 표본 행렬 (행 = 관측)"""
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ConfigError(f"데이터셋은 비어 있지 않은 2차원 행렬이어야 합니다: {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConfigError("데이터셋에 유한하지 않은 값이 있습니다.")
        x.setflags(write=False)
        object.__setattr__(self, 'x', x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def rows(self, index: Union[slice, np.ndarray]) -> 'Dataset':
        return Dataset(self.x[index])

    def save(self, path: Union[str, Path], fmt: Optional[str] = None) -> None:
        save_matrix(path, self.x, fmt)

    @classmethod
    def load(cls, path: Union[str, Path], fmt: Optional[str] = None) -> 'Dataset':
        return cls(load_matrix(path, fmt))


def _resolve_format(path: Union[str, Path], fmt: Optional[str]) -> str:
    if fmt is None:
        fmt = 'csv' if str(path).lower().endswith('.csv') else 'binary'
    if fmt not in ('csv', 'binary'):
        raise ConfigError(f"알 수 없는 행렬 형식: {fmt} (csv|binary)")
    return fmt


def save_matrix(path: Union[str, Path], matrix: np.ndarray, fmt: Optional[str] = None) -> None:
    """CSV(헤더 없음) 또는 이진 형식(매직, n, d, 리틀엔디언 float64 행 우선)으로 저장"""
    matrix = np.asarray(matrix, dtype=float)
    fmt = _resolve_format(path, fmt)
    try:
        if fmt == 'csv':
            pd.DataFrame(matrix).to_csv(path, header=False, index=False, float_format='%.17g')
        else:
            with open(path, 'wb') as fh:
                fh.write(BINARY_MAGIC)
                fh.write(np.array(matrix.shape, dtype='<u8').tobytes())
                fh.write(np.ascontiguousarray(matrix, dtype='<f8').tobytes())
    except OSError as e:
        raise OSError(f"행렬 저장 실패 ({path}): {e}") from e


def load_matrix(path: Union[str, Path], fmt: Optional[str] = None) -> np.ndarray:
    fmt = _resolve_format(path, fmt)
    if not Path(path).exists():
        raise ConfigError(f"데이터 파일을 찾을 수 없습니다: {path}")
    if fmt == 'csv':
        try:
            frame = pd.read_csv(path, header=None, float_precision='round_trip')
        except (ValueError, pd.errors.ParserError) as e:
            raise ConfigError(f"CSV 파싱 실패 ({path}): {e}") from e
        return frame.to_numpy(dtype=float)

    raw = Path(path).read_bytes()
    if raw[:4] != BINARY_MAGIC or len(raw) < 20:
        raise ConfigError(f"이진 데이터 형식이 아닙니다: {path}")
    n, d = (int(v) for v in np.frombuffer(raw[4:20], dtype='<u8'))
    body = np.frombuffer(raw[20:], dtype='<f8')
    if body.size != n * d:
        raise ConfigError(f"이진 데이터 크기 불일치: {body.size} != {n}×{d}")
    return body.reshape(n, d).astype(float)


def sample(model: PrecisionModel, n: int, seed: SeedLike) -> Dataset:
    """N(0, Θ⁻¹) 에서 n 개 i.i.d. 표본 (Θ 의 Cholesky 분해에 대한 삼각 풀이)"""
    if int(n) < 1:
        raise ConfigError(f"표본 수는 1 이상이어야 합니다: {n}")
    try:
        lower = cholesky(model.matrix, lower=True)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Cholesky 분해 실패: {e}") from e
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(n), model.d))
    # Θ = LLᵀ 이면 x = L⁻ᵀz 의 공분산은 Θ⁻¹
    x = solve_triangular(lower.T, z.T, lower=False).T
    return Dataset(x)


# ---------------------------------------------------------------------------
# 시나리오 모델 (시뮬레이션 프로토콜용)
# ---------------------------------------------------------------------------

def chain_graph(d: int, cuts: Iterable[int] = ()) -> Graph:
    """경로 1–2–…–d 에서 (c, c+1) 간선들을 제거한 그래프"""
    removed = {(int(c), int(c) + 1) for c in cuts}
    for c, _ in removed:
        if not 1 <= c <= d - 1:
            raise GraphStructureError(f"절단 위치 {c} 가 1..{d - 1} 밖입니다.")
    return Graph(d, frozenset(e for e in chain_edges(1, d) if e not in removed))


def chord_graph(d: int, chord_end: int) -> Graph:
    """경로에 (1, M) 현을 추가한 그래프 (사이클 1..M)"""
    if not 3 <= chord_end <= d:
        raise GraphStructureError(f"현 끝점 M 은 3..{d} 이어야 합니다: {chord_end}")
    return chain_graph(d).with_edges([(1, chord_end)])


def planted_clique_graph(d: int, members: Iterable[int]) -> Graph:
    members = sorted(set(int(v) for v in members))
    return Graph(d, frozenset((a, b) for i, a in enumerate(members) for b in members[i + 1:]))


def precision_model(graph: Graph, theta: float) -> PrecisionModel:
    return PrecisionModel(theta, graph)


# ---------------------------------------------------------------------------
# 예제 패밀리 (기반 그래프 + 분할자)
# ---------------------------------------------------------------------------

@dataclass
class Family:
    """예제 패밀리: 기반 그래프, 분할자, 대상 성질"""
    kind: str
    base: Graph
    divider: Divider
    property: PropertySpec
    params: Dict[str, int] = field(default_factory=dict)


@dataclass
class FamilyCheck:
    checked: int
    total: int
    sampled: bool


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise FamilyParameterError(message)


def _singletons(edges: Iterable[Edge]) -> List[EdgeSet]:
    return [frozenset({e}) for e in sorted(edge_set(edges))]


def _skip_two_edges(d: int) -> List[Edge]:
    return [make_edge(j, (j + 1) % d + 1) for j in range(1, d + 1)]


def _two_cycles(d: int) -> Family:
    _require(d >= 6, f"connectivity 패밀리는 d ≥ 6 이 필요합니다: d={d}")
    h = d // 2
    edges = chain_edges(1, h) + [(1, h)] + chain_edges(h + 1, d) + [(h + 1, d)]
    base = Graph(d, edge_set(edges))
    divider = Divider(base, _singletons((j, h + j) for j in range(1, h + 1)))
    return Family('connectivity', base, divider, PropertySpec(GraphProperty.CONNECTIVITY))


def _split_path(d: int, m: int) -> Family:
    _require(math.isqrt(d - 1) + 1 <= m <= d - 2,
             f"components 패밀리는 ⌈√d⌉ ≤ m ≤ d−2 이어야 합니다: d={d}, m={m}")
    base = Graph(d, edge_set(chain_edges(1, d - m)))
    divider = Divider(base, _singletons(chain_edges(d - m, d)))
    return Family('components', base, divider, PropertySpec(GraphProperty.COMPONENTS, m), {'m': m})


def _path_with_chords(d: int, kind: str) -> Family:
    _require(d >= 5, f"{kind} 패밀리는 d ≥ 5 가 필요합니다: d={d}")
    base = Graph(d, edge_set(chain_edges(1, d)))
    divider = Divider(base, _singletons(_skip_two_edges(d)))
    return Family(kind, base, divider, PropertySpec(GraphProperty.CYCLE))


def _cycle_base_triangle(d: int) -> Family:
    _require(d >= 5, f"triangle 패밀리는 d ≥ 5 가 필요합니다: d={d}")
    base = Graph(d, edge_set(chain_edges(1, d) + [(1, d)]))
    divider = Divider(base, _singletons(_skip_two_edges(d)))
    return Family('triangle', base, divider, PropertySpec(GraphProperty.TRIANGLE))


def _sap_blocks(d: int, m: int) -> Family:
    _require(m >= 1 and m * m < d, f"sap 패밀리는 1 ≤ m < √d 이어야 합니다: d={d}, m={m}")
    block = m + 2
    edges = [(j, j + 1) for j in range(1, d) if j % block and (j + 1) % block]
    base = Graph(d, frozenset(edges))
    divider = Divider(base, _singletons((j * block - 1, j * block) for j in range(1, d // block + 1)))
    return Family('sap', base, divider, PropertySpec(GraphProperty.SAP, m), {'m': m})


def _components_delete(d: int, m: int) -> Family:
    _require(1 <= m and m * m < d, f"components-delete 패밀리는 1 ≤ m < √d 이어야 합니다: d={d}, m={m}")
    base = Graph(d, edge_set(chain_edges(1, d - m + 1)))
    divider = Divider(base, _singletons(base.edges), mode=DividerMode.DELETE)
    return Family('components-delete', base, divider,
                  PropertySpec(GraphProperty.COMPONENTS, m), {'m': m})


def _sap_delete(d: int, m: int) -> Family:
    _require(m * m >= d and d >= m + 2,
             f"sap-delete 패밀리는 √d ≤ m ≤ d−2 이어야 합니다: d={d}, m={m}")
    base = Graph(d, edge_set(chain_edges(1, m + 2)))
    divider = Divider(base, _singletons(base.edges), mode=DividerMode.DELETE)
    return Family('sap-delete', base, divider, PropertySpec(GraphProperty.SAP, m), {'m': m})


def _star_blocks(d: int, s0: int, s1: int) -> Family:
    _require(0 <= s0 < s1, f"0 ≤ s₀ < s₁ 이어야 합니다: s₀={s0}, s₁={s1}")
    n_blocks = d // (s1 + 1)
    _require(n_blocks >= 1, f"max-degree-bounded 패밀리는 d ≥ s₁+1 이 필요합니다: d={d}, s₁={s1}")
    centers = [(s1 + 1) * j + 1 for j in range(n_blocks)]
    base = Graph(d, frozenset((c, c + k) for c in centers for k in range(1, s0 + 1)))
    sets = [frozenset((c, c + k) for k in range(s0 + 1, s1 + 1)) for c in centers]
    return Family('max-degree-bounded', base, Divider(base, sets),
                  PropertySpec(GraphProperty.MAX_DEGREE, s0, s1), {'s0': s0, 's1': s1})


def _star_split(d: int, s0: int, s1: int) -> Family:
    _require(0 <= s0 < s1, f"0 ≤ s₀ < s₁ 이어야 합니다: s₀={s0}, s₁={s1}")
    root = math.isqrt(d)
    n_centers = root // (s0 + 1)
    _require(n_centers >= 1,
             f"중심 정점이 ⌊√d⌋={root} 개 정점 안에 들어가지 않습니다: s₀={s0}")
    centers = tuple((s0 + 1) * j + 1 for j in range(n_centers))
    pool = tuple(range(root + 1, d + 1))
    _require(len(pool) >= s1 - s0, f"잎 정점 풀이 부족합니다: {len(pool)} < {s1 - s0}")
    base = Graph(d, frozenset((c, c + k) for c in centers for k in range(1, s0 + 1)))
    sets = SubsetFamily(centers, pool, s1 - s0, _star_edges)
    divider = Divider(base, sets, buffer_rule=BufferRule.SUPPORT, incoherent=True)
    return Family('max-degree-split', base, divider,
                  PropertySpec(GraphProperty.MAX_DEGREE, s0, s1), {'s0': s0, 's1': s1})


def _star_edges(center: int, leaves: Sequence[int]) -> EdgeSet:
    return frozenset(make_edge(center, v) for v in leaves)


def _clique_edges(_anchor: Any, members: Sequence[int]) -> EdgeSet:
    return frozenset((a, b) for i, a in enumerate(members) for b in members[i + 1:])


def _cycle_edges(_anchor: Any, members: Sequence[int]) -> EdgeSet:
    ring = list(members) + [members[0]]
    return frozenset(make_edge(a, b) for a, b in zip(ring, ring[1:]))


def _all_subsets(d: int, s: int, builder, kind: str, prop: PropertySpec) -> Family:
    base = Graph.empty(d)
    sets = SubsetFamily((None,), tuple(range(1, d + 1)), s, builder)
    divider = Divider(base, sets, buffer_rule=BufferRule.SUPPORT, incoherent=True)
    return Family(kind, base, divider, prop, {'s': s})


def _cliques(d: int, s: int) -> Family:
    _require(2 <= s <= d, f"clique 패밀리는 2 ≤ s ≤ d 이어야 합니다: d={d}, s={s}")
    return _all_subsets(d, s, _clique_edges, 'clique', PropertySpec(GraphProperty.CLIQUE, s))


def _cycles(d: int, s: int) -> Family:
    _require(3 <= s <= d, f"cycle-detection 패밀리는 3 ≤ s ≤ d 이어야 합니다: d={d}, s={s}")
    return _all_subsets(d, s, _cycle_edges, 'cycle-detection', PropertySpec(GraphProperty.CYCLE))


FAMILY_BUILDERS = {
    'connectivity': (_two_cycles, ()),
    'components': (_split_path, ('m',)),
    'cycle': (partial(_path_with_chords, kind='cycle'), ()),
    'tree-cycle': (partial(_path_with_chords, kind='tree-cycle'), ()),
    'triangle': (_cycle_base_triangle, ()),
    'sap': (_sap_blocks, ('m',)),
    'components-delete': (_components_delete, ('m',)),
    'sap-delete': (_sap_delete, ('m',)),
    'max-degree-bounded': (_star_blocks, ('s0', 's1')),
    'max-degree-split': (_star_split, ('s0', 's1')),
    'clique': (_cliques, ('s',)),
    'cycle-detection': (_cycles, ('s',)),
}


def build_family(kind: str, d: int, **params: int) -> Family:
    """이름이 붙은 예제의 정확한 기반 그래프와 분할자"""
    if kind not in FAMILY_BUILDERS:
        raise ConfigError(f"알 수 없는 패밀리: '{kind}' (가능: {', '.join(FAMILY_BUILDERS)})")
    builder, required = FAMILY_BUILDERS[kind]
    missing = [name for name in required if params.get(name) is None]
    if missing:
        raise FamilyParameterError(f"{kind} 패밀리에 필요한 파라미터 누락: {', '.join(missing)}")
    unexpected = sorted(set(k for k, v in params.items() if v is not None) - set(required))
    if unexpected:
        raise FamilyParameterError(f"{kind} 패밀리가 받지 않는 파라미터: {', '.join(unexpected)}")
    d = int(d)
    if d < 2:
        raise FamilyParameterError(f"d 는 2 이상이어야 합니다: {d}")
    family = builder(d, *(int(params[name]) for name in required))
    logger.info(f"패밀리 생성: {kind} d={d} |C|={len(family.divider.sets)}")
    return family


def verify_family(family: Family, sample_size: Optional[int] = None, seed: int = 0) -> FamilyCheck:
    """추가/삭제 분할자 불변식을 구조적으로 확인 (큰 분할자는 시드 표본)"""
    divider, spec = family.divider, family.property
    base = divider.base
    total = len(divider.sets)
    limit = Config.FAMILY_CHECK_SAMPLE if sample_size is None else int(sample_size)
    if total > limit:
        indices = np.sort(np.random.default_rng(seed).choice(total, size=limit, replace=False))
    else:
        indices = np.arange(total)

    if divider.mode == DividerMode.ADD:
        if not spec.null(base):
            raise GraphStructureError(f"{family.kind}: 기반 그래프가 귀무 성질을 갖지 않습니다.")
    elif not spec.alternative(base):
        raise GraphStructureError(f"{family.kind}: 대립 기반 그래프가 대립 성질을 갖지 않습니다.")

    for i in indices:
        s = divider.sets[int(i)]
        if divider.mode == DividerMode.ADD:
            if s & base.edges:
                raise GraphStructureError(f"{family.kind}: 분할자 원소 {sorted(s)} 가 기반 간선과 겹칩니다.")
            if not spec.alternative(base.with_edges(s)):
                raise GraphStructureError(f"{family.kind}: {sorted(s)} 추가 후 대립 성질이 없습니다.")
        else:
            if not s <= base.edges:
                raise GraphStructureError(f"{family.kind}: 삭제 원소 {sorted(s)} 가 기반 간선이 아닙니다.")
            if not spec.null(base.without_edges(s)):
                raise GraphStructureError(f"{family.kind}: {sorted(s)} 삭제 후 귀무 성질이 없습니다.")

    return FamilyCheck(checked=len(indices), total=total, sampled=len(indices) < total)
