"""
graphs.py - 무방향 단순 그래프와 구조 연산
측지 거리, 간선 전거리(predistance), 폐쇄 보행 수, 최대 신장 구조, 탐욕적 구조 탐색
"""

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, total_ordering
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components
from scipy.sparse.csgraph import shortest_path

from error_handler import GraphStructureError, WalkCountOverflowError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
EdgeSet = FrozenSet[Edge]


@total_ordering
class _Unreachable:
    """도달 불가 거리 표식 (모든 유한 거리보다 큼)"""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __hash__(self):
        return hash("graphwise.unreachable")

    def __repr__(self):
        return "UNREACHABLE"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()
Distance = Union[int, _Unreachable]


def is_unreachable(value) -> bool:
    return value is UNREACHABLE


def make_edge(j: int, k: int) -> Edge:
    """정규화된 간선 (작은 정점, 큰 정점)"""
    j, k = int(j), int(k)
    if j == k:
        raise GraphStructureError(f"자기 루프는 허용되지 않습니다: ({j}, {k})")
    return (j, k) if j < k else (k, j)


def edge_set(edges: Iterable[Sequence[int]]) -> EdgeSet:
    return frozenset(make_edge(j, k) for j, k in edges)


def vertex_support(edges: Iterable[Edge]) -> FrozenSet[int]:
    """간선 집합이 닿는 정점 집합 V(·)"""
    return frozenset(v for e in edges for v in e)


def chain_edges(start: int, stop: int) -> List[Edge]:
    """start..stop 경로 간선 (j, j+1)"""
    return [(j, j + 1) for j in range(start, stop)]


def _check_vertex(v: int, d: int) -> int:
    v = int(v)
    if not 1 <= v <= d:
        raise GraphStructureError(f"정점 {v} 가 범위 1..{d} 밖입니다.")
    return v


def _check_edge(e: Sequence[int], d: int) -> Edge:
    j, k = make_edge(*e)
    _check_vertex(j, d)
    _check_vertex(k, d)
    return (j, k)


@dataclass(frozen=True)
class Graph:
    """정점 1..d 위의 무방향 단순 그래프"""
    d: int
    edges: EdgeSet = frozenset()

    def __post_init__(self):
        if int(self.d) < 1:
            raise GraphStructureError(f"정점 수는 양의 정수여야 합니다: {self.d}")
        object.__setattr__(self, 'd', int(self.d))
        normalized = frozenset(_check_edge(e, self.d) for e in self.edges)
        object.__setattr__(self, 'edges', normalized)

    @classmethod
    def empty(cls, d: int) -> 'Graph':
        return cls(d, frozenset())

    @classmethod
    def from_adjacency(cls, a: np.ndarray) -> 'Graph':
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphStructureError(f"정방 행렬이 아닙니다: {a.shape}")
        j_idx, k_idx = np.nonzero(np.triu(a != 0, 1))
        return cls(a.shape[0], frozenset((int(j) + 1, int(k) + 1) for j, k in zip(j_idx, k_idx)))

    @cached_property
    def adjacency(self) -> np.ndarray:
        """대칭 0/1 인접 행렬 (읽기 전용, int64)"""
        a = np.zeros((self.d, self.d), dtype=np.int64)
        for j, k in self.edges:
            a[j - 1, k - 1] = 1
            a[k - 1, j - 1] = 1
        a.setflags(write=False)
        return a

    @cached_property
    def distances(self) -> np.ndarray:
        """전체 쌍 최단 경로 길이 (도달 불가는 np.inf)"""
        dist = shortest_path(csr_matrix(self.adjacency), directed=False, unweighted=True)
        dist.setflags(write=False)
        return dist

    @cached_property
    def _neighbor_sets(self) -> Tuple[FrozenSet[int], ...]:
        nbrs: List[Set[int]] = [set() for _ in range(self.d + 1)]
        for j, k in self.edges:
            nbrs[j].add(k)
            nbrs[k].add(j)
        return tuple(frozenset(s) for s in nbrs)

    def neighbors(self, v: int) -> FrozenSet[int]:
        return self._neighbor_sets[_check_vertex(v, self.d)]

    def has_edge(self, j: int, k: int) -> bool:
        return make_edge(j, k) in self.edges

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def max_degree(self) -> int:
        return int(self.degrees().max(initial=0))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def with_edges(self, extra: Iterable[Sequence[int]]) -> 'Graph':
        return Graph(self.d, self.edges | edge_set(extra))

    def without_edges(self, removed: Iterable[Sequence[int]]) -> 'Graph':
        return Graph(self.d, self.edges - edge_set(removed))

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    # 간선 목록 텍스트 형식: 첫 줄 "d <count>", 이후 줄마다 "j k"
    def to_text(self) -> str:
        lines = [f"d {self.d}"] + [f"{j} {k}" for j, k in self.sorted_edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> 'Graph':
        rows = [line.split() for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith('#')]
        if not rows or len(rows[0]) != 2 or rows[0][0] != 'd':
            raise GraphStructureError("첫 줄은 'd <count>' 형식이어야 합니다.")
        try:
            d = int(rows[0][1])
            edges = [(int(r[0]), int(r[1])) for r in rows[1:]]
        except (ValueError, IndexError) as e:
            raise GraphStructureError(f"간선 목록 파싱 실패: {e}") from e
        if any(len(r) != 2 for r in rows[1:]):
            raise GraphStructureError("간선 줄은 'j k' 두 정수여야 합니다.")
        return cls(d, edge_set(edges))

    def save(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(self.to_text())
        except OSError as e:
            raise OSError(f"그래프 저장 실패 ({path}): {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'Graph':
        return cls.from_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# 거리
# ---------------------------------------------------------------------------

def _as_distance(value: float) -> Distance:
    return UNREACHABLE if np.isinf(value) else int(value)


def distance_matrix(g: Graph) -> np.ndarray:
    return g.distances


def geodesic_distance(g: Graph, u: int, v: int) -> Distance:
    """u, v 사이 최단 경로 간선 수 (없으면 UNREACHABLE)"""
    u = _check_vertex(u, g.d)
    v = _check_vertex(v, g.d)
    return _as_distance(g.distances[u - 1, v - 1])


def edge_predistance(g: Graph, e: Sequence[int], f: Sequence[int]) -> Distance:
    """두 간선 끝점 사이 최소 측지 거리 (간선이 g 에 속할 필요 없음)"""
    e = _check_edge(e, g.d)
    f = _check_edge(f, g.d)
    rows = [e[0] - 1, e[1] - 1]
    cols = [f[0] - 1, f[1] - 1]
    return _as_distance(g.distances[np.ix_(rows, cols)].min())


def edgeset_predistance(g: Graph, s: Iterable[Edge], t: Iterable[Edge]) -> Distance:
    s = [_check_edge(e, g.d) for e in s]
    t = [_check_edge(e, g.d) for e in t]
    if not s or not t:
        raise GraphStructureError("간선 집합 전거리에는 비어 있지 않은 두 집합이 필요합니다.")
    vs = np.fromiter(vertex_support(s), dtype=np.int64) - 1
    vt = np.fromiter(vertex_support(t), dtype=np.int64) - 1
    return _as_distance(g.distances[np.ix_(vs, vt)].min())


# ---------------------------------------------------------------------------
# 폐쇄 보행
# ---------------------------------------------------------------------------

def trace_power(a: np.ndarray, k: int) -> int:
    """음이 아닌 정수 행렬 a 에 대해 Tr(a^k) 를 정확한 정수 연산으로 계산"""
    if int(k) < 1:
        raise GraphStructureError(f"보행 길이는 1 이상이어야 합니다: {k}")
    a = np.asarray(a)
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise GraphStructureError("정수 행렬이 필요합니다.")
    a = a.astype(np.int64)
    if (a < 0).any():
        raise GraphStructureError("음수 항목이 있는 행렬의 보행 수는 정의되지 않습니다.")
    limit = np.iinfo(np.int64).max
    column_bound = int(a.sum(axis=0).max(initial=0))
    power = a.copy()
    for _ in range(int(k) - 1):
        # (PA)_ij <= max(P) * max_j Σ_l A_lj
        if int(power.max(initial=0)) * column_bound > limit:
            raise WalkCountOverflowError(int(k))
        power = power @ a
    return sum(int(x) for x in np.diagonal(power))


def closed_walk_count(g: Graph, k: int) -> int:
    """길이 k 폐쇄 보행 수 = Tr(A^k)"""
    return trace_power(g.adjacency, k)


# ---------------------------------------------------------------------------
# 연결 요소와 성질 판정
# ---------------------------------------------------------------------------

def connected_components(g: Graph) -> List[List[int]]:
    """최소 정점 순으로 정렬된 연결 요소 목록"""
    _, labels = _csgraph_components(csr_matrix(g.adjacency), directed=False)
    blocks: Dict[int, List[int]] = {}
    for v, label in enumerate(labels, start=1):
        blocks.setdefault(int(label), []).append(v)
    return sorted(blocks.values(), key=lambda block: block[0])


def component_count(g: Graph) -> int:
    n_components, _ = _csgraph_components(csr_matrix(g.adjacency), directed=False)
    return int(n_components)


def is_connected(g: Graph) -> bool:
    return component_count(g) == 1


def has_cycle(g: Graph) -> bool:
    # 숲은 정확히 d - (요소 수) 개의 간선을 가짐
    return g.n_edges > g.d - component_count(g)


def has_triangle(g: Graph) -> bool:
    return g.n_edges >= 3 and trace_power(g.adjacency, 3) > 0


def _simple_paths(nbrs: Sequence[Iterable[int]], start: int, length: int,
                  banned: FrozenSet[int] = frozenset()) -> Iterator[List[int]]:
    """start 에서 시작하는 간선 length 개짜리 단순 경로 (정점 순서열)"""
    path = [start]
    on_path = {start}

    def extend(depth: int):
        if depth == length:
            yield list(path)
            return
        for u in sorted(nbrs[path[-1]]):
            if u in on_path or u in banned:
                continue
            path.append(u)
            on_path.add(u)
            yield from extend(depth + 1)
            path.pop()
            on_path.discard(u)

    yield from extend(0)


def has_path_of_length(g: Graph, length: int) -> bool:
    """간선 length 개의 자기 회피 경로 존재 여부"""
    if length < 0:
        raise GraphStructureError(f"경로 길이는 0 이상이어야 합니다: {length}")
    if length == 0:
        return True
    if length > g.d - 1:
        return False
    nbrs = g._neighbor_sets
    for v in range(1, g.d + 1):
        if nbrs[v] and next(_simple_paths(nbrs, v, length), None) is not None:
            return True
    return False


def has_clique(g: Graph, s: int) -> bool:
    """크기 s 클릭 존재 여부"""
    if s <= 1:
        return g.d >= max(s, 0)
    nbrs = g._neighbor_sets

    def grow(candidates: FrozenSet[int], need: int) -> bool:
        if need == 0:
            return True
        if len(candidates) < need:
            return False
        for u in sorted(candidates):
            rest = frozenset(w for w in candidates if w > u) & nbrs[u]
            if grow(rest, need - 1):
                return True
        return False

    return any(grow(frozenset(u for u in nbrs[v] if u > v), s - 1) for v in range(1, g.d + 1))


def max_degree(g: Graph) -> int:
    return g.max_degree


# ---------------------------------------------------------------------------
# 성질 명세
# ---------------------------------------------------------------------------

class GraphProperty(Enum):
    CONNECTIVITY = "connectivity"
    COMPONENTS = "components"
    CYCLE = "cycle"
    TRIANGLE = "triangle"
    SAP = "sap"
    MAX_DEGREE = "max_degree"
    CLIQUE = "clique"
    CONNECTIVITY_AT_LEVEL = "connectivity_at_level"


_PARAMETRIZED = {GraphProperty.COMPONENTS, GraphProperty.SAP,
                 GraphProperty.MAX_DEGREE, GraphProperty.CLIQUE}


@dataclass(frozen=True)
class PropertySpec:
    """검정 대상 그래프 성질과 파라미터

    param: components 의 m, sap 의 m, max_degree 의 s₀, clique 의 s
    alt_level: max_degree 대립가설 수준 s₁ (기본 s₀+1)
    """
    kind: GraphProperty
    param: Optional[int] = None
    alt_level: Optional[int] = None

    def __post_init__(self):
        if self.kind in _PARAMETRIZED and self.param is None:
            raise GraphStructureError(f"{self.kind.value} 성질에는 파라미터가 필요합니다.")

    @classmethod
    def parse(cls, name: str, param: Optional[int] = None,
              alt_level: Optional[int] = None) -> 'PropertySpec':
        key = name.strip().lower().replace('-', '_')
        try:
            kind = GraphProperty(key)
        except ValueError:
            valid = ", ".join(p.value for p in GraphProperty)
            raise GraphStructureError(f"알 수 없는 성질 '{name}' (가능: {valid})")
        return cls(kind, param, alt_level)

    @property
    def label(self) -> str:
        return self.kind.value if self.param is None else f"{self.kind.value}({self.param})"

    @property
    def upper_level(self) -> int:
        return self.alt_level if self.alt_level is not None else self.param + 1

    def validate(self, d: int) -> None:
        """검정 파라미터 범위 확인 (1 ≤ m ≤ d−1, s₀ < d, 2 ≤ s ≤ d)"""
        kind, p = self.kind, self.param
        if kind == GraphProperty.COMPONENTS and not 1 <= p <= d - 1:
            raise GraphStructureError(f"components(m) 는 1 ≤ m ≤ {d - 1} 이어야 합니다: {p}")
        if kind == GraphProperty.SAP and not 1 <= p <= d - 2:
            raise GraphStructureError(f"sap(m) 는 1 ≤ m ≤ {d - 2} 이어야 합니다: {p}")
        if kind == GraphProperty.MAX_DEGREE and not (0 <= p < d and p < self.upper_level <= d - 1):
            raise GraphStructureError(f"max_degree 수준이 잘못되었습니다: s₀={p}, s₁={self.upper_level}, d={d}")
        if kind == GraphProperty.CLIQUE and not 2 <= p <= d:
            raise GraphStructureError(f"clique(s) 는 2 ≤ s ≤ {d} 이어야 합니다: {p}")

    def alternative(self, g: Graph) -> bool:
        kind, p = self.kind, self.param
        if kind in (GraphProperty.CONNECTIVITY, GraphProperty.CONNECTIVITY_AT_LEVEL):
            return is_connected(g)
        if kind == GraphProperty.COMPONENTS:
            return component_count(g) <= p
        if kind == GraphProperty.CYCLE:
            return has_cycle(g)
        if kind == GraphProperty.TRIANGLE:
            return has_triangle(g)
        if kind == GraphProperty.SAP:
            return has_path_of_length(g, p + 1)
        if kind == GraphProperty.MAX_DEGREE:
            return g.max_degree >= self.upper_level
        return has_clique(g, p)

    def null(self, g: Graph) -> bool:
        if self.kind == GraphProperty.COMPONENTS:
            return component_count(g) >= self.param + 1
        if self.kind == GraphProperty.MAX_DEGREE:
            return g.max_degree <= self.param
        return not self.alternative(g)


# ---------------------------------------------------------------------------
# 간선 가중치와 최대 신장 구조
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeWeights:
    """완전 그래프 간선 가중치 (대칭, 음이 아님)"""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GraphStructureError(f"가중치 행렬은 정방이어야 합니다: {m.shape}")
        if not np.all(np.isfinite(m)):
            raise GraphStructureError("가중치에 유한하지 않은 값이 있습니다.")
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
            raise GraphStructureError("가중치 행렬이 대칭이 아닙니다.")
        np.fill_diagonal(m, 0.0)
        if (m < 0).any():
            raise GraphStructureError("가중치는 음이 아니어야 합니다.")
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def from_dict(cls, d: int, weights: Dict[Tuple[int, int], float], default: float = 0.0) -> 'EdgeWeights':
        m = np.full((d, d), float(default))
        for e, w in weights.items():
            j, k = _check_edge(e, d)
            m[j - 1, k - 1] = m[k - 1, j - 1] = float(w)
        return cls(m)

    @classmethod
    def from_estimate(cls, matrix: np.ndarray) -> 'EdgeWeights':
        """추정 정밀도 행렬의 |Θ̂_e| (대칭화 후)"""
        m = np.abs(np.asarray(matrix, dtype=float))
        return cls(np.maximum(m, m.T))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def weight(self, j: int, k: int) -> float:
        j, k = _check_edge((j, k), self.d)
        return float(self.matrix[j - 1, k - 1])

    def ordered_edges(self) -> List[Edge]:
        """가중치 내림차순, 동률은 (작은 정점, 큰 정점) 사전순"""
        j_idx, k_idx = np.triu_indices(self.d, 1)
        w = self.matrix[j_idx, k_idx]
        order = np.lexsort((k_idx, j_idx, -w))
        return [(int(j_idx[i]) + 1, int(k_idx[i]) + 1) for i in order]


def _check_dimension(w: EdgeWeights, d: Optional[int]) -> int:
    if d is not None and int(d) != w.d:
        raise GraphStructureError(f"가중치 차원 {w.d} 와 d={d} 가 다릅니다.")
    return w.d


def _tree_order(w: EdgeWeights, edges: Iterable[Edge]) -> List[Edge]:
    return sorted(edges, key=lambda e: (-w.matrix[e[0] - 1, e[1] - 1], e))


def max_spanning_tree(w: EdgeWeights, d: Optional[int] = None) -> EdgeSet:
    """밀집 Prim 최대 신장 트리 (가중치 → 간선 사전순의 엄격한 전순서)"""
    d = _check_dimension(w, d)
    if d < 2:
        raise GraphStructureError(f"신장 트리에는 d ≥ 2 가 필요합니다: d={d}")
    weights = w.matrix
    in_tree = np.zeros(d, dtype=bool)
    in_tree[0] = True
    best_weight = weights[0].copy()
    best_parent = np.zeros(d, dtype=np.int64)
    tree: List[Edge] = []

    for _ in range(d - 1):
        outside = np.flatnonzero(~in_tree)
        lo = np.minimum(best_parent[outside], outside)
        hi = np.maximum(best_parent[outside], outside)
        v = int(outside[np.lexsort((hi, lo, -best_weight[outside]))[0]])
        tree.append(make_edge(best_parent[v] + 1, v + 1))
        in_tree[v] = True

        outside = np.flatnonzero(~in_tree)
        if outside.size == 0:
            break
        new_weight = weights[v, outside]
        cur_lo = np.minimum(best_parent[outside], outside)
        cur_hi = np.maximum(best_parent[outside], outside)
        new_lo = np.minimum(v, outside)
        new_hi = np.maximum(v, outside)
        current = best_weight[outside]
        better = (new_weight > current) | (
            (new_weight == current) & ((new_lo < cur_lo) | ((new_lo == cur_lo) & (new_hi < cur_hi)))
        )
        best_weight[outside[better]] = new_weight[better]
        best_parent[outside[better]] = v

    return frozenset(tree)


def max_spanning_forest(w: EdgeWeights, d: Optional[int] = None, m: int = 1) -> EdgeSet:
    """최대 신장 트리 순서의 상위 d−m 간선 (요소 m 개)"""
    d = _check_dimension(w, d)
    if not 1 <= int(m) <= d:
        raise GraphStructureError(f"요소 수 m 은 1..{d} 이어야 합니다: {m}")
    if d == 1 or m == d:
        return frozenset()
    ordered = _tree_order(w, max_spanning_tree(w, d))
    return frozenset(ordered[:d - int(m)])


# ---------------------------------------------------------------------------
# 탐욕적 구조 탐색
# ---------------------------------------------------------------------------

class StructureKind(Enum):
    CYCLE = "cycle"
    TRIANGLE = "triangle"
    SAP = "sap"
    DEGREE = "degree"


def _minimum_d(target: StructureKind, param: Optional[int]) -> int:
    if target in (StructureKind.CYCLE, StructureKind.TRIANGLE):
        return 3
    if param is None or int(param) < 0:
        raise GraphStructureError(f"{target.value} 탐색에는 0 이상의 파라미터가 필요합니다.")
    if target == StructureKind.SAP:
        if int(param) < 1:
            raise GraphStructureError(f"sap(m) 은 m ≥ 1 이어야 합니다: {param}")
        return int(param) + 2
    return int(param) + 2


class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def _forest_path(nbrs: Sequence[Set[int]], source: int, target: int) -> List[int]:
    parent = {source: None}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == target:
            break
        for v in sorted(nbrs[u]):
            if v not in parent:
                parent[v] = u
                queue.append(v)
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _path_edges(vertices: Sequence[int]) -> EdgeSet:
    return frozenset(make_edge(a, b) for a, b in zip(vertices, vertices[1:]))


def _sap_through(nbrs: Sequence[Set[int]], u: int, v: int, length: int) -> Optional[List[int]]:
    """간선 (u,v) 를 포함하는 간선 length 개 단순 경로 중 정규 순서열이 가장 작은 것"""
    best: Optional[List[int]] = None
    for left_len in range(length):
        right_len = length - 1 - left_len
        for left in _simple_paths(nbrs, u, left_len, banned=frozenset({v})):
            left_set = frozenset(left)
            for right in _simple_paths(nbrs, v, right_len, banned=left_set):
                sequence = left[::-1] + right
                canonical = min(sequence, sequence[::-1])
                if best is None or canonical < best:
                    best = canonical
    return best


def greedy_structure_search(w: EdgeWeights, d: Optional[int] = None,
                            target: Union[StructureKind, str] = StructureKind.CYCLE,
                            param: Optional[int] = None) -> EdgeSet:
    """가중치 내림차순으로 간선을 삽입하며 목표 구조가 처음 나타날 때 그 간선 집합을 반환

    동시에 여러 구조가 완성되면 방금 삽입한 간선을 포함하고
    정규 정점 순서열이 사전순으로 가장 작은 구조를 고른다.
    """
    d = _check_dimension(w, d)
    target = StructureKind(target)
    needed = _minimum_d(target, param)
    if d < needed:
        raise GraphStructureError(f"{target.value} 구조에는 d ≥ {needed} 가 필요합니다: d={d}")

    nbrs: List[Set[int]] = [set() for _ in range(d + 1)]
    forest = _UnionFind(d + 1)

    for j, k in w.ordered_edges():
        if target == StructureKind.CYCLE and forest.find(j) == forest.find(k):
            return _path_edges(_forest_path(nbrs, j, k)) | {(j, k)}
        forest.union(j, k)
        nbrs[j].add(k)
        nbrs[k].add(j)

        if target == StructureKind.TRIANGLE:
            common = nbrs[j] & nbrs[k]
            if common:
                x = min(common)
                return frozenset({(j, k), make_edge(j, x), make_edge(k, x)})
        elif target == StructureKind.DEGREE:
            reached = [v for v in (j, k) if len(nbrs[v]) == int(param) + 1]
            if reached:
                center = min(reached)
                return frozenset(make_edge(center, u) for u in nbrs[center])
        elif target == StructureKind.SAP:
            path = _sap_through(nbrs, j, k, int(param) + 1)
            if path is not None:
                return _path_edges(path)

    raise GraphStructureError(f"모든 간선을 삽입해도 {target.value} 구조가 나타나지 않았습니다.")


# ---------------------------------------------------------------------------
# 정점 버퍼
# ---------------------------------------------------------------------------

def vertex_buffer(g0: Graph, s: Iterable[Edge], t: Iterable[Edge]) -> FrozenSet[int]:
    """V(E₀∪S)∩V(S′) ∪ V(E₀∪S′)∩V(S)"""
    s, t = frozenset(s), frozenset(t)
    base = vertex_support(g0.edges)
    vs, vt = vertex_support(s), vertex_support(t)
    return ((base | vs) & vt) | ((base | vt) & vs)
