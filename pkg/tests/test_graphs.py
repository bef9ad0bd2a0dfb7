"""
test_graphs.py - 그래프 표현, 거리, 보행 수, 신장 구조, 탐욕 탐색 테스트
"""

from itertools import combinations, permutations

import networkx as nx
import numpy as np
import pytest

from core.graphs import (
    UNREACHABLE, EdgeWeights, Graph, GraphProperty, PropertySpec, StructureKind,
    chain_edges, closed_walk_count, component_count, connected_components, edge_predistance,
    edgeset_predistance, geodesic_distance, greedy_structure_search, has_clique, has_cycle,
    has_path_of_length, has_triangle, is_connected, max_spanning_forest, max_spanning_tree,
    trace_power, vertex_buffer,
)
from error_handler import GraphStructureError, WalkCountOverflowError


def two_five_cycles() -> Graph:
    edges = chain_edges(1, 5) + [(1, 5)] + chain_edges(6, 10) + [(6, 10)]
    return Graph(10, frozenset(edges))


def random_graph(d: int, p: float, rng: np.random.Generator) -> Graph:
    return Graph(d, frozenset(e for e in combinations(range(1, d + 1), 2) if rng.random() < p))


def random_weights(d: int, rng: np.random.Generator) -> EdgeWeights:
    upper = np.triu(rng.random((d, d)), 1)
    return EdgeWeights(upper + upper.T)


def tree_weight(w: EdgeWeights, edges) -> float:
    return sum(w.weight(j, k) for j, k in edges)


def count_closed_walks(g: Graph, k: int) -> int:
    nbrs = {v: sorted(g.neighbors(v)) for v in range(1, g.d + 1)}

    def walk(start: int, current: int, remaining: int) -> int:
        if remaining == 0:
            return int(current == start)
        return sum(walk(start, u, remaining - 1) for u in nbrs[current])

    return sum(walk(v, v, k) for v in range(1, g.d + 1))


class TestGraph:
    def test_adjacency_symmetric_zero_diagonal(self):
        g = Graph(4, frozenset({(2, 1), (3, 4)}))
        a = g.adjacency
        assert (a == a.T).all()
        assert (np.diagonal(a) == 0).all()
        assert g.edges == frozenset({(1, 2), (3, 4)})

    def test_rejects_self_loop_and_out_of_range(self):
        with pytest.raises(GraphStructureError):
            Graph(3, frozenset({(2, 2)}))
        with pytest.raises(GraphStructureError):
            Graph(3, frozenset({(1, 4)}))

    def test_text_format(self, tmp_path):
        g = two_five_cycles()
        assert g.to_text().splitlines()[0] == "d 10"
        path = tmp_path / "g.txt"
        g.save(path)
        assert Graph.load(path) == g

    def test_text_format_rejects_bad_header(self):
        with pytest.raises(GraphStructureError):
            Graph.from_text("3\n1 2\n")


class TestDistances:
    def test_chain_distance(self):
        g = Graph(4, frozenset(chain_edges(1, 4)))
        assert geodesic_distance(g, 1, 4) == 3
        assert geodesic_distance(g, 2, 2) == 0

    def test_cross_component_unreachable(self):
        assert geodesic_distance(two_five_cycles(), 1, 8) is UNREACHABLE

    def test_unreachable_orders_above_integers(self):
        assert UNREACHABLE > 10 ** 9
        assert 3 < UNREACHABLE
        assert min(7, UNREACHABLE) == 7

    def test_vertex_out_of_range(self):
        with pytest.raises(GraphStructureError):
            geodesic_distance(Graph.empty(3), 0, 2)

    def test_predistance_two_cycles(self):
        g = two_five_cycles()
        assert edge_predistance(g, (1, 6), (4, 9)) == 2
        assert edge_predistance(g, (4, 9), (1, 6)) == 2
        assert edge_predistance(g, (1, 6), (1, 6)) == 0

    def test_predistance_split_path(self):
        g = Graph(10, frozenset(chain_edges(1, 5) + chain_edges(6, 10)))
        assert edge_predistance(g, (4, 5), (6, 7)) is UNREACHABLE

    def test_predistance_ignores_membership(self):
        g = Graph(6, frozenset(chain_edges(1, 6)))
        assert edge_predistance(g, (1, 2), (5, 6)) == 3
        assert edge_predistance(g.without_edges([(1, 2)]), (1, 2), (5, 6)) == 3
        assert edge_predistance(g, (1, 3), (5, 6)) == 2

    def test_edgeset_predistance(self):
        g = two_five_cycles()
        assert edgeset_predistance(g, [(1, 6)], [(4, 9)]) == edge_predistance(g, (1, 6), (4, 9))
        s = [(1, 2), (3, 4)]
        assert edgeset_predistance(g, s, s) == 0
        with pytest.raises(GraphStructureError):
            edgeset_predistance(g, [], s)

    def test_edgeset_predistance_matches_pairwise_oracle(self):
        rng = np.random.default_rng(3)
        g = random_graph(8, 0.3, rng)
        s = [(1, 2), (3, 7)]
        t = [(4, 8), (5, 6), (2, 6)]
        expected = min(edge_predistance(g, e, f) for e in s for f in t)
        assert edgeset_predistance(g, s, t) == expected


class TestClosedWalks:
    def test_cycle_k2(self):
        d = 7
        g = Graph(d, frozenset(chain_edges(1, d) + [(1, d)]))
        assert closed_walk_count(g, 2) == 2 * d

    def test_k1_is_zero(self):
        assert closed_walk_count(two_five_cycles(), 1) == 0

    def test_triangle(self):
        assert closed_walk_count(Graph(3, frozenset({(1, 2), (2, 3), (1, 3)})), 3) == 6

    def test_matches_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            d = int(rng.integers(2, 7))
            g = random_graph(d, float(rng.uniform(0.2, 0.8)), rng)
            for k in range(1, 7):
                assert closed_walk_count(g, k) == count_closed_walks(g, k)

    def test_multigraph_sum(self):
        a0 = Graph(4, frozenset(chain_edges(1, 4))).adjacency
        ae = Graph(4, frozenset({(1, 4)})).adjacency
        doubled = a0 + 2 * ae
        brute = int(np.trace(np.linalg.matrix_power(doubled, 4)))
        assert trace_power(doubled, 4) == brute

    def test_overflow_detected(self):
        with pytest.raises(WalkCountOverflowError):
            trace_power(np.full((2, 2), 2 ** 40, dtype=np.int64), 3)

    def test_rejects_nonpositive_k(self):
        with pytest.raises(GraphStructureError):
            closed_walk_count(Graph.empty(3), 0)


class TestComponents:
    def test_edgeless(self):
        assert connected_components(Graph.empty(4)) == [[1], [2], [3], [4]]

    def test_chain(self):
        assert connected_components(Graph(5, frozenset(chain_edges(1, 5)))) == [[1, 2, 3, 4, 5]]

    def test_split_path_with_isolated(self):
        g = Graph(8, frozenset(chain_edges(1, 3) + chain_edges(4, 6)))
        assert connected_components(g) == [[1, 2, 3], [4, 5, 6], [7], [8]]

    def test_edge_insertion_changes_count_by_at_most_one(self):
        rng = np.random.default_rng(5)
        g = random_graph(9, 0.15, rng)
        for e in combinations(range(1, 10), 2):
            before, after = component_count(g), component_count(g.with_edges([e]))
            assert before - after in (0, 1)

    def test_predicates_match_networkx(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            g = random_graph(7, 0.3, rng)
            ng = nx.Graph(list(g.edges))
            ng.add_nodes_from(range(1, 8))
            assert is_connected(g) == nx.is_connected(ng)
            assert has_cycle(g) == (len(nx.cycle_basis(ng)) > 0)
            assert has_triangle(g) == (sum(nx.triangles(ng).values()) > 0)
            assert has_clique(g, 3) == has_triangle(g)

    def test_path_of_length(self):
        g = Graph(6, frozenset(chain_edges(1, 4)))
        assert has_path_of_length(g, 3)
        assert not has_path_of_length(g, 4)


class TestSpanningStructures:
    def test_three_vertex_example(self):
        w = EdgeWeights.from_dict(3, {(1, 2): 0.9, (2, 3): 0.8, (1, 3): 0.5})
        assert max_spanning_tree(w) == frozenset({(1, 2), (2, 3)})

    def test_equal_weights_lexicographic(self):
        w = EdgeWeights(np.ones((5, 5)))
        assert max_spanning_tree(w) == frozenset({(1, 2), (1, 3), (1, 4), (1, 5)})

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(21)
        all_edges = list(combinations(range(1, 6), 2))
        for _ in range(10):
            w = random_weights(5, rng)
            best = max(
                (subset for subset in combinations(all_edges, 4)
                 if nx.is_tree(nx.Graph(list(subset))) and len(nx.Graph(list(subset))) == 5),
                key=lambda subset: tree_weight(w, subset),
            )
            tree = max_spanning_tree(w)
            assert tree == frozenset(best)
            assert tree_weight(w, tree) == pytest.approx(tree_weight(w, best))

    def test_tree_is_spanning_and_acyclic(self):
        w = random_weights(12, np.random.default_rng(1))
        tree = max_spanning_tree(w)
        assert len(tree) == 11
        assert nx.is_tree(nx.Graph(list(tree)))

    def test_rejects_small_d(self):
        with pytest.raises(GraphStructureError):
            max_spanning_tree(EdgeWeights(np.zeros((1, 1))))

    def test_forest_edge_cases(self):
        w = random_weights(5, np.random.default_rng(2))
        assert max_spanning_forest(w, m=5) == frozenset()
        assert max_spanning_forest(w, m=1) == max_spanning_tree(w)
        with pytest.raises(GraphStructureError):
            max_spanning_forest(w, m=6)

    def test_forest_matches_brute_force(self):
        rng = np.random.default_rng(4)
        all_edges = list(combinations(range(1, 6), 2))
        for _ in range(10):
            w = random_weights(5, rng)
            forests = [subset for subset in combinations(all_edges, 3)
                       if nx.is_forest(nx.Graph(list(subset)))]
            best = max(forests, key=lambda subset: tree_weight(w, subset))
            forest = max_spanning_forest(w, m=2)
            assert forest == frozenset(best)
            assert component_count(Graph(5, forest)) == 2


class TestGreedySearch:
    def test_cycle_on_three_vertices(self):
        w = EdgeWeights.from_dict(3, {(1, 2): 0.9, (2, 3): 0.8, (1, 3): 0.5})
        assert greedy_structure_search(w, target=StructureKind.CYCLE) == frozenset({(1, 2), (2, 3), (1, 3)})

    def test_degree_star(self):
        w = EdgeWeights.from_dict(4, {(1, 2): 0.9, (1, 3): 0.8, (2, 3): 0.1, (2, 4): 0.2,
                                      (3, 4): 0.3, (1, 4): 0.05})
        assert greedy_structure_search(w, target=StructureKind.DEGREE, param=1) == frozenset({(1, 2), (1, 3)})

    def test_cycle_output_is_simple_cycle(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            edges = greedy_structure_search(random_weights(8, rng), target='cycle')
            g = nx.Graph(list(edges))
            assert all(deg == 2 for _, deg in g.degree())
            assert nx.is_connected(g)

    def test_degree_output_is_star(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            edges = greedy_structure_search(random_weights(8, rng), target='degree', param=3)
            g = nx.Graph(list(edges))
            assert len(edges) == 4
            assert sorted(deg for _, deg in g.degree())[-1] == 4

    def test_triangle_first_appearance(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            w = random_weights(7, rng)
            found = greedy_structure_search(w, target='triangle')
            inserted = []
            for e in w.ordered_edges():
                inserted.append(e)
                if has_triangle(Graph(7, frozenset(inserted))):
                    break
            assert e in found
            assert found <= frozenset(inserted)
            assert len(vertex_support_of(found)) == 3

    def test_sap_matches_replay_oracle(self):
        rng = np.random.default_rng(13)
        m = 3
        for _ in range(10):
            w = random_weights(6, rng)
            found = greedy_structure_search(w, target=StructureKind.SAP, param=m)
            inserted = set()
            expected = None
            for e in w.ordered_edges():
                inserted.add(e)
                candidates = []
                for seq in permutations(range(1, 7), m + 2):
                    steps = {tuple(sorted(p)) for p in zip(seq, seq[1:])}
                    if steps <= inserted and e in steps:
                        candidates.append(min(list(seq), list(seq[::-1])))
                if candidates:
                    best = min(candidates)
                    expected = frozenset(tuple(sorted(p)) for p in zip(best, best[1:]))
                    break
            assert found == expected

    def test_too_small_d(self):
        with pytest.raises(GraphStructureError):
            greedy_structure_search(EdgeWeights(np.ones((2, 2))), target='triangle')
        with pytest.raises(GraphStructureError):
            greedy_structure_search(EdgeWeights(np.ones((4, 4))), target='sap', param=3)


def vertex_support_of(edges):
    return {v for e in edges for v in e}


class TestVertexBuffer:
    def test_clique_panel(self):
        s = frozenset(combinations([1, 3, 5, 7, 9], 2))
        t = frozenset(combinations([1, 2, 3, 9, 10], 2))
        assert vertex_buffer(Graph.empty(10), s, t) == frozenset({1, 3, 9})

    def test_cycle_panel(self):
        s = frozenset({(1, 3), (3, 5), (5, 7), (7, 9), (1, 9)})
        t = frozenset({(1, 2), (2, 3), (3, 9), (9, 10), (1, 10)})
        assert vertex_buffer(Graph.empty(10), s, t) == frozenset({1, 3, 9})

    def test_disjoint(self):
        assert vertex_buffer(Graph.empty(6), {(1, 2)}, {(3, 4)}) == frozenset()

    def test_base_extends_buffer(self):
        g0 = Graph(6, frozenset({(2, 3)}))
        assert vertex_buffer(g0, {(1, 2)}, {(3, 4)}) == frozenset({2, 3})


class TestPropertySpec:
    def test_parse_and_label(self):
        spec = PropertySpec.parse("max-degree", 2)
        assert spec.kind == GraphProperty.MAX_DEGREE
        assert spec.label == "max_degree(2)"
        assert spec.upper_level == 3

    def test_unknown_property(self):
        with pytest.raises(GraphStructureError):
            PropertySpec.parse("planarity")

    def test_components_null_and_alternative(self):
        spec = PropertySpec(GraphProperty.COMPONENTS, 2)
        split = Graph(6, frozenset(chain_edges(1, 3) + chain_edges(4, 6)))
        assert spec.alternative(split) and not spec.null(split)
        assert spec.null(Graph(6, frozenset(chain_edges(1, 3))))

    def test_validate_ranges(self):
        with pytest.raises(GraphStructureError):
            PropertySpec(GraphProperty.SAP, 5).validate(6)
        with pytest.raises(GraphStructureError):
            PropertySpec(GraphProperty.CLIQUE, 1).validate(6)
        PropertySpec(GraphProperty.COMPONENTS, 5).validate(6)
        with pytest.raises(GraphStructureError):
            PropertySpec(GraphProperty.COMPONENTS, 6).validate(6)
        with pytest.raises(GraphStructureError):
            PropertySpec(GraphProperty.COMPONENTS, 0).validate(6)
