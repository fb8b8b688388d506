import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coreness.errors import InvalidNode
from coreness.graph import Labeling, build_graph, degrees, two_core


def test_path_graph():
    g = build_graph(3, [(0, 1), (1, 2)])
    assert g.m == 2
    assert degrees(g).tolist() == [1, 2, 1]
    assert g.adjacency == [[1], [0, 2], [1]]


def test_duplicates_collapse():
    g = build_graph(2, [(0, 1), (1, 0), (0, 1)])
    assert g.m == 1
    assert g.report.duplicates == 2


def test_empty_graph():
    g = build_graph(4, [])
    assert g.m == 0
    assert degrees(g).tolist() == [0, 0, 0, 0]


def test_complete_graph_degrees():
    g = build_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    assert degrees(g).tolist() == [3, 3, 3, 3]


def test_self_loops_dropped_and_reported():
    g = build_graph(3, [(0, 0), (0, 1), (2, 2)])
    assert g.m == 1
    assert g.report.self_loops == 2


@pytest.mark.parametrize("edge", [(0, 3), (-1, 0)])
def test_out_of_range(edge):
    with pytest.raises(InvalidNode):
        build_graph(3, [edge])


def test_reverse_index_points_to_opposite_edge():
    g = build_graph(5, [(0, 1), (1, 2), (2, 0), (3, 4), (0, 4)])
    src = g.sources
    for p in range(g.indices.shape[0]):
        r = g.reverse[p]
        assert src[r] == g.indices[p] and g.indices[r] == src[p]


def test_subgraph_relabels():
    g = build_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    sub, kept = g.subgraph([3, 1, 2])
    assert kept.tolist() == [1, 2, 3]
    assert sub.n == 3 and sub.edges.tolist() == [[0, 1], [1, 2]]


def test_two_core_strips_trees():
    # triangle with a pendant path
    g = build_graph(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)])
    assert two_core(g).tolist() == [True, True, True, False, False]


def test_labeling_values():
    lab = Labeling([1, 2, 2, 1])
    assert lab.core_size == 2
    assert lab.complement().groups.tolist() == [2, 1, 1, 2]
    with pytest.raises(ValueError):
        Labeling([0, 1])


edge_lists = st.integers(2, 15).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=40)))


@settings(max_examples=100, deadline=None)
@given(edge_lists, st.randoms(use_true_random=False))
def test_invariants(data, rnd):
    n, edges = data
    g = build_graph(n, edges)
    assert degrees(g).sum() == 2 * g.m
    adj = g.adjacency
    for i in range(n):
        assert i not in adj[i]
        assert adj[i] == sorted(set(adj[i]))
        for j in adj[i]:
            assert i in adj[j]
    shuffled = [(j, i) if rnd.random() < 0.5 else (i, j) for i, j in edges]
    rnd.shuffle(shuffled)
    assert build_graph(n, shuffled) == g
    assert np.array_equal(build_graph(n, shuffled).indices, g.indices)
