import numpy as np
import pytest

from apps.topology.exceptions import DisconnectedGraphError, TopologyError
from apps.topology.graphs import (
    Graph, gen_complete, gen_erdos_renyi, gen_ring, read_edge_list, write_edge_list,
)


class TestErdosRenyi:
    def test_two_agents_with_certain_edge(self):
        graph = gen_erdos_renyi(2, 1.0, seed=3)
        assert graph.edges() == [(0, 1)]
        assert graph.degrees.tolist() == [1, 1]

    def test_probability_one_gives_complete_graph(self):
        graph = gen_erdos_renyi(5, 1.0, seed=11)
        assert graph.degrees.tolist() == [4] * 5

    def test_seeded_graph_is_connected_with_plausible_edge_count(self):
        graph = gen_erdos_renyi(16, 0.5, seed=7)
        assert 30 <= graph.edge_count <= 90
        assert graph.degrees.min() >= 1

    def test_same_seed_same_graph(self):
        first = gen_erdos_renyi(12, 0.3, seed=21)
        second = gen_erdos_renyi(12, 0.3, seed=21)
        assert np.array_equal(first.adjacency, second.adjacency)

    def test_adjacency_invariants(self):
        graph = gen_erdos_renyi(10, 0.4, seed=2)
        adj = graph.adjacency
        assert np.array_equal(adj, adj.T)
        assert not adj.diagonal().any()
        assert graph.degrees.tolist() == adj.sum(axis=1).tolist()

    def test_unconnectable_configuration_names_parameters(self, settings):
        settings.SIMULATION = {**settings.SIMULATION, 'CONNECT_MAX_ATTEMPTS': 3}
        with pytest.raises(DisconnectedGraphError, match=r"n=40, p=0\.001"):
            gen_erdos_renyi(40, 0.001, seed=0)

    @pytest.mark.parametrize('n, p', [(1, 0.5), (5, 0.0), (5, 1.5)])
    def test_rejects_bad_parameters(self, n, p):
        with pytest.raises(TopologyError):
            gen_erdos_renyi(n, p, seed=0)


class TestRing:
    def test_triangle(self):
        assert gen_ring(3).degrees.tolist() == [2, 2, 2]

    def test_four_cycle_has_no_chord(self):
        graph = gen_ring(4)
        assert not graph.adjacency[0, 2]
        assert graph.neighbors(0) == [1, 3]

    def test_fifty_ring(self):
        graph = gen_ring(50)
        assert graph.edge_count == 50
        assert set(graph.degrees.tolist()) == {2}

    def test_too_small(self):
        with pytest.raises(TopologyError):
            gen_ring(2)


class TestGraphValidation:
    def test_asymmetric_adjacency_rejected(self):
        adj = np.array([[0, 1, 0], [0, 0, 1], [0, 1, 0]], dtype=bool)
        with pytest.raises(TopologyError, match='symmetric'):
            Graph(adj)

    def test_disconnected_adjacency_rejected(self):
        adj = np.zeros((4, 4), dtype=bool)
        adj[0, 1] = adj[1, 0] = True
        adj[2, 3] = adj[3, 2] = True
        with pytest.raises(DisconnectedGraphError):
            Graph(adj)


def test_edge_list_round_trip(tmp_path):
    graph = gen_erdos_renyi(9, 0.4, seed=5)
    path = tmp_path / 'graph.txt'
    write_edge_list(graph, path)

    lines = path.read_text().strip().splitlines()
    assert len(lines) == graph.edge_count
    assert all(len(line.split()) == 2 for line in lines)
    assert np.array_equal(read_edge_list(path, n=9).adjacency, graph.adjacency)


def test_complete_graph():
    assert gen_complete(4).edge_count == 6
