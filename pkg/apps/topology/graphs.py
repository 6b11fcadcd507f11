"""
Communication graphs for the decentralized network.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import networkx as nx
import numpy as np
from django.conf import settings

from .exceptions import DisconnectedGraphError, TopologyError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """
    Undirected, connected communication graph stored as a boolean adjacency matrix.
    """
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise TopologyError(f"Adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 2:
            raise TopologyError(f"A graph needs at least 2 agents, got {adj.shape[0]}")
        if not np.array_equal(adj, adj.T):
            raise TopologyError("Adjacency matrix is not symmetric")
        if adj.diagonal().any():
            raise TopologyError("Adjacency matrix has self-loops")
        adj.setflags(write=False)
        object.__setattr__(self, 'adjacency', adj)
        if not nx.is_connected(self.to_networkx()):
            raise DisconnectedGraphError(f"Graph with {adj.shape[0]} agents is not connected")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def neighbors(self, i: int) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def has_edge(self, i: int, j: int) -> bool:
        return 0 <= i < self.n and 0 <= j < self.n and bool(self.adjacency[i, j])

    def edges(self) -> List[Tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.adjacency).sum())

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.adjacency.shape[0]))
        rows, cols = np.nonzero(np.triu(self.adjacency))
        g.add_edges_from(zip(rows.tolist(), cols.tolist()))
        return g

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> 'Graph':
        n = g.number_of_nodes()
        adj = nx.to_numpy_array(g, nodelist=range(n), dtype=float) > 0
        return cls(adj)


def gen_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """
    Erdos-Renyi G(n, p) graph. Disconnected draws are regenerated with seed+1,
    seed+2, ... so the same (n, p, seed) always yields the same graph.
    """
    if n < 2:
        raise TopologyError(f"Erdos-Renyi graph needs n >= 2, got n={n}")
    if not 0 < p <= 1:
        raise TopologyError(f"Edge probability must lie in (0, 1], got p={p}")

    max_attempts = settings.SIMULATION['CONNECT_MAX_ATTEMPTS']
    for attempt in range(max_attempts):
        g = nx.gnp_random_graph(n, p, seed=seed + attempt)
        if nx.is_connected(g):
            if attempt:
                logger.info(f"Erdos-Renyi graph (n={n}, p={p}) connected after {attempt + 1} draws")
            return Graph.from_networkx(g)

    raise DisconnectedGraphError(
        f"No connected Erdos-Renyi graph with n={n}, p={p} after {max_attempts} attempts"
    )


def gen_ring(n: int) -> Graph:
    """Ring where agent i talks to (i-1) mod n and (i+1) mod n."""
    if n < 3:
        raise TopologyError(f"Ring topology requires n >= 3, got n={n}")
    return Graph.from_networkx(nx.cycle_graph(n))


def gen_complete(n: int) -> Graph:
    """Complete graph K_n."""
    if n < 2:
        raise TopologyError(f"Complete graph requires n >= 2, got n={n}")
    return Graph.from_networkx(nx.complete_graph(n))


def write_edge_list(graph: Graph, path) -> None:
    """Write the graph as `i j` lines, 0-indexed, one undirected edge per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{i} {j}" for i, j in graph.edges()]
    path.write_text("\n".join(lines) + "\n", encoding='utf-8')


def read_edge_list(path, n: int = None) -> Graph:
    """
    Read an `i j` edge list. Agents are 0..n-1; when n is omitted it is inferred
    from the largest id.
    """
    g = nx.read_edgelist(Path(path), nodetype=int, data=False)
    size = n if n is not None else (max(g.nodes) + 1 if g.number_of_nodes() else 0)
    if any(node < 0 or node >= size for node in g.nodes):
        raise TopologyError(f"Edge list {path} references agents outside 0..{size - 1}")
    g.add_nodes_from(range(size))
    return Graph.from_networkx(g)
