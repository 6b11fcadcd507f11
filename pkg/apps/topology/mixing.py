"""
Doubly stochastic gossip weights and their spectral diagnostics.
"""
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from django.conf import settings

from .exceptions import MixingMatrixError
from .graphs import Graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixingMatrix:
    """
    Symmetric doubly stochastic matrix with its eigenvalues sorted by
    decreasing magnitude.
    """
    weights: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def rho(self) -> float:
        if self.n < 2:
            return 0.0
        return float(abs(self.eigenvalues[1]))

    @property
    def spectral_gap(self) -> float:
        return 1.0 - self.rho


def _sorted_eigenvalues(weights: np.ndarray) -> np.ndarray:
    eigenvalues = np.linalg.eigvalsh(weights)
    # ties in magnitude (bipartite graphs) keep +1 ahead of -1
    magnitudes = np.round(np.abs(eigenvalues), 12)
    order = np.lexsort((-eigenvalues, -magnitudes))
    return eigenvalues[order]


def _check_stochastic(weights: np.ndarray, graph: Graph = None) -> None:
    tol = settings.SIMULATION['STOCHASTIC_TOLERANCE']
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
        raise MixingMatrixError(f"Mixing matrix must be square, got shape {weights.shape}")
    if not np.array_equal(weights, weights.T):
        raise MixingMatrixError("Mixing matrix is not symmetric")
    if (weights < 0).any():
        raise MixingMatrixError("Mixing matrix has negative entries")
    ones = np.ones(weights.shape[0])
    if np.abs(weights @ ones - ones).max() > tol:
        raise MixingMatrixError("Mixing matrix rows do not sum to 1")
    if np.abs(ones @ weights - ones).max() > tol:
        raise MixingMatrixError("Mixing matrix columns do not sum to 1")
    if graph is not None:
        if graph.n != weights.shape[0]:
            raise MixingMatrixError(f"Mixing matrix size {weights.shape[0]} does not match graph size {graph.n}")
        off_support = ~graph.adjacency & ~np.eye(graph.n, dtype=bool)
        if (weights[off_support] != 0).any():
            raise MixingMatrixError("Mixing matrix puts weight on pairs that are not linked")


def mixing_from_weights(weights, graph: Graph = None, require_gap: bool = True) -> MixingMatrix:
    """
    Validate a weight matrix and attach its spectrum. With require_gap the
    matrix must have rho < 1 (spectral gap > 0).
    """
    weights = np.array(weights, dtype=np.float64)
    _check_stochastic(weights, graph)
    eigenvalues = _sorted_eigenvalues(weights)
    weights.setflags(write=False)
    mixing = MixingMatrix(weights=weights, eigenvalues=eigenvalues)

    if abs(eigenvalues[0] - 1.0) > settings.SIMULATION['GAP_TOLERANCE']:
        raise MixingMatrixError(f"Leading eigenvalue is {eigenvalues[0]!r}, expected 1")
    if require_gap and mixing.rho >= 1.0 - settings.SIMULATION['GAP_TOLERANCE']:
        raise MixingMatrixError(
            f"Mixing matrix has no spectral gap (rho={mixing.rho:.6f}); "
            "use the lazy Metropolis variant"
        )
    return mixing


def metropolis_weights(graph: Graph, lazy: bool = True, require_gap: bool = True) -> MixingMatrix:
    """
    Metropolis rule: off-diagonal 1/max{d_i, d_j} (non-lazy) or
    1/(1 + max{d_i, d_j}) (lazy), diagonal 1 - sum of the row.

    The non-lazy rule has rho = 1 on bipartite graphs such as even rings and is
    rejected there unless require_gap is off (diagnostics only).
    """
    degrees = graph.degrees
    pair_max = np.maximum.outer(degrees, degrees).astype(np.float64)
    offset = 1.0 if lazy else 0.0
    weights = np.where(graph.adjacency, 1.0 / (pair_max + offset), 0.0)
    np.fill_diagonal(weights, 0.0)
    np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))

    mixing = mixing_from_weights(weights, graph, require_gap=require_gap)
    logger.debug(f"Metropolis weights (lazy={lazy}) on {graph.n} agents: rho={mixing.rho:.6f}")
    return mixing


def uniform_averaging(n: int) -> MixingMatrix:
    """Q = (1/N) 11^T, exact averaging in one step (rho = 0)."""
    return mixing_from_weights(np.full((n, n), 1.0 / n))


def identity_mixing(n: int) -> MixingMatrix:
    """No mixing at all; diagnostic only, it has no spectral gap."""
    return mixing_from_weights(np.eye(n), require_gap=False)


def spectral_diagnostics(mixing: Union[MixingMatrix, np.ndarray]) -> Tuple[float, float, np.ndarray]:
    """
    Return (rho, spectral gap, eigenvalues sorted by decreasing magnitude).
    """
    weights = mixing.weights if isinstance(mixing, MixingMatrix) else np.asarray(mixing, dtype=np.float64)
    if not np.array_equal(weights, weights.T):
        raise MixingMatrixError("Spectral diagnostics need a symmetric matrix")
    eigenvalues = _sorted_eigenvalues(weights)
    if abs(eigenvalues[0] - 1.0) > settings.SIMULATION['GAP_TOLERANCE']:
        raise MixingMatrixError(f"Leading eigenvalue is {eigenvalues[0]!r}, expected 1")
    rho = float(abs(eigenvalues[1])) if len(eigenvalues) > 1 else 0.0
    return rho, 1.0 - rho, eigenvalues


def consensus_distance(mixing: MixingMatrix, power: int) -> float:
    """Operator norm ||A^power - Q||_2 computed by a symmetric eigensolve."""
    n = mixing.n
    deviation = np.linalg.matrix_power(mixing.weights, power) - np.full((n, n), 1.0 / n)
    deviation = (deviation + deviation.T) / 2.0
    return float(np.abs(np.linalg.eigvalsh(deviation)).max())
