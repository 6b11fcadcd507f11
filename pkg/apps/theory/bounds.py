"""
Closed-form quantities of the convergence analysis: consensus products,
the A_K / B_K / C_K constants, the learning-rate gate and the bound Phi.
All of them are diagnostics; nothing here changes training.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from apps.topology.mixing import MixingMatrix, consensus_distance

from .exceptions import TheoryError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TheoryConstants:
    L: float
    chi: float
    kappa: float
    T: int
    eta: float
    K: int
    c: float

    def __post_init__(self):
        for name in ('L', 'eta', 'c'):
            if getattr(self, name) <= 0:
                raise TheoryError(f"{name} must be positive, got {getattr(self, name)}")
        if self.T < 1 or self.K < 1:
            raise TheoryError(f"T and K must be at least 1, got T={self.T}, K={self.K}")
        if self.chi < 0 or self.kappa < 0:
            raise TheoryError("chi and kappa must be nonnegative")

    @property
    def c_ceiling(self) -> float:
        return c_ceiling(self.eta, self.T, self.L)

    def as_dict(self) -> dict:
        return asdict(self)


def c_ceiling(eta: float, T: int, L: float) -> float:
    """Upper end of the admissible c range: 1/2 - 8 eta^2 T^2 L^2."""
    return 0.5 - 8.0 * eta ** 2 * T ** 2 * L ** 2


def rho_products(mixing: MixingMatrix, K: int) -> np.ndarray:
    """
    table[s, k] = rho_{s,k-1} = ||A^(k-s) - Q||_2 for 1 <= s < k <= K; the
    remaining entries are zero.
    """
    if K < 1:
        raise TheoryError(f"Horizon K must be at least 1, got {K}")
    distances = [0.0] + [consensus_distance(mixing, m) for m in range(1, K)]
    return _table_from_distances(distances, K)


def geometric_rho_table(rho: float, K: int) -> np.ndarray:
    """rho_{s,k-1} = rho^(k-s), the constant-matrix case without an eigensolve."""
    if not 0.0 <= rho < 1.0:
        raise TheoryError(f"rho must lie in [0, 1), got {rho}")
    if K < 1:
        raise TheoryError(f"Horizon K must be at least 1, got {K}")
    return _table_from_distances([0.0] + [rho ** m for m in range(1, K)], K)


def _table_from_distances(distances, K: int) -> np.ndarray:
    table = np.zeros((K + 1, K + 1))
    for k in range(2, K + 1):
        for s in range(1, k):
            table[s, k] = distances[k - s]
    return table


def abc_constants(table: np.ndarray, K: int) -> Tuple[float, float, float]:
    """
    A_K = (1/K) sum_k sum_{s<k} rho^2,
    B_K = (1/K) sum_k (sum_{s<k} rho)^2,
    C_K = max_s sum_{k>s} rho_{s,k-1} (sum_{l<k} rho_{l,k-1}).
    """
    if table.shape[0] < K + 1 or table.shape[1] < K + 1:
        raise TheoryError(f"Table of shape {table.shape} does not cover horizon {K}")
    column_sums = [table[1:k, k].sum() for k in range(K + 1)]
    A = sum((table[1:k, k] ** 2).sum() for k in range(1, K + 1)) / K
    B = sum(column_sums[k] ** 2 for k in range(1, K + 1)) / K
    C = 0.0
    for s in range(1, K):
        C = max(C, sum(table[s, k] * column_sums[k] for k in range(s + 1, K + 1)))
    return float(A), float(B), float(C)


def lr_gate(T: int, L: float, C_K: float) -> float:
    """Largest admissible eta: min(1/(24TL), 1/(32TL sqrt(C_K)))."""
    if T <= 0 or L <= 0:
        raise TheoryError(f"T and L must be positive, got T={T}, L={L}")
    gate = 1.0 / (24.0 * T * L)
    if C_K > 0:
        gate = min(gate, 1.0 / (32.0 * T * L * math.sqrt(C_K)))
    return gate


@dataclass(frozen=True)
class PhiBound:
    phi: float
    rhs: Optional[float]


def phi_bound(tc: TheoryConstants, A_K: float, B_K: float, N: int,
              F0: float = None, F_star: float = None) -> PhiBound:
    """
    Phi = (1/c) { eta L (1 + 4 eta T L) chi^2
                  + (1/N) [eta L (4 kappa^2 T + chi^2) + 6 T eta^2 chi^2 L^2]
                  + 64 eta^2 T L^2 (A_K chi^2 + B_K T (kappa^2 + T eta^2 chi^2 L^2)) }

    With F0 and F_star the full right-hand side (F0 - F_star)/(c T K eta) + Phi
    is returned as well.
    """
    ceiling = tc.c_ceiling
    if not 0 < tc.c < ceiling:
        raise TheoryError(
            f"c={tc.c} violates 0 < c < 1/2 - 8 eta^2 T^2 L^2 = {ceiling:.6g}"
        )
    if N < 1:
        raise TheoryError(f"Agent count must be positive, got {N}")
    eta, L, T, chi2, kappa2 = tc.eta, tc.L, tc.T, tc.chi ** 2, tc.kappa ** 2

    local = eta * L * (1 + 4 * eta * T * L) * chi2
    averaged = (eta * L * (4 * kappa2 * T + chi2) + 6 * T * eta ** 2 * chi2 * L ** 2) / N
    consensus = 64 * eta ** 2 * T * L ** 2 * (A_K * chi2 + B_K * T * (kappa2 + T * eta ** 2 * chi2 * L ** 2))
    phi = (local + averaged + consensus) / tc.c

    rhs = None
    if F0 is not None and F_star is not None:
        rhs = (F0 - F_star) / (tc.c * T * tc.K * eta) + phi
    return PhiBound(phi=float(phi), rhs=None if rhs is None else float(rhs))
