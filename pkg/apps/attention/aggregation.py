"""
Attention aggregation of node-specific heads.

For agent i with previous-round head h_i and cached neighbor heads h_j:

    x_j     = beta . (h_i || h_j)
    alpha_j = softmax over the active set of ELU(x_j)
    w_ns    = mu * w_lu + (1 - mu) * ELU(sum_j alpha_j h_j)

ELU is applied elementwise to the aggregated parameter vector, biases
included.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from apps.nn_core.network import elu, elu_grad

from .exceptions import AttentionError

logger = logging.getLogger(__name__)


@dataclass
class AttentionState:
    beta: np.ndarray
    w_lu: np.ndarray
    own_prev_head: np.ndarray
    neighbor_heads: Dict[int, np.ndarray] = field(default_factory=dict)
    mu: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise AttentionError(f"Fusion parameter mu must lie in [0, 1], got {self.mu}")
        self.validate()

    @property
    def head_size(self) -> int:
        return self.w_lu.shape[0]

    def validate(self) -> None:
        F = self.head_size
        if self.beta.shape != (2 * F,):
            raise AttentionError(f"beta has shape {self.beta.shape}, expected ({2 * F},)")
        if self.own_prev_head.shape != (F,):
            raise AttentionError(f"own head has shape {self.own_prev_head.shape}, expected ({F},)")
        for j, head in self.neighbor_heads.items():
            if head.shape != (F,):
                raise AttentionError(f"head of neighbor {j} has shape {head.shape}, expected ({F},)")


@dataclass(frozen=True)
class AttentionCache:
    neighbors: Tuple[int, ...]
    heads: np.ndarray         # (k, F)
    concat: np.ndarray        # (k, 2F)
    x: np.ndarray
    e: np.ndarray
    alphas: np.ndarray
    z: np.ndarray
    z_grad: np.ndarray

    def alpha_map(self) -> Dict[int, float]:
        return {j: float(a) for j, a in zip(self.neighbors, self.alphas)}


def _active_neighbors(state: AttentionState, active: Iterable[int]) -> Tuple[int, ...]:
    neighbors = tuple(sorted(active))
    if not neighbors:
        raise AttentionError("Attention needs a nonempty active neighbor set")
    missing = [j for j in neighbors if j not in state.neighbor_heads]
    if missing:
        raise AttentionError(f"No cached head for active neighbors {missing}")
    return neighbors


def attention_coeffs(state: AttentionState, active: Iterable[int]) -> Tuple[np.ndarray, AttentionCache]:
    """Coefficients over the active set, ordered by neighbor id."""
    neighbors = _active_neighbors(state, active)
    heads = np.stack([state.neighbor_heads[j] for j in neighbors])
    own = np.broadcast_to(state.own_prev_head, heads.shape)
    concat = np.concatenate([own, heads], axis=1)
    x = concat @ state.beta
    e = elu(x)
    weights = np.exp(e - e.max())
    alphas = weights / weights.sum()
    z = alphas @ heads
    cache = AttentionCache(
        neighbors=neighbors, heads=heads, concat=concat, x=x, e=e,
        alphas=alphas, z=z, z_grad=elu_grad(z),
    )
    return alphas, cache


def fuse_head(state: AttentionState, alphas: np.ndarray, cache: AttentionCache) -> np.ndarray:
    if alphas.shape != (len(cache.neighbors),):
        raise AttentionError(f"{alphas.shape[0]} coefficients for {len(cache.neighbors)} neighbors")
    if state.mu == 1.0:
        return state.w_lu.copy()
    return state.mu * state.w_lu + (1.0 - state.mu) * elu(alphas @ cache.heads)


def attention_backward(upstream: np.ndarray, state: AttentionState,
                       cache: AttentionCache) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of a loss on w_ns with respect to w_lu and beta:

        grad_wlu  = mu * upstream
        u         = (1 - mu) * upstream * ELU'(z)
        grad_beta = sum_j (h_j . u) * alpha_j * (g_j c_j - sum_l alpha_l g_l c_l),  g = ELU'(x)
    """
    F = state.head_size
    if upstream.shape != (F,) or cache.heads.shape[1] != F or cache.concat.shape[1] != state.beta.shape[0]:
        raise AttentionError("Attention cache does not match the current state; recompute the forward pass")

    grad_wlu = state.mu * upstream
    u = (1.0 - state.mu) * upstream * cache.z_grad
    scores = cache.heads @ u
    scaled = elu_grad(cache.x)[:, None] * cache.concat
    centred = scaled - cache.alphas @ scaled
    grad_beta = (scores * cache.alphas) @ centred
    return grad_wlu, grad_beta


@dataclass(frozen=True)
class MuBound:
    bound: float
    D: float
    simplified_D: Optional[float]
    degree: int


def mu_lower_bound(state: AttentionState, active: Iterable[int]) -> MuBound:
    """
    Smallest fusion parameter for which the attention term stays a
    contraction:

        D = [sum_j |h_j|^2] * [sum_j sum_{l != j} |g_j c_j - g_l c_l|^2]
        bound = max(0, 1 - 1 / sqrt(d (d - 1) D))

    The bound is 0 when d = 1 or D = 0. When every x_j >= 0 the second factor
    reduces to the pairwise head distances, reported as `simplified_D`.
    """
    neighbors = _active_neighbors(state, active)
    degree = len(neighbors)
    _, cache = attention_coeffs(state, neighbors)

    scaled = elu_grad(cache.x)[:, None] * cache.concat
    pair_scaled = ((scaled[:, None, :] - scaled[None, :, :]) ** 2).sum()
    head_energy = float((cache.heads ** 2).sum())
    D = head_energy * float(pair_scaled)

    simplified = None
    if (cache.x >= 0).all():
        pair_heads = ((cache.heads[:, None, :] - cache.heads[None, :, :]) ** 2).sum()
        simplified = head_energy * float(pair_heads)

    if degree == 1 or D == 0.0:
        bound = 0.0
    else:
        bound = min(1.0, max(0.0, 1.0 - 1.0 / np.sqrt(degree * (degree - 1) * D)))
    return MuBound(bound=float(bound), D=D, simplified_D=simplified, degree=degree)
