"""
Per-agent training state shared by every protocol.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np
from django.conf import settings

from apps.attention.aggregation import AttentionState
from apps.datagen.datasets import Dataset, ShardAssignment
from apps.nn_core.layout import ParamLayout, ParamVector, init_params
from apps.nn_core.optim import OptState
from apps.topology.graphs import Graph

from .exceptions import ProtocolError

logger = logging.getLogger(__name__)


@dataclass
class TrackerState:
    y: np.ndarray
    last_grad: np.ndarray


@dataclass
class AgentState:
    agent_id: int
    params: ParamVector
    train: Dataset
    test: Dataset
    neighbors: List[int]
    w_lu: np.ndarray
    beta: np.ndarray
    prev_own_head: np.ndarray
    opt: OptState
    opt_global: OptState
    opt_lu: OptState
    opt_beta: OptState
    batch_rng: np.random.Generator = field(repr=False)
    mu: float = 0.9
    neighbor_heads: Dict[int, np.ndarray] = field(default_factory=dict)
    active_in: Set[int] = field(default_factory=set)
    active_out: Set[int] = field(default_factory=set)
    last_alphas: Dict[int, float] = field(default_factory=dict)
    tracker: Optional[TrackerState] = None

    @property
    def layout(self) -> ParamLayout:
        return self.params.layout

    @property
    def n_samples(self) -> int:
        return len(self.train)

    def attention_state(self) -> AttentionState:
        return AttentionState(
            beta=self.beta,
            w_lu=self.w_lu,
            own_prev_head=self.prev_own_head,
            neighbor_heads=self.neighbor_heads,
            mu=self.mu,
        )

    def local_steps(self, batch_size: int, configured: int = None) -> int:
        """T: configured steps, else ceil(n_i / batch) (one pass over the shard)."""
        if configured is not None:
            return configured
        return math.ceil(self.n_samples / batch_size)

    def batches(self, steps: int, batch_size: int):
        """
        `steps` minibatches drawn from consecutive permutations of the shard.
        """
        if self.n_samples == 0:
            raise ProtocolError(f"Agent {self.agent_id} has an empty training shard")
        if steps == 0:
            return
        passes = math.ceil(steps * batch_size / self.n_samples)
        order = np.concatenate([self.batch_rng.permutation(self.n_samples) for _ in range(passes)])
        for t in range(steps):
            idx = order[t * batch_size:(t + 1) * batch_size]
            yield self.train.features[idx], self.train.labels[idx]


def build_agents(shards: ShardAssignment, graph: Graph, layout: ParamLayout, seed: int,
                 mu: float = 0.9) -> List[AgentState]:
    """
    Every agent starts from the same initial parameters; each draws its
    minibatches and its attention vector from its own spawned streams.
    """
    if shards.n_agents != graph.n:
        raise ProtocolError(f"{shards.n_agents} shards for a graph of {graph.n} agents")
    if shards.train[0].n_features != layout.d_in:
        raise ProtocolError(
            f"Shards have {shards.train[0].n_features} features, layout expects {layout.d_in}"
        )

    beta_range = settings.SIMULATION['BETA_INIT_RANGE']
    initial = init_params(layout, seed)
    streams = np.random.SeedSequence(seed).spawn(graph.n)
    F = layout.head_size

    agents = []
    for i, stream in enumerate(streams):
        batch_seed, beta_seed = stream.spawn(2)
        params = initial.copy()
        neighbors = graph.neighbors(i)
        agents.append(AgentState(
            agent_id=i,
            params=params,
            train=shards.train[i],
            test=shards.test[i],
            neighbors=neighbors,
            w_lu=params.head.copy(),
            beta=np.random.default_rng(beta_seed).uniform(-beta_range, beta_range, 2 * F),
            prev_own_head=params.head.copy(),
            opt=OptState.zeros(layout.total),
            opt_global=OptState.zeros(layout.n_global),
            opt_lu=OptState.zeros(F),
            opt_beta=OptState.zeros(2 * F),
            batch_rng=np.random.default_rng(batch_seed),
            mu=mu,
            active_in=set(neighbors),
            active_out=set(neighbors),
        ))
    logger.info(f"Built {len(agents)} agents with N_v={layout.total}, F={F}")
    return agents


def tau_for(rule: str, degree: int, value: float = None) -> float:
    """Per-agent CE-GATTA threshold from a named rule."""
    if degree < 1:
        raise ProtocolError("A threshold needs at least one neighbor")
    if rule == 'quarter_deg':
        return 1.0 / (4 * degree)
    if rule == 'inv_deg':
        return 1.0 / degree
    if rule == 'scaled_deg':
        if value is None or value < 0:
            raise ProtocolError("scaled_deg needs a nonnegative multiplier")
        return value / degree
    if rule == 'fixed':
        if value is None or value < 0:
            raise ProtocolError("fixed threshold needs a nonnegative value")
        return float(value)
    raise ProtocolError(f"Unknown threshold rule {rule!r}")
