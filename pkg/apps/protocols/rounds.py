"""
One-round state transitions of every training protocol.

Each round function runs the agents' local phases, moves the messages the
protocol sends through the bus, applies the post-barrier update and returns
one metric record per agent.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from django.conf import settings

from apps.netsim.bus import SERVER, MessageBus
from apps.netsim.ledger import CONTROL, GLOBAL, HEAD
from apps.nn_core.network import evaluate_accuracy, loss_and_grad
from apps.topology.mixing import MixingMatrix

from .exceptions import ProtocolError
from .local import EpochStats, local_epoch, local_epoch_gatta
from .state import AgentState, TrackerState

logger = logging.getLogger(__name__)

GradientOracle = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TrainingPlan:
    eta: float
    batch_size: int = 32
    local_steps: Optional[int] = None

    def steps_for(self, agent: AgentState) -> int:
        return agent.local_steps(self.batch_size, self.local_steps)


def _metrics(agents: Sequence[AgentState], bus: Optional[MessageBus], round_index: int,
             stats: Sequence[EpochStats]) -> List[dict]:
    records = []
    for agent, stat in zip(agents, stats):
        sent_global, sent_head = bus.ledger.sent_by(round_index, agent.agent_id) if bus else (0, 0)
        records.append({
            'round': round_index,
            'agent': agent.agent_id,
            'train_loss': stat.train_loss,
            'test_acc': evaluate_accuracy(agent.params, agent.test.features, agent.test.labels),
            'comm_global': sent_global,
            'comm_head': sent_head,
        })
    return records


def _check_agents(agents: Sequence[AgentState], mixing: Optional[MixingMatrix] = None) -> None:
    if not agents:
        raise ProtocolError("A round needs at least one agent")
    layout = agents[0].layout
    if any(agent.layout != layout for agent in agents):
        raise ProtocolError("Agents disagree on the parameter layout")
    if mixing is not None and mixing.n != len(agents):
        raise ProtocolError(f"Mixing matrix of size {mixing.n} for {len(agents)} agents")


def _mix(agent_id: int, own: np.ndarray, received: Dict[int, np.ndarray],
         mixing: MixingMatrix) -> np.ndarray:
    """sum_j A(i, j) w_j over the agent itself and its neighbors, in id order."""
    weights = mixing.weights
    mixed = weights[agent_id, agent_id] * own
    for j in sorted(received):
        mixed = mixed + weights[agent_id, j] * received[j]
    return mixed


def _payloads(mailboxes, receiver: int, kind: str) -> Dict[int, np.ndarray]:
    return {m.sender: m.payload for m in mailboxes.get(receiver, []) if m.kind == kind}


def bootstrap_heads(agents: Sequence[AgentState], bus: MessageBus) -> None:
    """
    Initial head exchange, recorded as round 0: every agent caches its
    neighbors' initial heads and its own.
    """
    _check_agents(agents)
    bus.begin_round(0)
    for agent in agents:
        for j in agent.neighbors:
            bus.send(agent.agent_id, j, HEAD, agent.params.head)
    mailboxes = bus.barrier()
    for agent in agents:
        agent.neighbor_heads = _payloads(mailboxes, agent.agent_id, HEAD)
        agent.prev_own_head = agent.params.head.copy()
        missing = set(agent.neighbors) - set(agent.neighbor_heads)
        if missing:
            raise ProtocolError(f"Agent {agent.agent_id} never received heads from {sorted(missing)}")


def _attention_round(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                     plan: TrainingPlan, round_index: int,
                     tau: Optional[Dict[int, float]]) -> List[dict]:
    _check_agents(agents, mixing)
    if any(not agent.neighbor_heads for agent in agents):
        raise ProtocolError("Heads were never exchanged; run bootstrap_heads first")
    bus.begin_round(round_index)
    stats = [local_epoch_gatta(agent, plan.eta, plan.steps_for(agent), plan.batch_size) for agent in agents]

    if tau is not None:
        for agent in agents:
            threshold = tau[agent.agent_id]
            kept = {j for j in agent.active_in if agent.last_alphas[j] >= threshold}
            if not kept:
                # pruning every neighbor would leave nothing to attend over
                continue
            for j in sorted(agent.active_in - kept):
                bus.send(agent.agent_id, j, CONTROL, 'stop')
            agent.active_in = kept
        notices = bus.barrier()
        for agent in agents:
            for message in notices.get(agent.agent_id, []):
                agent.active_out.discard(message.sender)

    for agent in agents:
        for j in agent.neighbors:
            bus.send(agent.agent_id, j, GLOBAL, agent.params.global_part)
        for j in sorted(agent.active_out):
            bus.send(agent.agent_id, j, HEAD, agent.params.head)
    mailboxes = bus.barrier()

    mixed = [
        _mix(agent.agent_id, agent.params.global_part, _payloads(mailboxes, agent.agent_id, GLOBAL), mixing)
        for agent in agents
    ]
    for agent, global_part in zip(agents, mixed):
        agent.params.global_part[:] = global_part
        agent.prev_own_head = agent.params.head.copy()
        agent.neighbor_heads.update(_payloads(mailboxes, agent.agent_id, HEAD))
    return _metrics(agents, bus, round_index, stats)


def round_gatta(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                plan: TrainingPlan, round_index: int) -> List[dict]:
    """Attention over every neighbor; globals and heads go to all neighbors."""
    return _attention_round(agents, mixing, bus, plan, round_index, tau=None)


def round_ce_gatta(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                   plan: TrainingPlan, round_index: int, tau: Dict[int, float]) -> List[dict]:
    """
    GATTA with head pruning: after fusing, neighbors whose coefficient falls
    below the agent's threshold are dropped from its active set and told to
    stop sending their heads. An empty result keeps the previous set.
    """
    if any(t < 0 for t in tau.values()):
        raise ProtocolError("Thresholds must be nonnegative")
    return _attention_round(agents, mixing, bus, plan, round_index, tau=tau)


def round_dsgd(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
               plan: TrainingPlan, round_index: int) -> List[dict]:
    """One local epoch on the full vector, then mixing of the full vector."""
    _check_agents(agents, mixing)
    bus.begin_round(round_index)
    stats = [local_epoch(agent, plan.eta, plan.steps_for(agent), plan.batch_size) for agent in agents]
    for agent in agents:
        for j in agent.neighbors:
            bus.send(agent.agent_id, j, GLOBAL, agent.params.data)
    mailboxes = bus.barrier()
    mixed = [
        _mix(agent.agent_id, agent.params.data, _payloads(mailboxes, agent.agent_id, GLOBAL), mixing)
        for agent in agents
    ]
    for agent, data in zip(agents, mixed):
        agent.params.data[:] = data
    return _metrics(agents, bus, round_index, stats)


def round_repdl(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                plan: TrainingPlan, round_index: int) -> List[dict]:
    """Global part mixed as in D-SGD; heads never leave their agent."""
    _check_agents(agents, mixing)
    bus.begin_round(round_index)
    stats = [local_epoch(agent, plan.eta, plan.steps_for(agent), plan.batch_size) for agent in agents]
    for agent in agents:
        for j in agent.neighbors:
            bus.send(agent.agent_id, j, GLOBAL, agent.params.global_part)
    mailboxes = bus.barrier()
    mixed = [
        _mix(agent.agent_id, agent.params.global_part, _payloads(mailboxes, agent.agent_id, GLOBAL), mixing)
        for agent in agents
    ]
    for agent, global_part in zip(agents, mixed):
        agent.params.global_part[:] = global_part
    return _metrics(agents, bus, round_index, stats)


def round_il(agents: Sequence[AgentState], plan: TrainingPlan, round_index: int,
             bus: MessageBus = None) -> List[dict]:
    """One local epoch per agent and no communication."""
    _check_agents(agents)
    if bus is not None:
        bus.begin_round(round_index)
    stats = [local_epoch(agent, plan.eta, plan.steps_for(agent), plan.batch_size) for agent in agents]
    return _metrics(agents, bus, round_index, stats)


def round_fl(agents: Sequence[AgentState], bus: MessageBus, plan: TrainingPlan,
             round_index: int) -> List[dict]:
    """
    FedAvg through the virtual server: uploads, an n_i-weighted average,
    and a broadcast back to every agent.
    """
    _check_agents(agents)
    if not bus.allow_server:
        raise ProtocolError("FL needs a bus with the server endpoint enabled")
    bus.begin_round(round_index)
    stats = [local_epoch(agent, plan.eta, plan.steps_for(agent), plan.batch_size) for agent in agents]
    for agent in agents:
        bus.send(agent.agent_id, SERVER, GLOBAL, agent.params.data)
    uploads = _payloads(bus.barrier(), SERVER, GLOBAL)

    counts = {agent.agent_id: agent.n_samples for agent in agents}
    total = sum(counts.values())
    average = None
    for i in sorted(uploads):
        term = (counts[i] / total) * uploads[i]
        average = term if average is None else average + term

    for agent in agents:
        bus.send(SERVER, agent.agent_id, GLOBAL, average)
    mailboxes = bus.barrier()
    for agent in agents:
        agent.params.data[:] = _payloads(mailboxes, agent.agent_id, GLOBAL)[SERVER]
    return _metrics(agents, bus, round_index, stats)


def round_dsgd_ft(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                  plan: TrainingPlan, round_index: int, consensus_rounds: int,
                  first_round: int = 1) -> List[dict]:
    """A D-SGD round while inside the consensus phase, a silent local epoch after it."""
    if round_index < first_round + consensus_rounds:
        return round_dsgd(agents, mixing, bus, plan, round_index)
    return round_il(agents, plan, round_index, bus=bus)


def run_dsgd_ft(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                plan: TrainingPlan, rounds: int, ft_epochs: int = None,
                first_round: int = 1) -> List[dict]:
    """D-SGD for `rounds` rounds, then `ft_epochs` epochs of local fine-tuning."""
    if ft_epochs is None:
        ft_epochs = settings.SIMULATION['DSGD_FT_EPOCHS']
    if rounds < 0 or ft_epochs < 0:
        raise ProtocolError("Round and fine-tuning counts must be nonnegative")
    records = []
    for k in range(first_round, first_round + rounds + ft_epochs):
        records.extend(round_dsgd_ft(agents, mixing, bus, plan, k, rounds, first_round))
    return records

def gt_step_size(round_index: int, scale: float = None) -> float:
    """eta_k = scale / (10 + sqrt(k))."""
    if scale is None:
        scale = settings.SIMULATION['GT_STEP_SCALE']
    return scale / (10.0 + math.sqrt(round_index))


def _full_gradient(agent: AgentState, point: np.ndarray, grad_fn: Optional[GradientOracle]):
    if grad_fn is not None:
        return float('nan'), np.asarray(grad_fn(agent.agent_id, point), dtype=np.float64)
    return loss_and_grad(point, agent.train.features, agent.train.labels, layout=agent.layout)


def init_trackers(agents: Sequence[AgentState], grad_fn: GradientOracle = None) -> None:
    """y_i and the remembered gradient both start at the first local gradient."""
    for agent in agents:
        _, grad = _full_gradient(agent, agent.params.data, grad_fn)
        agent.tracker = TrackerState(y=grad.copy(), last_grad=grad)


def round_gt_dsgd(agents: Sequence[AgentState], mixing: MixingMatrix, bus: MessageBus,
                  round_index: int, grad_fn: GradientOracle = None, step_scale: float = None) -> List[dict]:
    """
    Gradient tracking with full-batch local gradients:

        x_i <- sum_j A(i, j) (x_j - eta_k y_j)
        y_i <- sum_j A(i, j) y_j + g_i(x_i new) - g_i(x_i old)
    """
    _check_agents(agents, mixing)
    if any(agent.tracker is None for agent in agents):
        init_trackers(agents, grad_fn)
    eta = gt_step_size(round_index, step_scale)
    bus.begin_round(round_index)

    descended = {agent.agent_id: agent.params.data - eta * agent.tracker.y for agent in agents}
    for agent in agents:
        for j in agent.neighbors:
            bus.send(agent.agent_id, j, GLOBAL, descended[agent.agent_id])
            bus.send(agent.agent_id, j, GLOBAL, agent.tracker.y)
    mailboxes = bus.barrier()

    updates = []
    for agent in agents:
        inbox = [m for m in mailboxes.get(agent.agent_id, []) if m.kind == GLOBAL]
        # each neighbor sends its descended iterate first, then its tracker
        points = {m.sender: m.payload for m in inbox[0::2]}
        trackers = {m.sender: m.payload for m in inbox[1::2]}
        x_new = _mix(agent.agent_id, descended[agent.agent_id], points, mixing)
        y_mixed = _mix(agent.agent_id, agent.tracker.y, trackers, mixing)
        updates.append((x_new, y_mixed))

    stats = []
    for agent, (x_new, y_mixed) in zip(agents, updates):
        loss, grad = _full_gradient(agent, x_new, grad_fn)
        agent.tracker = TrackerState(y=y_mixed + grad - agent.tracker.last_grad, last_grad=grad)
        agent.params.data[:] = x_new
        stats.append(EpochStats(1, loss))
    return _metrics(agents, bus, round_index, stats)
