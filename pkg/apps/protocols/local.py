"""
Local training phases run by each agent between communication barriers.
"""
from dataclasses import dataclass

import numpy as np

from apps.attention.aggregation import attention_backward, attention_coeffs, fuse_head
from apps.nn_core.network import loss_and_grad
from apps.nn_core.optim import rmsprop_step

from .exceptions import ProtocolError
from .state import AgentState


@dataclass(frozen=True)
class EpochStats:
    steps: int
    train_loss: float


def _mean(losses) -> float:
    return float(np.mean(losses)) if losses else float('nan')


def local_epoch(agent: AgentState, eta: float, steps: int, batch_size: int) -> EpochStats:
    """Plain RMSProp on the full parameter vector."""
    losses = []
    for X, y in agent.batches(steps, batch_size):
        loss, grad = loss_and_grad(agent.params, X, y)
        agent.params.data[:] = rmsprop_step(agent.opt, agent.params.data, grad, eta)
        losses.append(loss)
    return EpochStats(steps, _mean(losses))


def local_epoch_gatta(agent: AgentState, eta: float, steps: int, batch_size: int) -> EpochStats:
    """
    Each step composes the head through the attention forward pass,
    backpropagates into w_g, w_lu and beta and applies RMSProp to the three
    groups. The concatenation inputs stay at the previous round's heads.
    Afterwards the node-specific head is finalized from the updated w_lu and
    beta.
    """
    if not agent.active_in:
        raise ProtocolError(f"Agent {agent.agent_id} has no active neighbors to attend over")
    layout = agent.layout
    losses = []
    for X, y in agent.batches(steps, batch_size):
        state = agent.attention_state()
        alphas, cache = attention_coeffs(state, agent.active_in)
        head = fuse_head(state, alphas, cache)
        loss, grad = loss_and_grad(agent.params, X, y, head=head)
        grad_wlu, grad_beta = attention_backward(grad[layout.head_slice], state, cache)

        agent.params.global_part[:] = rmsprop_step(
            agent.opt_global, agent.params.global_part, grad[layout.global_slice], eta
        )
        agent.w_lu = rmsprop_step(agent.opt_lu, agent.w_lu, grad_wlu, eta)
        agent.beta = rmsprop_step(agent.opt_beta, agent.beta, grad_beta, eta)
        losses.append(loss)

    state = agent.attention_state()
    alphas, cache = attention_coeffs(state, agent.active_in)
    agent.params.head[:] = fuse_head(state, alphas, cache)
    agent.last_alphas = cache.alpha_map()
    return EpochStats(steps, _mean(losses))

