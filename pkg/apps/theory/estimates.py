"""
Empirical lower-bound estimates of the smoothness constant L, the gradient
noise bound chi and the non-i.i.d. degree kappa, plus a log-log rate fit.
The assumptions only guarantee these constants exist; sampled maxima can
only under-estimate them.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from apps.nn_core.network import loss_and_grad

from .bounds import TheoryConstants, c_ceiling
from .exceptions import TheoryError

logger = logging.getLogger(__name__)


@dataclass
class GradientTrace:
    noise: List[float] = field(default_factory=list)
    dissimilarity: List[float] = field(default_factory=list)
    secants: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)

    def add_noise(self, minibatch_grad: np.ndarray, full_grad: np.ndarray) -> None:
        self.noise.append(float(np.linalg.norm(minibatch_grad - full_grad)))

    def add_dissimilarity(self, grads_at_mean: Sequence[np.ndarray]) -> None:
        stacked = np.stack(grads_at_mean)
        deviations = np.linalg.norm(stacked - stacked.mean(axis=0), axis=1)
        self.dissimilarity.append(float(deviations.mean()))
        self.grad_norms.append(float(np.sum(stacked.mean(axis=0) ** 2)))

    def add_secant(self, a: np.ndarray, b: np.ndarray, grad_a: np.ndarray, grad_b: np.ndarray) -> None:
        gap = np.linalg.norm(a - b)
        # pairs closer than rounding noise say nothing about curvature
        if gap > 1e-8 * max(1.0, np.linalg.norm(a)):
            self.secants.append(float(np.linalg.norm(grad_a - grad_b) / gap))


def _oracle(agent, grad_fn: Optional[Callable]):
    if grad_fn is not None:
        return lambda x: np.asarray(grad_fn(agent.agent_id, x), dtype=np.float64)

    def full(x):
        return loss_and_grad(x, agent.train.features, agent.train.labels, layout=agent.layout)[1]
    return full


def collect_gradient_trace(agents, trace: GradientTrace = None, batch_size: int = 32,
                           n_batches: int = 4, probe_radius: float = 0.1, seed: int = 0,
                           grad_fn: Callable = None) -> GradientTrace:
    """
    Sample one round's worth of evidence: minibatch-vs-full deviations at
    each agent's parameters, per-agent gradients at the agent-average point,
    and secant ratios between each agent's point, the average and a random
    probe. With `grad_fn` (deterministic oracle) no noise samples are taken.
    """
    trace = trace if trace is not None else GradientTrace()
    rng = np.random.default_rng(seed)
    mean_point = np.mean([agent.params.data for agent in agents], axis=0)

    grads_at_mean = []
    for agent in agents:
        gradient = _oracle(agent, grad_fn)
        own = agent.params.data
        full_own = gradient(own)
        at_mean = gradient(mean_point)
        grads_at_mean.append(at_mean)

        if grad_fn is None:
            for _ in range(n_batches):
                idx = rng.choice(agent.n_samples, size=min(batch_size, agent.n_samples), replace=False)
                _, minibatch = loss_and_grad(
                    own, agent.train.features[idx], agent.train.labels[idx], layout=agent.layout
                )
                trace.add_noise(minibatch, full_own)

        direction = rng.standard_normal(own.shape)
        probe = own + probe_radius * direction / np.linalg.norm(direction)
        trace.add_secant(own, probe, full_own, gradient(probe))
        trace.add_secant(own, mean_point, full_own, at_mean)

    trace.add_dissimilarity(grads_at_mean)
    return trace


def estimate_constants(trace: GradientTrace, T: int, eta: float, K: int, c: float = None) -> TheoryConstants:
    """
    L = max secant ratio, chi = max minibatch deviation, kappa = max mean
    deviation at the averaged point. Without `c`, half of the admissible
    ceiling is used.
    """
    if not trace.secants:
        raise TheoryError("The gradient trace holds no secant pairs")
    L = max(trace.secants)
    if L <= 0:
        raise TheoryError("Every sampled secant was flat; L cannot be estimated")
    chi = max(trace.noise, default=0.0)
    kappa = max(trace.dissimilarity, default=0.0)
    if c is None:
        ceiling = c_ceiling(eta, T, L)
        if ceiling <= 0:
            raise TheoryError(f"No admissible c: 1/2 - 8 eta^2 T^2 L^2 = {ceiling:.6g} with estimated L={L:.6g}")
        c = 0.5 * ceiling
    logger.warning(f"Estimated constants are sampled lower bounds: L={L:.4g}, chi={chi:.4g}, kappa={kappa:.4g}")
    return TheoryConstants(L=L, chi=chi, kappa=kappa, T=T, eta=eta, K=K, c=c)


@dataclass(frozen=True)
class RateReport:
    slope: float
    intercept: float
    points: int


def check_rate(values: Sequence[float], rounds: Sequence[int] = None) -> RateReport:
    """
    Fit log(running minimum) against log(round). O(1/sqrt(K)) shows as a
    slope near -0.5. Advisory only.
    """
    values = np.asarray(values, dtype=np.float64)
    rounds = np.arange(1, values.size + 1) if rounds is None else np.asarray(rounds, dtype=np.float64)
    running = np.minimum.accumulate(values)
    keep = (running > 0) & (rounds > 0)
    if keep.sum() < 2:
        raise TheoryError("A rate fit needs at least two positive points")
    slope, intercept = np.polyfit(np.log(rounds[keep]), np.log(running[keep]), 1)
    return RateReport(slope=float(slope), intercept=float(intercept), points=int(keep.sum()))
