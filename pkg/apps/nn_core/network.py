"""
Forward and reverse passes of the ELU network with softmax cross-entropy.

The last layer is linear; ELU follows every other layer. A `head` argument
replaces the last layer's parameters, so callers can push a composed head
through the network and read the gradient with respect to it.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from django.conf import settings
from sklearn.metrics import accuracy_score

from .exceptions import LayoutError
from .layout import ParamLayout, ParamVector, as_flat

logger = logging.getLogger(__name__)


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


@dataclass
class ForwardCache:
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    weights: List[Tuple[np.ndarray, np.ndarray]]


def _resolve_layout(params, layout: Optional[ParamLayout]) -> ParamLayout:
    if isinstance(params, ParamVector):
        return params.layout
    if layout is None:
        raise LayoutError("A bare parameter array needs an explicit layout")
    return layout


def forward(params, X: np.ndarray, head: np.ndarray = None,
            layout: ParamLayout = None) -> Tuple[np.ndarray, ForwardCache]:
    """Logits for a batch (or a single feature vector) plus the cache for backward."""
    layout = _resolve_layout(params, layout)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != layout.d_in:
        raise LayoutError(f"Input has {X.shape[1]} features, layout expects {layout.d_in}")

    weights = layout.unpack(as_flat(params))
    if head is not None:
        weights[-1] = layout.unpack_head(np.asarray(head, dtype=np.float64))

    inputs, pre_activations = [], []
    a = X
    for index, (W, b) in enumerate(weights):
        inputs.append(a)
        z = a @ W + b
        pre_activations.append(z)
        a = z if index == len(weights) - 1 else elu(z)
    return a, ForwardCache(inputs, pre_activations, weights)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    n = logits.shape[0]
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))
    probs = np.exp(shifted - log_norm[:, None])
    probs[np.arange(n), y] -= 1.0
    return loss, probs / n


def loss_and_grad(params, X: np.ndarray, y: np.ndarray, head: np.ndarray = None,
                  layout: ParamLayout = None) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy over the batch and its gradient over the full flat
    vector. With `head`, the head slots of the gradient hold d loss / d head.
    """
    layout = _resolve_layout(params, layout)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise LayoutError("Cannot compute a loss on an empty batch")
    logits, cache = forward(params, X, head=head, layout=layout)
    if logits.shape[0] != y.size:
        raise LayoutError(f"{logits.shape[0]} samples but {y.size} labels")
    loss, delta = cross_entropy(logits, y)

    grad = np.zeros(layout.total)
    for index in range(len(layout.layers) - 1, -1, -1):
        layer = layout.layers[index]
        W, _ = cache.weights[index]
        a_in = cache.inputs[index]
        grad[layer.weights] = (a_in.T @ delta).ravel()
        grad[layer.biases] = delta.sum(axis=0)
        if index:
            delta = (delta @ W.T) * elu_grad(cache.pre_activations[index - 1])
    return loss, grad


def predict(params, X: np.ndarray, head: np.ndarray = None, layout: ParamLayout = None) -> np.ndarray:
    logits, _ = forward(params, X, head=head, layout=layout)
    return logits.argmax(axis=1)


def evaluate_accuracy(params, X: np.ndarray, y: np.ndarray, head: np.ndarray = None,
                      layout: ParamLayout = None) -> float:
    return float(accuracy_score(y, predict(params, X, head=head, layout=layout)))


def finite_diff_check(params, X: np.ndarray, y: np.ndarray, h: float = None,
                      seed: int = 0) -> float:
    """
    Worst relative error between the reverse-mode gradient and central
    differences over a random subset of global coordinates plus every head
    coordinate. Error is |a - n| / max(1, |a|, |n|).
    """
    sim = settings.SIMULATION
    h = sim['FINITE_DIFF_STEP'] if h is None else h
    if h <= 0:
        raise LayoutError(f"Finite-difference step must be positive, got {h}")
    layout = params.layout
    flat = params.data.copy()
    _, analytic = loss_and_grad(params, X, y)

    rng = np.random.default_rng(seed)
    n_sampled = min(sim['FINITE_DIFF_COORDS'], layout.n_global)
    coords = np.concatenate([
        rng.choice(layout.n_global, size=n_sampled, replace=False),
        np.arange(layout.n_global, layout.total),
    ])

    worst = 0.0
    for k in coords:
        shifted = flat.copy()
        shifted[k] = flat[k] + h
        plus, _ = loss_and_grad(shifted, X, y, layout=layout)
        shifted[k] = flat[k] - h
        minus, _ = loss_and_grad(shifted, X, y, layout=layout)
        numeric = (plus - minus) / (2 * h)
        error = abs(analytic[k] - numeric) / max(1.0, abs(analytic[k]), abs(numeric))
        worst = max(worst, error)
    logger.debug(f"Finite-difference check over {coords.size} coordinates: worst error {worst:.3e}")
    return worst
