from dataclasses import dataclass

import numpy as np
from django.conf import settings


@dataclass
class OptState:
    """RMSProp second-moment accumulator."""
    v: np.ndarray
    decay: float
    eps: float

    @classmethod
    def zeros(cls, size: int, decay: float = None, eps: float = None) -> 'OptState':
        sim = settings.SIMULATION
        return cls(
            v=np.zeros(size),
            decay=sim['RMSPROP_DECAY'] if decay is None else decay,
            eps=sim['RMSPROP_EPS'] if eps is None else eps,
        )


def rmsprop_step(opt: OptState, params: np.ndarray, grad: np.ndarray, eta: float) -> np.ndarray:
    """
    v <- decay*v + (1 - decay)*g^2; returns p - eta*g / (sqrt(v) + eps).
    `opt.v` is updated in place.
    """
    if params.shape != grad.shape or grad.shape != opt.v.shape:
        raise ValueError(f"Shape mismatch: params {params.shape}, grad {grad.shape}, state {opt.v.shape}")
    opt.v *= opt.decay
    opt.v += (1.0 - opt.decay) * grad * grad
    return params - eta * grad / (np.sqrt(opt.v) + opt.eps)
