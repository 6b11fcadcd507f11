"""
Flat parameter layout of a fully-connected network, split into the shared
global part (every layer but the last) and the node-specific head (last
layer weights and biases).
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import LayoutError


@dataclass(frozen=True)
class LayerSlice:
    fan_in: int
    fan_out: int
    weights: slice
    biases: slice


@dataclass(frozen=True)
class ParamLayout:
    layer_sizes: Tuple[int, ...]
    layers: List[LayerSlice] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise LayoutError(f"A layout needs an input and an output size, got {list(sizes)}")
        if min(sizes) < 1:
            raise LayoutError(f"Layer sizes must be positive, got {list(sizes)}")
        object.__setattr__(self, 'layer_sizes', sizes)

        layers, offset = [], 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            b = slice(w.stop, w.stop + fan_out)
            layers.append(LayerSlice(fan_in, fan_out, w, b))
            offset = b.stop
        object.__setattr__(self, 'layers', layers)

    @classmethod
    def of(cls, sizes: Sequence[int]) -> 'ParamLayout':
        return cls(tuple(sizes))

    @property
    def total(self) -> int:
        return self.layers[-1].biases.stop

    @property
    def head_size(self) -> int:
        # F = (h_m + 1) * C
        return (self.layer_sizes[-2] + 1) * self.layer_sizes[-1]

    @property
    def n_global(self) -> int:
        return self.total - self.head_size

    @property
    def global_slice(self) -> slice:
        return slice(0, self.n_global)

    @property
    def head_slice(self) -> slice:
        return slice(self.n_global, self.total)

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def unpack(self, flat: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(W, b) views per layer; W has shape (fan_in, fan_out)."""
        if flat.shape != (self.total,):
            raise LayoutError(f"Expected a flat vector of length {self.total}, got shape {flat.shape}")
        return [
            (flat[layer.weights].reshape(layer.fan_in, layer.fan_out), flat[layer.biases])
            for layer in self.layers
        ]

    def unpack_head(self, head: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if head.shape != (self.head_size,):
            raise LayoutError(f"Expected a head of length {self.head_size}, got shape {head.shape}")
        last = self.layers[-1]
        n_w = last.fan_in * last.fan_out
        return head[:n_w].reshape(last.fan_in, last.fan_out), head[n_w:]


@dataclass
class ParamVector:
    """
    Flat float64 storage with aliasing views: writing `global_part` or `head`
    writes `data`.
    """
    layout: ParamLayout
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (self.layout.total,):
            raise LayoutError(f"Expected {self.layout.total} parameters, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise LayoutError("Parameter vector has non-finite entries")

    @property
    def global_part(self) -> np.ndarray:
        return self.data[self.layout.global_slice]

    @property
    def head(self) -> np.ndarray:
        return self.data[self.layout.head_slice]

    def copy(self) -> 'ParamVector':
        return ParamVector(self.layout, self.data.copy())


def as_flat(params) -> np.ndarray:
    return params.data if isinstance(params, ParamVector) else np.asarray(params, dtype=np.float64)


def init_params(layout: ParamLayout, seed) -> ParamVector:
    """Glorot-uniform weights, s = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    data = np.zeros(layout.total)
    for layer in layout.layers:
        bound = np.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        data[layer.weights] = rng.uniform(-bound, bound, size=layer.fan_in * layer.fan_out)
    return ParamVector(layout, data)
