"""
Errors raised while building communication graphs and mixing matrices.
"""


class TopologyError(ValueError):
    """Invalid graph parameters or structure."""


class DisconnectedGraphError(TopologyError):
    """The graph is not connected, or could not be made connected."""


class MixingMatrixError(TopologyError):
    """A weight matrix violates the doubly stochastic / spectral-gap requirements."""
