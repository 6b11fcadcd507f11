class DeliveryError(ValueError):
    """A message was addressed across a pair of agents that are not linked."""
