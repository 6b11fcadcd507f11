class ProtocolError(ValueError):
    """A round was invoked on agents in an inconsistent state."""
