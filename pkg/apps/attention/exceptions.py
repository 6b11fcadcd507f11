class AttentionError(ValueError):
    """Attention state, active set or cache is inconsistent."""
