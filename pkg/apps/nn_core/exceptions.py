class LayoutError(ValueError):
    """Parameter vector, layout or input shapes disagree."""
