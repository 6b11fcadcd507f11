class TheoryError(ValueError):
    """A theory quantity was requested outside its stated constraints."""
