class ConfigError(ValueError):
    """An experiment configuration failed validation; `errors` holds field-level messages."""

    def __init__(self, errors):
        self.errors = errors
        super().__init__(f"Invalid experiment configuration: {errors}")

    def lines(self, errors=None, prefix=''):
        """Flatten nested serializer errors into `section.field: message` lines."""
        errors = self.errors if errors is None else errors
        if isinstance(errors, dict):
            out = []
            for key, value in errors.items():
                out.extend(self.lines(value, f"{prefix}{key}."))
            return out
        if isinstance(errors, (list, tuple)):
            out = []
            for item in errors:
                out.extend(self.lines(item, prefix))
            return out
        return [f"{prefix.rstrip('.') or 'config'}: {errors}"]
