"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A model, record, or config references a key that is not available."""


class UnsupportedOperation(ValueError):
    """The requested operation is not defined for this schedule kind."""
