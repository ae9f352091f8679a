"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment or schedule parameters."""


class NonInformativeAverageError(ValueError):
    """The initial average lies outside the quantizer range."""


class InvariantViolation(AssertionError):
    """A runtime self-check of the protocol state failed."""


class ScaleOverflowError(OverflowError):
    """Scaled integer weights would no longer fit in a machine word."""
