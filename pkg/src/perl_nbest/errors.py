"""Exception types shared across the package."""


class ShapeError(ValueError):
    pass


class LengthError(ValueError):
    """A sequence exceeds the configured maximum length."""


class StateError(RuntimeError):
    """An operation was called in the wrong lifecycle state."""


class ContractError(RuntimeError):
    """A pipeline precondition was violated (e.g. an unfrozen encoder)."""


class LexiconParseError(ValueError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConfigError(ValueError):
    """Invalid configuration value; the message names the offending field."""
