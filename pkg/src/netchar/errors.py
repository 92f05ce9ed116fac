"""Exception types shared across the toolkit."""


class NetcharError(Exception):
    """Base class for all toolkit errors."""


class ParseError(NetcharError, ValueError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(NetcharError, ValueError):
    """Invalid run configuration or command-line usage."""


class FitError(NetcharError, ValueError):
    """Model fitting was asked to operate on degenerate input."""
