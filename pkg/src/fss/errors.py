"""Exception types shared across the toolkit."""


class FssError(Exception):
    """Base class for all toolkit errors."""


class MeshFormatError(FssError):
    """Raised when a mesh file cannot be parsed or fails validation."""


class ConfigError(FssError):
    """Raised on invalid configuration input. Carries a dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BinaryFormatError(FssError):
    """Raised on magic/version mismatch or truncation in binary artifacts."""


class NumericError(FssError):
    """Raised when training or evaluation produces non-finite values."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")
