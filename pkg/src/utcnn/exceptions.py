"""Exception types raised across the package."""


class UTCNNError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(UTCNNError, ValueError):
    """Operand shapes do not conform."""


class EmptyPoolError(UTCNNError, ValueError):
    """A pooling operation received no inputs."""


class NumericError(UTCNNError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class BackwardStateError(UTCNNError, RuntimeError):
    """Backward was requested on a graph that was already consumed."""


class ModelInputError(UTCNNError, ValueError):
    """A post cannot be fed to the model (e.g. it carries no topic)."""


class DataFormatError(UTCNNError, ValueError):
    """Malformed input file.  ``lineno`` is 1-based when known."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = [str(path)] if path is not None else []
        if lineno is not None:
            where.append(f"line {lineno}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class CheckpointError(UTCNNError, ValueError):
    """A checkpoint file cannot be read."""


class CheckpointVersionError(CheckpointError):
    """A checkpoint was written by an incompatible format version."""
