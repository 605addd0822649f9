"""Exception types raised by the engine."""


class EngineError(Exception):
    """Base class for all xcnn errors."""


class ShapeError(EngineError, ValueError):
    """Array dimensions do not satisfy an operation's contract."""


class TapeError(EngineError, RuntimeError):
    """Illegal use of a differentiation tape."""


class LayerError(EngineError, ValueError):
    """Unknown or unsuitable layer name."""


class DataError(EngineError):
    """Dataset scanning or image loading failure."""


class ImageDecodeError(DataError):
    """An image file could not be decoded."""


class ManifestError(DataError):
    """Split manifest file is malformed."""


class CheckpointError(EngineError):
    """Checkpoint file is corrupt, truncated or of an unsupported version."""


class TrainingError(EngineError):
    """Training cannot start or must abort."""


class ConfigError(EngineError):
    """Invalid run configuration or command usage."""
