"""Exception types shared across the pipeline.

The CLI maps ``ValidationError`` (bad input, bad config, corrupt files) to
exit code 2 and every other failure to exit code 1.
"""


class StrlError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ValidationError(StrlError):
    """Input rejected before or during processing."""

    exit_code = 2


class ShapeError(ValidationError):
    """Tensor shapes violate an operation's contract."""


class ConfigError(ValidationError):
    """Unknown configuration key or invalid value."""


class FrameLoadError(ValidationError):
    """A frame file, its numbering or its labels could not be read."""


class CheckpointError(ValidationError):
    """Checkpoint magic, version, checksum or contents are wrong."""


class NonFiniteError(StrlError):
    """NaN or Inf appeared in a forward value, a gradient or a loss."""
