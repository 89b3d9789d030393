"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: DivergenceError -> 3, every
other ConvdiagError -> 2.
"""


class ConvdiagError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ConvdiagError):
    """Tensor shapes or axes do not satisfy an operation's contract."""


class ConfigError(ConvdiagError):
    """Invalid configuration, layer spec, or model architecture."""


class DataError(ConvdiagError):
    """Bad input data: segmentation, cropping, splitting, labels, files."""


class NumericError(ConvdiagError):
    """Non-finite values where finite ones are required."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class StateError(ConvdiagError):
    """Operation called before the state it depends on exists."""


class CheckpointError(ConvdiagError):
    """Checkpoint file cannot be parsed or is incompatible."""
