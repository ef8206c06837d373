"""Exception types shared across the toolkit."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation requires."""


class DegenerateVectorError(ValueError):
    """A vector norm fell below the degeneracy guard (1e-12).

    Carries the cluster index when the offending vector is a center.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(ValueError):
    """Invalid configuration value or unknown configuration key."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class GradCheckResampleError(RuntimeError):
    """Could not find a batch whose loss is safely away from hinge kinks."""
