"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """An argument is outside the supported domain."""


class CompositionError(ValueError):
    """A sequence does not have the composition a matcher expects."""


class RankOutOfRange(ValueError):
    """A sequence ranks beyond the range addressed by the matcher input."""


class StreamUnderrun(RuntimeError):
    """The staircase decoder was asked for output before its window filled."""
