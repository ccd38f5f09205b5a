"""Exception types shared across the package."""


class ThreadTraceError(Exception):
    """Base class for errors raised by threadtrace."""


class MapFormatError(ThreadTraceError, ValueError):
    """A map file violates the on-disk format contract."""


class SceneGenerationError(ThreadTraceError, RuntimeError):
    """Scene generation exhausted its retry budget.

    Carries the self-intersection counts achieved by the failed attempts so
    callers can diagnose an unreachable configuration.
    """

    def __init__(self, message: str, achieved_counts: list[int]):
        super().__init__(message)
        self.achieved_counts = achieved_counts


class NoSegmentsError(ThreadTraceError, RuntimeError):
    """Segment linking dropped every input segment.

    Distinct from linking an empty list, which succeeds with an empty result.
    """
