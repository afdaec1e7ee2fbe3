"""Exception types raised by sausage_lab."""

from __future__ import annotations


class SausageLabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SausageLabError):
    """A parameter value violates a documented constraint."""


class FieldValidationError(SausageLabError):
    """A velocity field failed a structural check (divergence, mean, shape)."""


class IntegrationDivergedError(SausageLabError):
    """A trajectory produced a non-finite coordinate.

    The failing step index is stored in ``step`` (first step whose output
    was non-finite, counting from 1).
    """

    def __init__(self, step: int, realization: int = 0):
        self.step = int(step)
        self.realization = int(realization)
        super().__init__(
            f"non-finite state at step {step} (realization {realization}); "
            "reduce dt or check the drift field"
        )


class DegenerateInputError(SausageLabError):
    """An input set or path is degenerate for the requested operation."""


class ResourceLimitError(SausageLabError):
    """A requested computation exceeds a hard size cap."""


class InsufficientDataError(SausageLabError):
    """Too few samples or events to produce the requested statistic."""
