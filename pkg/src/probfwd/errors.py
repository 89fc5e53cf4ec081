"""Shared exception types."""


class NoSolutionError(ValueError):
    """Raised when a threshold search has no solution in the admissible range."""


class GraphGenerationError(RuntimeError):
    """Raised when randomized graph generation exhausts its retry budget."""
