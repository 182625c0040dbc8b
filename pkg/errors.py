"""
Exception hierarchy for the wildfire spread pipeline.
Core modules raise these; pipeline_manager turns them into result dictionaries.
"""
from typing import Optional


class WildfireError(Exception):
    """Base class for every error raised by a pipeline stage."""


class ConfigError(WildfireError, ValueError):
    """Invalid or inconsistent run configuration."""


class DetectionParseError(WildfireError, ValueError):
    """
    A detection row could not be parsed.

    Args:
        message: What was wrong with the row
        line_number: 1-based line in the source file (header is line 1)
    """

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class GraphError(WildfireError, ValueError):
    """Neighbour search or component extraction received unusable input."""


class SequenceError(WildfireError, ValueError):
    """Sample construction received an invalid length or geometry."""


class ShapeError(WildfireError, ValueError):
    """Tensor shapes do not agree."""


class TrainingError(WildfireError, ValueError):
    """Training was asked to run on an unusable dataset."""


class ExperimentError(WildfireError, ValueError):
    """Split, cross-validation or metric input is unusable."""


class SynthError(WildfireError, ValueError):
    """Synthetic generator spec cannot satisfy the graph radii."""
