"""Shared exception types.

Every failure mode raised by this package is one of the classes below, so
callers (and the CLI) can map errors to exit codes without string matching.
"""


class PointkitError(Exception):
    """Base class for all errors raised by pointkit."""


class EmptyInput(PointkitError):
    """An operation received a cloud, matrix or record set with no rows."""


class InvalidCount(PointkitError):
    """A count argument (seeds, neighbors, k, top-k) is out of range."""


class InvalidConfig(PointkitError):
    """A configuration object, container shape or flag combination is inconsistent."""


class DegenerateFeature(PointkitError):
    """A feature vector has zero norm where a direction is required."""


class InvalidCost(PointkitError):
    """A cost matrix is non-square, empty or contains non-finite values."""


class ParseError(PointkitError):
    """Text input does not match the expected grammar."""


class InvalidBox(PointkitError):
    """Corner set does not describe a rectangular parallelepiped."""


class InvalidPose(PointkitError):
    """Pose parameters are degenerate (non-positive extents, bad rotation)."""


class EmptyView(PointkitError):
    """A view selection removed every point."""


class SchemaError(PointkitError):
    """A record violates the QA schema (unknown capability, duplicate id)."""


class ConsistencyError(PointkitError):
    """Aggregated quantities violate an internal consistency law."""


class JudgeUnavailable(PointkitError):
    """The judge backend failed after retries."""
