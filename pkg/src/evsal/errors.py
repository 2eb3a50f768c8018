"""Exception hierarchy shared by all modules."""


class EvsalError(Exception):
    """Base class for every error raised by this package."""


class FormatError(EvsalError):
    """Input bytes or text do not follow the expected file layout."""


class ValidationError(EvsalError):
    """A value breaks a data invariant (bounds, ordering, ranges)."""

    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index


class DegenerateMetricError(EvsalError):
    """A metric is undefined for the given input (zero variance, empty set)."""


class GeometryError(EvsalError):
    """Frame geometry and fixation coordinates do not agree."""
