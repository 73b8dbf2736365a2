"""Exception types shared across the package."""


class NpyFormatError(ValueError):
    """Malformed matrix container; the message names the offending header field."""


class FeatureShapeError(ValueError):
    """Matrix has the wrong element type or dimensionality."""


class FeatureValidationError(ValueError):
    """Feature data violates an invariant (non-finite rows, empty set, bad ids)."""


class UndefinedCorrelationError(ValueError):
    """Rank correlation is undefined because one input has zero rank variance."""


class StudyError(ValueError):
    """An analysis study cannot be carried out on the given inputs."""


class EmptyReportError(ValueError):
    """A report aggregation was requested on a report with no scored samples."""
