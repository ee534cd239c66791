"""Exception types shared across the toolkit."""


class SlshError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SlshError):
    """An input file is malformed; the message names the offending line."""


class ValidationError(SlshError):
    """An argument or input violates a documented precondition."""


class ShapeError(ValidationError):
    """Array dimensions or code lengths do not line up."""


class InsufficientDataError(SlshError):
    """Too few rows to fit the requested statistic."""


class DegenerateDataError(SlshError):
    """The labeled data cannot support the requested computation."""


class CapabilityError(SlshError):
    """The request exceeds a structural limit of the chosen scheme."""
