"""Exception types shared across the package.

The CLI maps these onto stable exit codes, so new failure modes should
reuse one of the classes below rather than invent a sibling.
"""


class OpcqaError(Exception):
    """Base class for all package errors."""


class SchemaError(OpcqaError):
    """A fact, FD, or query refers to an unknown relation or attribute,
    or has the wrong arity."""


class ConstraintClassError(OpcqaError):
    """An operation requires a narrower constraint class (e.g. primary
    keys) than the given FD set provides."""


class SizeCapError(OpcqaError):
    """An enumeration or sample budget was exceeded. Nothing partial is
    returned; callers may retry with a larger cap or switch mode."""


class UnsupportedCombinationError(OpcqaError):
    """No sampler or estimator exists for the requested generator and
    constraint-class combination."""


class ParseError(OpcqaError):
    """An instance or query file failed validation; the message carries
    the offending position."""
