"""Exception hierarchy shared by every sinkdiv module.

All library errors derive from :class:`SinkdivError` so callers can catch one
base class. Input-related errors additionally subclass the matching builtin
(``ValueError`` / ``OSError``) to stay idiomatic.
"""

from __future__ import annotations


class SinkdivError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(SinkdivError, ValueError):
    """An argument is malformed: NaN/inf entries, negative weights,
    mismatched shapes, or an out-of-range parameter."""


class DegenerateMeasure(SinkdivError, ValueError):
    """A measure ended up with no support, e.g. every weight was zero."""


class FormatError(SinkdivError, ValueError):
    """A file was readable but its content does not parse as a measure."""


class IoError(SinkdivError, OSError):
    """A file could not be read or written."""


class TooLarge(SinkdivError, ValueError):
    """A dense intermediate would exceed the configured size guard."""


class NumericalFailure(SinkdivError, ArithmeticError):
    """An iteration produced non-finite values and cannot continue."""


class GradientUnreliable(SinkdivError):
    """A gradient was requested from a solver state that did not converge.

    The partially computed gradient (when available) is attached as
    ``partial`` so callers can inspect or salvage it.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
