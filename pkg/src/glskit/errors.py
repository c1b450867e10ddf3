"""Exception hierarchy.

Every error raised by the library derives from :class:`GLSError`, and the
CLI maps the class name to a one-line category message.
"""

from __future__ import annotations


class GLSError(Exception):
    """Base class for all library errors."""


class NegativeMass(GLSError, ValueError):
    pass


class ZeroTotalMass(GLSError, ValueError):
    pass


class AlphabetMismatch(GLSError, ValueError):
    pass


class EmptySupport(GLSError, ValueError):
    pass


class DegenerateMass(GLSError, ValueError):
    pass


class InvalidActiveCount(GLSError, ValueError):
    pass


class InconsistentModel(GLSError, ValueError):
    pass


class MissingContextRow(GLSError, KeyError):
    pass


class TooLarge(GLSError, ValueError):
    pass


class ShapeMismatch(GLSError, ValueError):
    pass


class EmptyInput(GLSError, ValueError):
    pass


class TooFewValues(GLSError, ValueError):
    pass


class NoCandidate(GLSError, RuntimeError):
    """No index survives the label filter at a decoder."""


class AllZeroWeights(GLSError, ValueError):
    pass


class InvalidConfig(GLSError, ValueError):
    pass


class IoFailure(GLSError, OSError):
    pass
