"""Exception taxonomy shared across the package."""


class MsqError(Exception):
    """Base class for all package errors."""


class DomainError(MsqError):
    """An argument is outside the mathematical domain of the operation."""


class ShapeError(MsqError):
    """A grid or state has the wrong dimensions."""


class DegeneracyError(MsqError):
    """A pattern or construction collapses onto duplicate values."""

    def __init__(self, message, collisions=None):
        super().__init__(message)
        self.collisions = list(collisions or [])


class ValidationError(MsqError):
    """An input fails a structural precondition (not magic, wrong order, ...)."""


class UnsupportedOrderError(MsqError):
    """The requested square order is outside the supported family."""


class RangeError(MsqError):
    """An index falls outside the oracle domain [1, B]."""


class FormatError(MsqError):
    """Malformed serialized payload."""


class ParameterError(MsqError):
    """Inconsistent or out-of-range configuration parameter."""


class ResourceError(MsqError):
    """A computation exceeded its configured resource budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class AmbiguityError(MsqError):
    """A peak trace could not resolve a unique center."""

    def __init__(self, message, evaluations=None):
        super().__init__(message)
        self.evaluations = dict(evaluations or {})


class RecoveryFailure(MsqError):
    """Spacing recovery exhausted its shift budget without a verified peak."""


class ChannelError(MsqError):
    """Malformed frame or broken transport on the protocol channel."""


class InstructionError(MsqError):
    """A protocol instruction references an invalid cell or transform."""


class ProtocolFailure(MsqError):
    """The two-party protocol exhausted its round budget."""

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript
