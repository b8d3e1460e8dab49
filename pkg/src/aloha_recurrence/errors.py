"""Exception hierarchy.

Errors deriving from :class:`ValidationError` describe bad inputs (exit code 2
on the command line); everything else under :class:`AlohaError` is a runtime
failure (exit code 1).
"""


class AlohaError(Exception):
    pass


class ValidationError(AlohaError, ValueError):
    pass


class InvalidPmf(ValidationError):
    pass


class ZeroProbOfOne(ValidationError):
    """A law with P(X = 1) = 0 was used where irreducibility needs mass at 1."""

    def __init__(self, message, user=None, role=None):
        super().__init__(message)
        self.user = user
        self.role = role


class DimensionMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class SchemaError(ValidationError):
    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class EmptyInput(ValidationError):
    pass


class EmptyGrid(ValidationError):
    pass


class GridTooLarge(ValidationError):
    pass


class InitIsOrigin(ValidationError):
    pass


class NotSinglePacket(ValidationError):
    pass


class ZeroOfferedRate(AlohaError):
    pass


class StateSpaceTooLarge(AlohaError):
    pass


class SingularSystem(AlohaError):
    pass


class TruncationDominated(AlohaError):
    """The truncated chain spends too much time at its cap to be trusted.

    The diagnostics that triggered the refusal are kept as attributes.
    """

    def __init__(self, message, boundary_occupancy=None, sensitivity=None):
        super().__init__(message)
        self.boundary_occupancy = boundary_occupancy
        self.sensitivity = sensitivity
