"""Exception types raised across the package."""

from __future__ import annotations


class OperatorSystemError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(OperatorSystemError):
    pass


class NoConvergence(OperatorSystemError):
    pass


class DimensionMismatch(OperatorSystemError):
    pass


class MissingUnit(OperatorSystemError):
    pass


class DependentBasis(OperatorSystemError):
    pass


class NotAdjointClosed(OperatorSystemError):
    pass


class NotInSystem(OperatorSystemError):
    pass


class EmptyLadder(OperatorSystemError):
    pass


class DomainNotFullAlgebra(OperatorSystemError):
    pass


class NotInjective(OperatorSystemError):
    pass


class NotUnital(OperatorSystemError):
    pass


class NotPositiveFactor(OperatorSystemError):
    pass


class NotInSpan(OperatorSystemError):
    pass


class NecessaryConditionFailed(OperatorSystemError):
    pass


class DepthExceeded(OperatorSystemError):
    pass


class LevelMismatch(OperatorSystemError):
    pass


class IncompatibleFamily(OperatorSystemError):
    """A cone of maps fails to commute with the connecting maps.

    ``stage`` is the first stage ``k`` where the triangle breaks and
    ``basis_index`` the offending basis element of that stage.
    """

    def __init__(self, message: str, stage: int, basis_index: int):
        super().__init__(message)
        self.stage = stage
        self.basis_index = basis_index


class IncompatibleSquare(IncompatibleFamily):
    pass


class NotInclusionSequence(OperatorSystemError):
    pass


class SizeCapExceeded(OperatorSystemError):
    pass


class InputError(OperatorSystemError):
    """Malformed JSON input; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
