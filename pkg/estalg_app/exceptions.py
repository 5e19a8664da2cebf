"""Errors raised by the estimation-algebra library."""


class EstalgError(Exception):
    """Base class for every library error"""


class DimensionMismatchError(EstalgError, ValueError):
    """Operands live on different (or non-square) spaces"""


class NonFiniteOperatorError(EstalgError, ValueError):
    """An operator has NaN or infinite entries"""


class DimensionCapError(EstalgError, ValueError):
    """Hilbert space dimension above the supported maximum"""


class NotSelfAdjointError(EstalgError, ValueError):
    """A Hamiltonian (or another operator required to be Hermitian) is not"""


class SchemeError(EstalgError, ValueError):
    """Measurement scheme inconsistent with the model"""


class IncompleteSchemeError(SchemeError):
    """Operation only defined for complete homodyne detection"""


class ClosureInputError(EstalgError, ValueError):
    """Bad generators, tolerance or cap passed to a Lie closure"""


class NotClosedError(EstalgError):
    """A basis is not closed under the bracket"""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ChartBreakdownError(EstalgError):
    """The Wei-Norman chart became singular"""

    def __init__(self, message, time, condition=None):
        super().__init__(message)
        self.time = time
        self.condition = condition


class FilterDegeneracyError(EstalgError):
    """The unnormalized filter lost its norm"""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericalBlowupError(EstalgError):
    """An integration produced non-finite values"""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegreeGuardError(EstalgError):
    """Symbolic closure produced an operator of runaway degree"""

    def __init__(self, message, degree=None):
        super().__init__(message)
        self.degree = degree


class NonPolynomialModelError(EstalgError, ValueError):
    """A classical model uses a non-polynomial function"""


class InvalidStateError(EstalgError, ValueError):
    """An initial state is not a normalized positive operator (or not pure when required)"""
