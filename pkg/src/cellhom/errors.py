"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`CellhomError`.
Input problems derive from :class:`ValidationError` (the CLI maps these to
exit code 2); numerical failures derive from :class:`SolverError` (exit 3).
"""


class CellhomError(Exception):
    pass


class ValidationError(CellhomError, ValueError):
    pass


class SolverError(CellhomError, RuntimeError):
    pass


# grid
class InvalidDimension(ValidationError):
    pass


class InvalidResolution(ValidationError):
    pass


class ZeroDirection(ValidationError):
    pass


# expressions
class ExpressionSyntaxError(ValidationError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(ValidationError):
    pass


class ArityError(ValidationError):
    pass


class NotPeriodic(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# operators / cell problem
class DegenerateLinearization(SolverError):
    pass


class ConeViolation(SolverError):
    pass


class RightSideNotAdmissible(SolverError):
    pass


class NewtonDivergence(SolverError):
    pass


class LinearSolveFailure(SolverError):
    pass


# invariant measure
class SingularAdjoint(SolverError):
    pass


class NonPositiveMeasure(SolverError):
    pass


# effective operator
class ProbeNotApplicable(ValidationError):
    pass


# exterior problems
class NotRadial(ValidationError):
    pass


class TruncationTooSmall(ValidationError):
    pass


class NoDecay(SolverError):
    pass


# Liouville decomposition
class OutOfRange(ValidationError):
    pass


class InconsistentCurvature(SolverError):
    pass
