"""Exception hierarchy.

Every error raised on purpose by the package derives from ``HamshadeError``;
``NumericalError`` marks failures of an integrator or linear-algebra step
(the CLI maps those to exit code 3, everything else to 2).
"""


class HamshadeError(Exception):
    pass


class InputError(HamshadeError, ValueError):
    pass


class NumericalError(HamshadeError, ArithmeticError):
    pass


class DimensionMismatch(InputError):
    pass


class GradientUnavailable(InputError):
    pass


class HessianUnavailable(InputError):
    pass


class InverseUnavailable(InputError):
    pass


class SingularStart(InputError):
    pass


class SingularPoint(InputError):
    pass


class SingularOnOrbit(NumericalError):
    pass


class StepRejected(NumericalError):
    pass


class OrbitEscaped(NumericalError):
    pass


class DegenerateForm(NumericalError):
    pass


class NoReturn(NumericalError):
    pass


class TangentialCrossing(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass


class NudgeOutOfReach(HamshadeError):
    pass


class RankCollapse(NumericalError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class JumpTooLarge(InputError):
    def __init__(self, index, error, delta):
        self.index = index
        self.error = error
        super().__init__(f"jump {index}: error {error:.3e} >= delta {delta:.3e}")


class TimeTooShort(InputError):
    def __init__(self, index, t, T):
        self.index = index
        super().__init__(f"segment {index}: time {t:.6g} < T {T:.6g}")


class OutOfWindow(InputError):
    pass


class InsufficientSteps(InputError):
    pass


class BudgetExhausted(HamshadeError):
    """A search ended without success; this is not a proof of absence."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"not found within budget ({report.budget_spent} evaluations, "
                         f"best {report.achieved_eps:.3e})")
