"""Exception hierarchy.

``ModelError`` subclasses signal a bad model or bad input (CLI exit code 1);
``SolverError`` subclasses signal a numerical failure (CLI exit code 2).
"""


class FairshareError(Exception):
    pass


class ModelError(FairshareError):
    pass


class SolverError(FairshareError):
    pass


class NotStochastic(ModelError):
    pass


class Reducible(ModelError):
    def __init__(self, message, classes=None):
        super().__init__(message)
        self.classes = classes or []


class InvalidSupport(ModelError):
    pass


class EmptyUserList(ModelError):
    pass


class SelfLoopViolated(ModelError):
    pass


class WrongShape(ModelError):
    pass


class Degenerate(ModelError):
    pass


class BatteryOutOfRange(ModelError):
    pass


class InstanceTooLarge(ModelError):
    pass


class ActionNotAllowed(ModelError):
    pass


class ModeMismatch(ModelError):
    pass


class NotAllGenerating(ModelError):
    pass


class TooFewPoints(ModelError):
    pass


class ConfigError(ModelError):
    pass


class EfficientLLRZero(ModelError):
    """LLR_e is zero, so the price of fairness is not a finite number."""

    def __init__(self, llr_o, llr_e):
        self.llr_o = llr_o
        self.llr_e = llr_e
        self.symbol = "indeterminate" if llr_o <= 0 else "inf"
        super().__init__(f"PoF = {'0/0' if self.symbol == 'indeterminate' else 'inf'} "
                         f"(llr_o={llr_o!r}, llr_e={llr_e!r})")


class NumericalFailure(SolverError):
    pass


class InternalError(SolverError):
    pass
