"""Exception hierarchy shared by every module.

The CLI maps the three top-level families to exit codes:
``ValidationError`` -> 1, ``UnsupportedModelError`` -> 2, ``NumericalError`` -> 3.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by hjequiv."""


class ValidationError(ToolkitError):
    """Malformed input: bad expression text, bad model file, bad arguments."""


class ExprSyntaxError(ValidationError):
    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownFunctionError(ExprSyntaxError):
    pass


class ModelError(ValidationError):
    pass


class UnsupportedModelError(ToolkitError):
    """The model is well formed but outside the class the toolkit handles."""


class NonAffineMomentaError(UnsupportedModelError):
    pass


class StratifiedHessianError(UnsupportedModelError):
    pass


class SplitError(UnsupportedModelError):
    pass


class NotInvertibleError(UnsupportedModelError):
    pass


class InconsistentDegeneracyError(UnsupportedModelError):
    pass


class NotRegularError(UnsupportedModelError):
    pass


class NothingToPromoteError(UnsupportedModelError):
    pass


class NumericalError(ToolkitError):
    pass


class EvaluationError(NumericalError):
    pass


class UnboundSymbolError(EvaluationError):
    def __init__(self, name):
        super().__init__(f"unbound symbol {name!r}")
        self.name = name


class DivisionByZeroError(EvaluationError):
    pass


class DomainError(EvaluationError):
    pass
