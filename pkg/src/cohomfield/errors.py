"""Exception hierarchy shared by all modules."""


class CohomError(Exception):
    """Base class for every error raised by cohomfield."""


class ExprSyntaxError(CohomError, ValueError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte offset {offset}{detail}")


class DomainFault(CohomError, ArithmeticError):
    def __init__(self, message, subtree=None):
        self.subtree = subtree
        where = f" in '{subtree}'" if subtree is not None else ""
        super().__init__(f"{message}{where}")


class NonDifferentiable(DomainFault):
    pass


class DegenerateTransversal(CohomError):
    pass


class OutsideImage(CohomError):
    pass


class NoConvergence(CohomError):
    def __init__(self, message, best_residual=float("nan")):
        self.best_residual = best_residual
        super().__init__(f"{message} (best residual {best_residual:.3g})")


class NoCrossing(CohomError):
    pass


class OnSeparatrix(CohomError, ValueError):
    pass


class QuadratureFailure(CohomError):
    pass


class TooFewSamples(CohomError):
    pass


class Indeterminate(CohomError):
    """Raised only where a numerical fit is too poor to report a value."""


class UnknownScenario(CohomError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ScenarioParseError(CohomError, ValueError):
    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(CohomError, ValueError):
    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class ParameterOutOfRange(CohomError, ValueError):
    pass
