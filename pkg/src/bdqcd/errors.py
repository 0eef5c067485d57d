"""Exception hierarchy shared by every module of the package."""


class BDQCDError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BDQCDError, ValueError):
    """A precondition on an argument does not hold (e.g. ``q == j``)."""


class DomainError(BDQCDError, ValueError):
    """An observation lies outside the support of a density."""


class NumericError(BDQCDError, ArithmeticError):
    """A numerical routine failed to converge.

    ``diagnostics`` carries whatever the underlying routine reported.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigurationError(BDQCDError, ValueError):
    """A scenario or experiment configuration violates an invariant.

    ``problems`` lists every violation found, not only the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ProtocolError(BDQCDError):
    """A report payload does not match the fusion rule's link alphabet."""


class EstimationError(BDQCDError):
    """A Monte Carlo estimate cannot be formed (e.g. every trial censored)."""
