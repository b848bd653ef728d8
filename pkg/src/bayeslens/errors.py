"""Exception hierarchy shared by every layer of the package."""


class BayesLensError(Exception):
    """Base class for all errors raised by bayeslens."""


class DimensionMismatch(BayesLensError, ValueError):
    pass


class InvalidKernel(BayesLensError, ValueError):
    """A kernel violates its backend's invariants (stochasticity, PSD noise...)."""

    def __init__(self, message, *, code="invalid_kernel", row=None, residual=None):
        super().__init__(message)
        self.code = code
        self.row = row
        self.residual = residual


class UnboundName(BayesLensError, KeyError):
    def __init__(self, name, path=()):
        super().__init__(name)
        self.name = name
        self.path = tuple(path)

    def __str__(self):
        where = "/".join(self.path) or "<root>"
        return f"unbound name {self.name!r} at {where}"


class TypeMismatch(BayesLensError, TypeError):
    def __init__(self, message, path=()):
        super().__init__(message)
        self.message = message
        self.path = tuple(path)

    def __str__(self):
        where = "/".join(self.path) or "<root>"
        return f"{self.message} at {where}"


class UnsupportedInverse(BayesLensError):
    pass


class DegeneratePrior(BayesLensError, ValueError):
    pass


class EmptySupport(BayesLensError, ValueError):
    pass


class ZeroMassObservation(BayesLensError, ValueError):
    """Bayes' law was asked to condition on an event of probability zero."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)
