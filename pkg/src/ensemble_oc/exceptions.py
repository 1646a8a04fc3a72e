"""Exception hierarchy shared by all modules."""


class EnsembleOCError(Exception):
    """Base class for errors raised by this package."""


class InputError(EnsembleOCError, ValueError):
    """Malformed or inconsistent input (dimensions, weights, config)."""


class NumericError(EnsembleOCError, ArithmeticError):
    """A computation produced a non-finite value."""


class UnsupportedError(EnsembleOCError, NotImplementedError):
    """The request is well-formed but outside what a routine handles."""


class AssumptionCheckFailed(EnsembleOCError):
    """Raised by gated operations when a sampling checker reports a failure.

    The failing reports are attached as ``reports``.
    """

    def __init__(self, reports):
        self.reports = list(reports)
        ids = ", ".join(r.check_id for r in self.reports)
        super().__init__(f"assumption check(s) failed: {ids}")
