"""Exception types shared across the package."""


class SolverError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SolverError):
    """An argument violates a documented precondition."""


class InvalidEvaluationError(SolverError):
    """A function or map evaluation produced non-finite values."""


class IndefiniteOperatorError(SolverError):
    """CG met a direction of non-positive curvature on a supposedly SPD operator."""


class UnsupportedOperationError(SolverError):
    """The atom does not provide the requested oracle."""


class ContractViolationError(SolverError):
    """A runtime invariant that should hold by construction failed."""


class GammaCapError(SolverError):
    """The inner loop escalated the proximal weight past gamma_max."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SubsolverFailureError(SolverError):
    """The dual subproblem solver hit its iteration cap without a certificate."""

    def __init__(self, message, best_gap=None, context=None):
        super().__init__(message)
        self.best_gap = best_gap
        self.context = context or {}


class LineSearchStallError(SolverError):
    """The Wolfe line search exceeded its backtracking budget."""


class UndefinedMetricError(SolverError):
    """A metric was requested on data that cannot define it (e.g. empty holdout)."""


class TripletParseError(SolverError):
    """A rating-triplet file contains a malformed record."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number
