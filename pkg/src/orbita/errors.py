"""Exception hierarchy. CLI exit codes are attached to the classes that map to one."""


class OrbitaError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ContractViolation(OrbitaError, ValueError):
    """An operation was called outside its preconditions (shapes, sizes)."""


class SchemaError(OrbitaError, ValueError):
    """A scenario or serialized object failed validation."""


class NotAnAutomorphismGerm(OrbitaError):
    """The linear part of a jet is singular, so it has no formal inverse."""


class NotAbelian(OrbitaError):
    exit_code = 2

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class IllConditionedSpectrum(OrbitaError):
    exit_code = 3

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class NotInOrbitSpan(OrbitaError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoCommonFixedPoint(OrbitaError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


class BudgetExceeded(OrbitaError):
    pass


class NotDominantAtPoint(OrbitaError):
    exit_code = 4

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IllDefinedLinearization(OrbitaError):
    exit_code = 4

    def __init__(self, message, worst_word=None, residual=None):
        super().__init__(message)
        self.worst_word = worst_word
        self.residual = residual


class InconclusiveExperiment(OrbitaError):
    exit_code = 5


class EmptyRegion(OrbitaError):
    pass
