"""
errors.py

Exception hierarchy shared by every module. All errors are ValueErrors so callers
that only care about "bad input" can keep catching ValueError.
"""


class VariataError(ValueError):
    """Root of all library errors."""


class ValidationError(VariataError):
    """A lead sheet, plan or parameter set violates its invariants."""


class CorpusParseError(VariataError):
    """A corpus or plan file could not be parsed."""

    def __init__(self, path: str, field: str, offset, reason: str):
        self.path = path
        self.field = field
        self.offset = offset
        super().__init__(f"{path}: field '{field}' at offset {offset}: {reason}")


class TickRangeError(VariataError):
    """A tick interval, pitch or temporal position is out of range."""


class CorpusSpecError(VariataError):
    """The requested synthetic corpus cannot be generated."""


class PlanError(VariataError):
    """A structure plan is malformed or cyclic."""


class InfeasibleModelError(VariataError):
    """No sequence satisfies the duration, pins and model support (Z = 0)."""

    def __init__(self, message: str, frontier: int | None = None):
        self.frontier = frontier
        super().__init__(message)


class StructuralInfeasibilityError(InfeasibleModelError):
    """A structure plan step became infeasible after pinning."""

    def __init__(self, step: str, cause: InfeasibleModelError):
        self.step = step
        super().__init__(f"step '{step}' is infeasible: {cause}", cause.frontier)
