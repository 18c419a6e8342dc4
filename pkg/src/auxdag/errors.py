"""Error taxonomy shared across the package."""


class AuxDagError(Exception):
    """Base class for all package errors."""


class InvalidData(AuxDagError):
    """Input data contains non-finite entries or is otherwise unusable."""


class TooFewSamples(AuxDagError):
    """Fewer observations than the operation requires."""


class EmptySubset(AuxDagError):
    """An index subset or candidate list that must be nonempty is empty."""


class ShapeError(AuxDagError):
    """Dimension mismatch or malformed matrix input."""


class DegenerateVariable(AuxDagError):
    """A variable is effectively constant, so the test statistic is undefined."""


class DegeneratePrecision(AuxDagError):
    """A precision diagonal entry is at or below the jitter floor."""


class NoAuxiliaryDomains(AuxDagError):
    """An operation requiring auxiliary domains received none."""


class NotADag(AuxDagError):
    """The supplied edge set contains a directed cycle."""


class InvalidScenario(AuxDagError):
    """A scenario specification is infeasible or out of range."""


class GeneratorInvariantViolation(AuxDagError):
    """A generated auxiliary DAG failed the check its role label promises."""


class DataFormatError(AuxDagError):
    """A file could not be parsed; message carries row/column context."""


class IoError(AuxDagError):
    """An output path could not be written."""


class SolverDiverged(AuxDagError):
    """Proximal gradient failed to converge within the iteration budget.

    Carries the last iterate and the final relative objective gap so callers
    can inspect how far the solve got.
    """

    def __init__(self, message, last_iterate=None, gap=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gap = gap
