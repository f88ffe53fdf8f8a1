"""Exception types shared across the package."""


class ProdmatchError(Exception):
    """Base class for all library errors."""


class EmptyFeasibleSet(ProdmatchError):
    """A constraint admits no 0-1 assignment (inconsistent instance)."""


class SplitAtTerminalLayer(ProdmatchError):
    """Requested split index is outside the valid interior of the diagram."""


class EmptyHistory(ProdmatchError):
    """No stored curvature pairs; the quasi-Newton step must be skipped."""


class InfeasibleAfterFixing(ProdmatchError):
    """Conditioning on a partial assignment emptied a constraint."""


class PrunedInfeasible(ProdmatchError):
    """Coarse-to-fine pruning removed all support of a projection row."""


class MeshError(ProdmatchError):
    """Base class for mesh validation failures."""


class NotManifold(MeshError):
    pass


class NotClosed(MeshError):
    pass


class GenusMismatch(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


class FeatureDimensionMismatch(ProdmatchError):
    pass


class InfeasibleInput(ProdmatchError):
    """An assignment handed to a decoder violates the instance constraints."""


class FileFormatError(ProdmatchError):
    """Malformed input file; carries a line number when one is known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
