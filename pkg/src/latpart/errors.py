"""Exception hierarchy shared by every module of the package."""


class LatPartError(ValueError):
    """Base class for all errors raised by latpart."""


class ShapeError(LatPartError):
    """Lattice shape is malformed or unsupported by the requested operation."""


class BoundsError(LatPartError):
    """A rectangle or coordinate lies outside the lattice."""


class DisjointnessError(LatPartError):
    """Two cell sets that must be disjoint overlap."""


class ParameterError(LatPartError):
    """A tuning parameter is outside its admissible range."""


class InfeasibleError(ParameterError):
    """No partition satisfies the requested constraints."""


class RefusalError(LatPartError):
    """An exhaustive oracle was asked to run on an instance that is too large."""


class ConsistencyError(LatPartError):
    """Inputs contradict each other (e.g. a field not constant on a claimed piece)."""


class ScopeError(LatPartError):
    """The operation is only defined for a restricted class of inputs (e.g. d = 2)."""


class FieldParseError(LatPartError):
    """A serialized field could not be parsed.

    Attributes
    ----------
    line : int
        1-based line number of the offending token (0 for binary input).
    offset : int
        Byte offset (binary) or 1-based token position within the line (text).
    """

    def __init__(self, message: str, line: int = 0, offset: int = 0):
        super().__init__(f"{message} (line {line}, offset {offset})")
        self.line = line
        self.offset = offset
