"""Partition recovery for piecewise-constant signals on d-dimensional lattices."""

from .dcart import DyadicCostTable, DyadicRectId, FitResult, constrained_dcart_fit, dcart_fit, k_dyad
from .errors import (
    BoundsError,
    ConsistencyError,
    DisjointnessError,
    FieldParseError,
    InfeasibleError,
    LatPartError,
    ParameterError,
    RefusalError,
    ScopeError,
    ShapeError,
)
from .lattice import (
    LatticeField,
    LatticeShape,
    PrefixSumTable,
    Rect,
    RectPartition,
    RegionPartition,
    UndirectedGraph,
    connected_components,
    merge_gain,
    min_distance,
    rects_adjacent,
    region_stats,
    validate_partition,
)

__version__ = "0.1.0"
