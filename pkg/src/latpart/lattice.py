"""Lattice geometry, rectangle algebra and prefix-sum statistics.

Coordinates exposed by the public API are 1-based and inclusive, matching
the usual ``[1, n]^d`` convention for the lattice.  Arrays are stored
0-based in row-major (C) order, dimension 0 varying slowest.

A *cell set* argument may be given as

* a :class:`Rect`,
* a 2-D integer array of shape ``(m, d)`` holding 1-based coordinates, or
* a 1-D integer array of 0-based row-major flat indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial import cKDTree

from .errors import BoundsError, DisjointnessError, ParameterError, ShapeError

# Values above this magnitude make the one-pass SSE formula lose too many digits.
MAX_ABS_VALUE = 1e8
# float64 value table + two prefix tables must stay addressable.
MAX_CELLS = np.iinfo(np.intp).max // 64


@dataclass(frozen=True)
class LatticeShape:
    """The lattice ``{1..n}^d``."""

    d: int
    n: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ShapeError(f"dimension must be a positive integer, got {self.d!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ShapeError(f"side length must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "n", int(self.n))
        # Python ints do not overflow, so this comparison is exact.
        if self.n**self.d > MAX_CELLS:
            raise ShapeError(
                f"lattice with n={self.n}, d={self.d} has {self.n ** self.d} cells, "
                f"more than the addressable budget of {MAX_CELLS}"
            )

    @property
    def N(self) -> int:
        return self.n**self.d

    @property
    def dims(self) -> tuple:
        return (self.n,) * self.d

    @property
    def is_dyadic(self) -> bool:
        return self.n & (self.n - 1) == 0

    def require_dyadic(self):
        if not self.is_dyadic:
            raise ShapeError(f"side length n={self.n} is not a power of 2")

    def full_rect(self) -> "Rect":
        return Rect((1,) * self.d, (self.n,) * self.d)

    def flat_index(self, coords) -> np.ndarray:
        """Row-major flat indices of 1-based coordinates (shape ``(m, d)``)."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.d)
        if coords.size and (coords.min() < 1 or coords.max() > self.n):
            raise BoundsError(f"coordinates outside [1, {self.n}]^{self.d}")
        return np.ravel_multi_index(tuple((coords - 1).T), self.dims)

    def coords(self, flat) -> np.ndarray:
        """1-based coordinates (shape ``(m, d)``) of flat indices."""
        flat = np.asarray(flat, dtype=np.int64).ravel()
        return np.stack(np.unravel_index(flat, self.dims), axis=1) + 1


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box ``prod_i [lo[i], hi[i]]`` with 1-based inclusive bounds."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ShapeError("lo and hi must be non-empty and of equal length")
        if any(a > b for a, b in zip(lo, hi)):
            raise BoundsError(f"empty rectangle lo={lo} hi={hi}")
        if min(lo) < 1:
            raise BoundsError(f"rectangle lower corner {lo} below 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> int:
        return int(np.prod(self.sides, dtype=object))

    def slices(self) -> tuple:
        """0-based slices selecting this rectangle from a ``(n,)*d`` array."""
        return tuple(slice(a - 1, b) for a, b in zip(self.lo, self.hi))

    def check_bounds(self, shape: LatticeShape):
        if self.d != shape.d or max(self.hi) > shape.n:
            raise BoundsError(f"{self} does not fit in the lattice [1, {shape.n}]^{shape.d}")

    def intersects(self, other: "Rect") -> bool:
        return all(a1 <= b2 and a2 <= b1 for a1, b1, a2, b2 in zip(self.lo, self.hi, other.lo, other.hi))

    def contains(self, other: "Rect") -> bool:
        return all(a1 <= a2 and b2 <= b1 for a1, b1, a2, b2 in zip(self.lo, self.hi, other.lo, other.hi))

    def cells(self, shape: LatticeShape) -> np.ndarray:
        """Sorted flat indices of the cells of this rectangle."""
        self.check_bounds(shape)
        return np.arange(shape.N).reshape(shape.dims)[self.slices()].ravel()

    def __str__(self):
        return "x".join(f"[{a},{b}]" for a, b in zip(self.lo, self.hi))


CellSet = Union[Rect, np.ndarray, Sequence]


def as_flat_cells(shape: LatticeShape, cells: CellSet) -> np.ndarray:
    """Normalize any accepted cell-set representation to sorted flat indices."""
    if isinstance(cells, Rect):
        return cells.cells(shape)
    arr = np.asarray(cells, dtype=np.int64)
    if arr.ndim == 2:
        flat = shape.flat_index(arr)
    elif arr.ndim == 1:
        if arr.size and (arr.min() < 0 or arr.max() >= shape.N):
            raise BoundsError("flat cell index outside the lattice")
        flat = arr
    else:
        raise ShapeError(f"cannot interpret array of ndim {arr.ndim} as a cell set")
    return np.unique(flat)


class LatticeField:
    """Real-valued signal on ``L_{d,n}`` (immutable).

    Parameters
    ----------
    values : array_like
        Either a ``d``-dimensional array with all sides equal, or a flat
        row-major vector together with ``shape``.
    shape : LatticeShape, optional
        Required when ``values`` is flat and ``d > 1``.
    """

    __slots__ = ("shape", "_values")

    def __init__(self, values, shape: LatticeShape = None):
        arr = np.array(values, dtype=np.float64, copy=True)
        if shape is None:
            if arr.ndim == 0 or len(set(arr.shape)) != 1:
                raise ShapeError(f"values of shape {arr.shape} do not form a square lattice")
            shape = LatticeShape(arr.ndim, arr.shape[0])
        if arr.size != shape.N:
            raise ShapeError(f"expected {shape.N} values for {shape}, got {arr.size}")
        arr = arr.reshape(shape.dims)
        if not np.all(np.isfinite(arr)):
            raise ParameterError("field values must be finite")
        if arr.size and np.abs(arr).max() > MAX_ABS_VALUE:
            raise ParameterError(f"field values must satisfy |value| <= {MAX_ABS_VALUE:g}")
        arr.flags.writeable = False
        self.shape = shape
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        """Read-only ``(n,)*d`` array."""
        return self._values

    @property
    def flat(self) -> np.ndarray:
        return self._values.ravel()

    def __getitem__(self, coords):
        """Value at 1-based coordinates."""
        return float(self._values[tuple(int(c) - 1 for c in coords)])

    def __eq__(self, other):
        return (
            isinstance(other, LatticeField)
            and self.shape == other.shape
            and np.array_equal(self._values, other._values)
        )

    def __repr__(self):
        return f"LatticeField(d={self.shape.d}, n={self.shape.n})"


def _box(table: np.ndarray, starts, stops):
    """Inclusion-exclusion over the ``2^d`` corners of padded prefix sums.

    ``starts``/``stops`` are per-axis 0-based half-open bounds; they may be
    broadcastable integer arrays or matching strided slices, giving one box
    per position.
    """
    d = len(starts)
    total = 0.0
    for corner in itertools.product((0, 1), repeat=d):
        idx = tuple(stops[i] if c else starts[i] for i, c in enumerate(corner))
        if (d - sum(corner)) % 2:
            total = total - table[idx]
        else:
            total = total + table[idx]
    return total


class RegionStats(NamedTuple):
    sum: float
    sum_sq: float
    mean: float
    sse: float


class PrefixSumTable:
    """Cumulative sums of values and squared values for O(2^d) box queries."""

    def __init__(self, field: LatticeField):
        self.field = field
        self.shape = field.shape
        pad = [(1, 0)] * self.shape.d
        cs = np.pad(field.values, pad)
        cs2 = np.pad(field.values**2, pad)
        for ax in range(self.shape.d):
            cs = np.cumsum(cs, axis=ax)
            cs2 = np.cumsum(cs2, axis=ax)
        self.cum_sum = cs
        self.cum_sum_sq = cs2

    def box_sums(self, starts, stops):
        """(sum, sum of squares) for boxes given by 0-based half-open bounds."""
        return _box(self.cum_sum, starts, stops), _box(self.cum_sum_sq, starts, stops)

    def rect_sums(self, rect: Rect):
        rect.check_bounds(self.shape)
        starts = tuple(a - 1 for a in rect.lo)
        s, s2 = self.box_sums(starts, rect.hi)
        return float(s), float(s2)


def region_stats(table: PrefixSumTable, rect: Rect) -> RegionStats:
    """Sum, sum of squares, mean and SSE of the field over ``rect``."""
    s, s2 = table.rect_sums(rect)
    vol = rect.volume
    sse = s2 - s * s / vol
    return RegionStats(s, s2, s / vol, max(sse, 0.0))


def sse_direct(values: np.ndarray) -> float:
    """Two-pass sum of squared deviations from the mean."""
    values = np.asarray(values, dtype=np.float64)
    return float(np.sum((values - values.mean()) ** 2))


def _set_stats(table: PrefixSumTable, cells) -> tuple:
    """(size, mean) of a cell set; rectangles use the prefix tables."""
    if isinstance(cells, Rect):
        st = region_stats(table, cells)
        return cells.volume, st.mean
    flat = as_flat_cells(table.shape, cells)
    if flat.size == 0:
        raise ParameterError("cell set must be non-empty")
    return flat.size, float(table.field.flat[flat].mean())


def merge_gain(table: PrefixSumTable, first: CellSet, second: CellSet) -> float:
    """SSE increase from pooling two disjoint cell sets.

    Equals ``|I||J| / (|I| + |J|) * (mean_I - mean_J)^2``, which is also
    ``SSE(I u J) - SSE(I) - SSE(J)``.
    """
    if isinstance(first, Rect) and isinstance(second, Rect):
        first.check_bounds(table.shape)
        second.check_bounds(table.shape)
        if first.intersects(second):
            raise DisjointnessError(f"{first} and {second} overlap")
    else:
        a = as_flat_cells(table.shape, first)
        b = as_flat_cells(table.shape, second)
        if np.intersect1d(a, b, assume_unique=True).size:
            raise DisjointnessError("cell sets overlap")
    ni, mi = _set_stats(table, first)
    nj, mj = _set_stats(table, second)
    return ni * nj / (ni + nj) * (mi - mj) ** 2


def rect_gap(r1: Rect, r2: Rect) -> np.ndarray:
    """Per-axis count of empty rows between two rectangles (0 if they overlap on that axis)."""
    lo1, hi1 = np.asarray(r1.lo), np.asarray(r1.hi)
    lo2, hi2 = np.asarray(r2.lo), np.asarray(r2.hi)
    return np.maximum(0, np.maximum(lo2 - hi1, lo1 - hi2))


def min_distance(first: CellSet, second: CellSet, shape: LatticeShape = None) -> float:
    """Minimum Euclidean distance between two non-empty cell sets.

    Rectangles are handled in closed form.  Flat-index cell sets need
    ``shape`` to recover coordinates.
    """
    if isinstance(first, Rect) and isinstance(second, Rect):
        return float(np.sqrt(np.sum(rect_gap(first, second).astype(float) ** 2)))
    pts = []
    for cells in (first, second):
        if isinstance(cells, Rect):
            if shape is None:
                shape = LatticeShape(cells.d, max(cells.hi))
            pts.append(shape.coords(cells.cells(shape)))
            continue
        arr = np.asarray(cells, dtype=np.int64)
        if arr.ndim == 1:
            if shape is None:
                raise ParameterError("flat-index cell sets need the lattice shape")
            arr = shape.coords(arr)
        pts.append(arr)
    a, b = pts
    if len(a) == 0 or len(b) == 0:
        raise ParameterError("min_distance needs two non-empty cell sets")
    if len(b) > len(a):
        a, b = b, a
    dist, _ = cKDTree(b).query(a, k=1)
    return float(dist.min())


def rects_adjacent(r1: Rect, r2: Rect) -> bool:
    """Face contact with nested cross-sections.

    Two disjoint rectangles are adjacent when, along some axis, one starts
    right after the other ends and, on the remaining axes, the
    cross-section of one contains the cross-section of the other.
    """
    if r1.d != r2.d:
        raise ShapeError("rectangles of different dimension")
    if r1.intersects(r2):
        raise DisjointnessError(f"{r1} and {r2} overlap")
    for ax in range(r1.d):
        if not (r2.lo[ax] - r1.hi[ax] == 1 or r1.lo[ax] - r2.hi[ax] == 1):
            continue
        others = [i for i in range(r1.d) if i != ax]
        in_2 = all(r2.lo[i] <= r1.lo[i] and r1.hi[i] <= r2.hi[i] for i in others)
        in_1 = all(r1.lo[i] <= r2.lo[i] and r2.hi[i] <= r1.hi[i] for i in others)
        if in_1 or in_2:
            return True
    return False


@dataclass(frozen=True)
class RectPartition:
    shape: LatticeShape
    rects: tuple

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(self.rects))

    def __len__(self):
        return len(self.rects)

    def __iter__(self):
        return iter(self.rects)

    def labels(self) -> np.ndarray:
        """``(n,)*d`` int array holding each cell's rect index (-1 if uncovered)."""
        lab = np.full(self.shape.dims, -1, dtype=np.int64)
        for k, r in enumerate(self.rects):
            lab[r.slices()] = k
        return lab

    def to_regions(self) -> "RegionPartition":
        return RegionPartition(self.shape, [r.cells(self.shape) for r in self.rects])


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Partition of the lattice into arbitrary cell sets (flat 0-based indices)."""

    shape: LatticeShape
    regions: tuple = field(default=())

    def __post_init__(self):
        regs = tuple(np.unique(np.asarray(r, dtype=np.int64)) for r in self.regions)
        for r in regs:
            r.flags.writeable = False
        object.__setattr__(self, "regions", regs)

    @classmethod
    def from_labels(cls, shape: LatticeShape, labels) -> "RegionPartition":
        """Regions are the label classes, ordered by their smallest cell."""
        lab = np.asarray(labels).ravel()
        if lab.size != shape.N:
            raise ShapeError(f"label map has {lab.size} cells, expected {shape.N}")
        order = np.argsort(lab, kind="stable")
        _, starts = np.unique(lab[order], return_index=True)
        groups = np.split(order, starts[1:])
        groups.sort(key=lambda g: g[0])
        return cls(shape, groups)

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __eq__(self, other):
        if not isinstance(other, RegionPartition) or self.shape != other.shape:
            return NotImplemented
        return len(self) == len(other) and all(np.array_equal(a, b) for a, b in zip(self, other))

    def labels(self) -> np.ndarray:
        """``(n,)*d`` int array of region indices (-1 for uncovered cells)."""
        lab = np.full(self.shape.N, -1, dtype=np.int64)
        for k, r in enumerate(self.regions):
            lab[r] = k
        return lab.reshape(self.shape.dims)

    def sizes(self) -> np.ndarray:
        return np.array([len(r) for r in self.regions], dtype=np.int64)


@dataclass(frozen=True)
class PartitionReport:
    ok: bool
    kind: str = None
    cell: tuple = None
    message: str = ""

    def __bool__(self):
        return self.ok


def validate_partition(part) -> PartitionReport:
    """Check disjointness and full coverage; report the first offending cell."""
    shape = part.shape
    count = np.zeros(shape.N, dtype=np.int64)
    if isinstance(part, RectPartition):
        grid = count.reshape(shape.dims)
        for k, r in enumerate(part.rects):
            if r.d != shape.d or max(r.hi) > shape.n:
                return PartitionReport(False, "out_of_bounds", None, f"rect {k} = {r} outside lattice")
            grid[r.slices()] += 1
    else:
        for k, r in enumerate(part.regions):
            if len(r) == 0:
                return PartitionReport(False, "empty_region", None, f"region {k} is empty")
            if r[0] < 0 or r[-1] >= shape.N:
                return PartitionReport(False, "out_of_bounds", None, f"region {k} has cells outside lattice")
            count[r] += 1
    bad = np.flatnonzero(count != 1)
    if bad.size == 0:
        return PartitionReport(True)
    first = int(bad[0])
    cell = tuple(int(c) for c in shape.coords([first])[0])
    kind = "overlap" if count[first] > 1 else "uncovered"
    return PartitionReport(False, kind, cell, f"cell {cell} covered {count[first]} times")


@dataclass(frozen=True)
class UndirectedGraph:
    node_count: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ParameterError(f"edge ({i}, {j}) outside [0, {self.node_count})")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))


def connected_components(graph: UndirectedGraph) -> list:
    """Components as sorted lists of nodes, ordered by smallest member."""
    k = graph.node_count
    if k == 0:
        return []
    if graph.edges:
        ij = np.array(sorted(graph.edges), dtype=np.int64)
        adj = coo_matrix((np.ones(len(ij)), (ij[:, 0], ij[:, 1])), shape=(k, k))
    else:
        adj = coo_matrix((k, k))
    _, lab = _cc(adj, directed=False)
    comps = {}
    for node, c in enumerate(lab):
        comps.setdefault(c, []).append(node)
    return sorted(comps.values(), key=lambda c: c[0])
