"""Brute-force reference solvers for tiny lattices.

These share no code with :mod:`latpart.dcart`: rectangle costs come from
direct two-pass summation over the field values, and the search walks
explicit rectangle tuples rather than level-indexed arrays.
"""

from __future__ import annotations

import functools

import numpy as np

from .dcart import FitResult
from .errors import ParameterError, RefusalError, ScopeError
from .lattice import LatticeField, LatticeShape, Rect, RectPartition, sse_direct

MAX_ORACLE_CELLS = 256
# Above this many cells explicit enumeration of dyadic partitions is hopeless
# (4x4 already has 22899 split sequences, 8x8 about 1e18).
MAX_ENUMERATION_CELLS = 16


def _split(rect: Rect, axis: int):
    a, b = rect.lo[axis], rect.hi[axis]
    mid = (a + b) // 2
    hi1 = rect.hi[:axis] + (mid,) + rect.hi[axis + 1 :]
    lo2 = rect.lo[:axis] + (mid + 1,) + rect.lo[axis + 1 :]
    return Rect(rect.lo, hi1), Rect(lo2, rect.hi)


def iter_dyadic_partitions(rect: Rect):
    """Yield every recursive dyadic split sequence of ``rect`` as a tuple of leaves.

    No memoization: a partition reachable through several split orders is
    yielded once per order.
    """
    yield (rect,)
    for axis in range(rect.d):
        if rect.sides[axis] == 1:
            continue
        r1, r2 = _split(rect, axis)
        for p1 in iter_dyadic_partitions(r1):
            for p2 in iter_dyadic_partitions(r2):
                yield p1 + p2


@functools.lru_cache(maxsize=None)
def _enumerated(shape: LatticeShape):
    parts = list(iter_dyadic_partitions(shape.full_rect()))
    rects = sorted({r for p in parts for r in p}, key=lambda r: (r.lo, r.hi))
    index = {r: i for i, r in enumerate(rects)}
    width = max(len(p) for p in parts)
    # Pad with a dummy slot (index len(rects)) that carries zero cost.
    table = np.full((len(parts), width), len(rects), dtype=np.int64)
    for row, p in enumerate(parts):
        table[row, : len(p)] = [index[r] for r in p]
    return rects, table, np.array([len(p) for p in parts])


def count_dyadic_partitions(shape: LatticeShape, distinct: bool = False) -> int:
    """Number of split sequences visited by the enumeration, or of distinct partitions."""
    if shape.N > MAX_ENUMERATION_CELLS:
        raise RefusalError(f"explicit enumeration refused for N={shape.N} > {MAX_ENUMERATION_CELLS}")
    parts = iter_dyadic_partitions(shape.full_rect())
    if distinct:
        return len({frozenset(p) for p in parts})
    return sum(1 for _ in parts)


def _rect_cost(values: np.ndarray, rect: Rect, lam: float) -> float:
    return 0.5 * sse_direct(values[rect.slices()]) + lam


def _result(y: LatticeField, rects, lam: float, eta: float = 1.0) -> FitResult:
    rects = sorted(rects, key=lambda r: r.lo)
    theta = np.empty(y.shape.dims)
    for r in rects:
        theta[r.slices()] = y.values[r.slices()].mean()
    objective = sum(_rect_cost(y.values, r, lam) for r in rects)
    return FitResult(
        theta=LatticeField(theta),
        partition=RectPartition(y.shape, rects),
        objective=float(objective),
        leaf_count=len(rects),
        lam=lam,
        eta=eta,
    )


def exhaustive_dyadic_oracle(y: LatticeField, lam: float, eta: float = 1.0, enumerate_all: bool = None) -> FitResult:
    """Reference minimizer over recursive dyadic partitions (with optional size floor).

    Parameters
    ----------
    y : LatticeField
        Field with at most 256 cells and dyadic side length.
    lam : float
        Per-rectangle penalty.
    eta : float
        Minimum admissible rectangle volume.
    enumerate_all : bool, optional
        Walk every split sequence explicitly.  Defaults to True for
        ``N <= 16`` and False otherwise, in which case a top-down recursion
        over explicit rectangles with a per-rectangle cache is used.
    """
    shape = y.shape
    if shape.N > MAX_ORACLE_CELLS:
        raise RefusalError(f"oracle refused: N={shape.N} exceeds {MAX_ORACLE_CELLS}")
    shape.require_dyadic()
    lam = float(lam)
    if lam <= 0:
        raise ParameterError("penalty must be positive")
    if enumerate_all is None:
        enumerate_all = shape.N <= MAX_ENUMERATION_CELLS
    if enumerate_all:
        if shape.N > MAX_ENUMERATION_CELLS:
            raise RefusalError(f"explicit enumeration refused for N={shape.N}")
        rects, table, sizes = _enumerated(shape)
        costs = np.array([_rect_cost(y.values, r, lam) if r.volume >= eta else np.inf for r in rects] + [0.0])
        totals = costs[table].sum(axis=1)
        best = np.min(totals)
        if not np.isfinite(best):
            raise RefusalError(f"no dyadic partition with rectangles of size >= {eta}")
        ties = np.flatnonzero(totals == best)
        row = ties[np.argmin(sizes[ties])]
        chosen = [rects[i] for i in table[row] if i < len(rects)]
        return _result(y, chosen, lam, eta)

    memo = {}

    def best(rect: Rect):
        if rect in memo:
            return memo[rect]
        out = (_rect_cost(y.values, rect, lam), (rect,)) if rect.volume >= eta else (np.inf, ())
        for axis in range(rect.d):
            if rect.sides[axis] == 1:
                continue
            r1, r2 = _split(rect, axis)
            c1, p1 = best(r1)
            c2, p2 = best(r2)
            if c1 + c2 < out[0]:
                out = (c1 + c2, p1 + p2)
        memo[rect] = out
        return out

    total, leaves = best(shape.full_rect())
    if not np.isfinite(total):
        raise RefusalError(f"no dyadic partition with rectangles of size >= {eta}")
    return _result(y, leaves, lam, eta)


def _check_tiny_2d(shape: LatticeShape):
    if shape.d != 2:
        raise ScopeError("rectangular tiling oracle supports d = 2 only")
    if shape.n > 4:
        raise RefusalError(f"rectangular tiling oracle refused for n={shape.n} > 4")


def iter_rect_tilings(shape: LatticeShape):
    """Yield every partition of a tiny 2-D lattice into rectangles."""
    _check_tiny_2d(shape)
    n = shape.n

    def rec(covered: frozenset):
        free = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if (i, j) not in covered]
        if not free:
            yield ()
            return
        i0, j0 = free[0]
        for i1 in range(i0, n + 1):
            for j1 in range(j0, n + 1):
                cells = {(i, j) for i in range(i0, i1 + 1) for j in range(j0, j1 + 1)}
                if cells & covered:
                    break
                for rest in rec(covered | cells):
                    yield (Rect((i0, j0), (i1, j1)),) + rest

    yield from rec(frozenset())


def exhaustive_rect_oracle(y: LatticeField, lam: float) -> FitResult:
    """Exact minimizer of ``0.5 * SSE + lam * #rects`` over all rectangular tilings.

    Searches tilings by always covering the first free cell in row-major
    order, caching the optimum for each set of covered cells.  Only tiny 2-D
    lattices (n <= 4) are accepted.
    """
    shape = y.shape
    _check_tiny_2d(shape)
    lam = float(lam)
    if lam <= 0:
        raise ParameterError("penalty must be positive")
    n = shape.n
    full = (1 << shape.N) - 1
    memo = {}

    def bit(i, j):
        return 1 << ((i - 1) * n + (j - 1))

    @functools.lru_cache(maxsize=None)
    def rect_mask(r: Rect) -> int:
        return sum(bit(i, j) for i in range(r.lo[0], r.hi[0] + 1) for j in range(r.lo[1], r.hi[1] + 1))

    @functools.lru_cache(maxsize=None)
    def rect_cost(r: Rect) -> float:
        return _rect_cost(y.values, r, lam)

    def best(mask: int):
        if mask == full:
            return 0.0, ()
        if mask in memo:
            return memo[mask]
        p = (~mask & full & -(~mask & full)).bit_length() - 1
        i0, j0 = divmod(p, n)
        i0, j0 = i0 + 1, j0 + 1
        out = (np.inf, ())
        jmax = n
        for i1 in range(i0, n + 1):
            # Widest rectangle with rows i0..i1 whose cells are all free.
            for j in range(j0, jmax + 1):
                if mask & bit(i1, j):
                    jmax = j - 1
                    break
            if jmax < j0:
                break
            for j1 in range(j0, jmax + 1):
                r = Rect((i0, j0), (i1, j1))
                rest_cost, rest = best(mask | rect_mask(r))
                c = rect_cost(r) + rest_cost
                if c < out[0] or (c == out[0] and 1 + len(rest) < len(out[1])):
                    out = (c, (r,) + rest)
        memo[mask] = out
        return out

    _, rects = best(0)
    return _result(y, rects, lam)
