"""Dyadic CART: penalized least squares over recursive dyadic partitions.

Every rectangle reachable by repeated midpoint splits of ``[1, n]^d`` is a
product of dyadic intervals, so the search space is indexed by one size
exponent and one block offset per axis.  All rectangles sharing the same
size exponents form a regular grid of blocks, which lets the dynamic
program run one vectorized numpy step per exponent combination, children
(smaller total exponent) before parents.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InfeasibleError, ParameterError
from .lattice import LatticeField, PrefixSumTable, Rect, RectPartition

# Relative slack under which a split is not considered better than the leaf.
_TIE_RTOL = 1e-12


class DyadicRectId(NamedTuple):
    """Product of dyadic intervals: side ``2**levels[i]``, block ``offsets[i]`` on axis i."""

    levels: tuple
    offsets: tuple

    def to_rect(self) -> Rect:
        lo = tuple(o * 2**k + 1 for k, o in zip(self.levels, self.offsets))
        hi = tuple((o + 1) * 2**k for k, o in zip(self.levels, self.offsets))
        return Rect(lo, hi)

    @classmethod
    def from_rect(cls, rect: Rect) -> "DyadicRectId":
        levels, offsets = [], []
        for a, side in zip(rect.lo, rect.sides):
            k = side.bit_length() - 1
            if side != 2**k or (a - 1) % side:
                raise ParameterError(f"{rect} is not a product of dyadic intervals")
            levels.append(k)
            offsets.append((a - 1) // side)
        return cls(tuple(levels), tuple(offsets))


@dataclass(frozen=True)
class FitResult:
    """Output of a DCART-type fit.

    ``objective`` is ``0.5 * ||y - theta||^2 + lam * leaf_count``.
    """

    theta: LatticeField
    partition: RectPartition
    objective: float
    leaf_count: int
    lam: float
    eta: float = 1.0


def _level_combos(m: int, d: int) -> list:
    return sorted(itertools.product(range(m + 1), repeat=d), key=lambda c: (sum(c), c))


def _halves(arr: np.ndarray, axis: int):
    sl_even = [slice(None)] * arr.ndim
    sl_odd = [slice(None)] * arr.ndim
    sl_even[axis] = slice(0, None, 2)
    sl_odd[axis] = slice(1, None, 2)
    return arr[tuple(sl_even)], arr[tuple(sl_odd)]


def _solve(combos: list, leaf_cost: dict, d: int):
    """Bottom-up Bellman recursion.

    ``choice`` holds 0 for a leaf and ``j + 1`` for a split along axis j.
    A split must beat the leaf (and every lower-axis split) strictly, which
    prefers fewer rectangles and then the lowest split axis on ties.
    """
    cost, choice = {}, {}
    for combo in combos:
        best = leaf_cost[combo]
        ch = np.zeros(best.shape, dtype=np.int8)
        for j in range(d):
            if combo[j] == 0:
                continue
            child = combo[:j] + (combo[j] - 1,) + combo[j + 1 :]
            first, second = _halves(cost[child], j)
            cand = first + second
            finite = np.isfinite(best)
            thr = np.where(finite, best - _TIE_RTOL * np.abs(np.where(finite, best, 0.0)), np.inf)
            better = cand < thr
            if better.any():
                best = np.where(better, cand, best)
                ch[better] = j + 1
        cost[combo] = best
        choice[combo] = ch
    return cost, choice


def _backtrack(choice: dict, root: tuple) -> list:
    d = len(root)
    leaves = []
    stack = [(root, (0,) * d)]
    while stack:
        combo, off = stack.pop()
        c = int(choice[combo][off])
        if c == 0:
            leaves.append(DyadicRectId(combo, off))
            continue
        j = c - 1
        child = combo[:j] + (combo[j] - 1,) + combo[j + 1 :]
        o1 = off[:j] + (2 * off[j],) + off[j + 1 :]
        o2 = off[:j] + (2 * off[j] + 1,) + off[j + 1 :]
        stack.append((child, o2))
        stack.append((child, o1))
    leaves.sort(key=lambda leaf: leaf.to_rect().lo)
    return leaves


class DyadicCostTable:
    """Sums and SSEs of every dyadic rectangle of a field.

    Building the table is the data-dependent part of a fit; solving for a
    given penalty reuses it, so sweeping a penalty grid costs one table.
    """

    def __init__(self, y: LatticeField):
        shape = y.shape
        shape.require_dyadic()
        self.y = y
        self.shape = shape
        self.m = shape.n.bit_length() - 1
        self.combos = _level_combos(self.m, shape.d)
        table = PrefixSumTable(y)
        self.sums, self.sse = {}, {}
        n = shape.n
        for combo in self.combos:
            # Dyadic boxes of one size tile the lattice, so their corners are strided views.
            starts = tuple(slice(0, n, 2**k) for k in combo)
            stops = tuple(slice(2**k, n + 1, 2**k) for k in combo)
            s, s2 = table.box_sums(starts, stops)
            vol = 2 ** sum(combo)
            self.sums[combo] = s
            self.sse[combo] = np.maximum(s2 - s * s / vol, 0.0)

    @property
    def root(self) -> tuple:
        return (self.m,) * self.shape.d

    @property
    def n_states(self) -> int:
        """Number of distinct dyadic rectangles, ``(2n - 1)^d``."""
        return sum(a.size for a in self.sse.values())

    def fit(self, lam: float, eta: float = 1.0) -> FitResult:
        lam = _check_lambda(lam)
        eta = _check_eta(eta, self.shape.N)
        leaf = {}
        for combo in self.combos:
            if 2 ** sum(combo) >= eta:
                leaf[combo] = 0.5 * self.sse[combo] + lam
            else:
                leaf[combo] = np.full(self.sse[combo].shape, np.inf)
        cost, choice = _solve(self.combos, leaf, self.shape.d)
        objective = float(cost[self.root].flat[0])
        if not np.isfinite(objective):
            raise InfeasibleError(f"no dyadic partition with all rectangles of size >= {eta}")
        leaves = _backtrack(choice, self.root)
        theta = np.empty(self.shape.dims)
        rects = []
        for leaf_id in leaves:
            r = leaf_id.to_rect()
            theta[r.slices()] = self.y.values[r.slices()].mean()
            rects.append(r)
        return FitResult(
            theta=LatticeField(theta),
            partition=RectPartition(self.shape, rects),
            objective=objective,
            leaf_count=len(rects),
            lam=lam,
            eta=eta,
        )


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise ParameterError(f"penalty must be positive and finite, got {lam}")
    return lam


def _check_eta(eta, N: int) -> float:
    eta = float(eta)
    if not np.isfinite(eta) or eta <= 0:
        raise ParameterError(f"minimum size must be positive and finite, got {eta}")
    if eta > N:
        raise InfeasibleError(f"minimum size {eta:g} exceeds the lattice size {N}")
    return eta


def dcart_fit(y: LatticeField, lam: float) -> FitResult:
    """Exact minimizer of ``0.5 * SSE + lam * #rects`` over dyadic partitions.

    Parameters
    ----------
    y : LatticeField
        Observations; the side length must be a power of 2.
    lam : float
        Per-rectangle penalty, in units of variance.

    Returns
    -------
    FitResult
        The fitted piecewise-constant signal (rectangle means of ``y``), its
        partition and the attained objective.
    """
    return DyadicCostTable(y).fit(lam)


def constrained_dcart_fit(y: LatticeField, lambda1: float, eta: float) -> FitResult:
    """As :func:`dcart_fit`, restricted to partitions whose rectangles all have volume >= eta."""
    _check_eta(eta, y.shape.N)
    return DyadicCostTable(y).fit(lambda1, eta)


def k_dyad(theta: LatticeField) -> int:
    """Fewest dyadic rectangles on which ``theta`` is piecewise constant."""
    shape = theta.shape
    shape.require_dyadic()
    m = shape.n.bit_length() - 1
    combos = _level_combos(m, shape.d)
    vals = theta.values
    leaf = {}
    for combo in combos:
        blocks = []
        for k in combo:
            blocks += [shape.n // 2**k, 2**k]
        b = vals.reshape(blocks)
        inner = tuple(range(1, 2 * shape.d, 2))
        const = b.max(axis=inner) == b.min(axis=inner)
        leaf[combo] = np.where(const, 1.0, np.inf)
    cost, _ = _solve(combos, leaf, shape.d)
    return int(cost[(m,) * shape.d].flat[0])
