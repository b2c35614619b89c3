"""Second-step merging of first-step rectangles into regions.

Two rectangles are linked when they are close and pooling them raises the
SSE by less than ``2 * lambda2``.  Regions are the unions of rectangles
over the connected components of the resulting graph.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dcart import DyadicCostTable, FitResult
from .errors import DisjointnessError, ParameterError
from .lattice import (
    LatticeField,
    PrefixSumTable,
    Rect,
    RegionPartition,
    UndirectedGraph,
    connected_components,
    region_stats,
    sse_direct,
)

log = logging.getLogger(__name__)

POLICIES = ("random", "nearest")


@dataclass(frozen=True)
class MergeConfig:
    lambda2: float
    eta: float = 8.0
    gamma: float = 8.0
    policy: str = "random"
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda2", "eta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {v}")
        if self.policy not in POLICIES:
            raise ParameterError(f"unknown small-set policy {self.policy!r}; expected one of {POLICIES}")


@dataclass
class MergeTrace:
    """Diagnostic record of one merging pass.

    Pair arrays are aligned: row ``t`` describes the pair
    ``(pair_i[t], pair_j[t])`` of first-step rectangle indices.
    """

    pair_i: np.ndarray
    pair_j: np.ndarray
    distance: np.ndarray
    gain: np.ndarray
    merged: np.ndarray
    graph: UndirectedGraph
    small_rects: list = field(default_factory=list)
    all_small: bool = False
    fit: FitResult = None

    @property
    def pairs_tested(self) -> list:
        return list(
            zip(
                self.pair_i.tolist(),
                self.pair_j.tolist(),
                self.distance.tolist(),
                self.gain.tolist(),
                self.merged.tolist(),
            )
        )


def merge_decision(y: LatticeField, ri: Rect, rj: Rect, lambda2: float, route: str = "gain") -> bool:
    """Whether pooling two disjoint rectangles raises half their SSE by less than ``lambda2``.

    ``route="direct"`` compares half-SSEs of the pieces and their union
    computed by two-pass summation; ``route="gain"`` uses the closed form
    ``|Ri||Rj| / (|Ri| + |Rj|) * (mean_i - mean_j)^2 < 2 * lambda2``.
    """
    if ri.intersects(rj):
        raise DisjointnessError(f"{ri} and {rj} overlap")
    if route == "direct":
        vi = y.values[ri.slices()].ravel()
        vj = y.values[rj.slices()].ravel()
        both = np.concatenate([vi, vj])
        return 0.5 * (sse_direct(vi) + sse_direct(vj)) + lambda2 > 0.5 * sse_direct(both)
    if route != "gain":
        raise ParameterError(f"unknown route {route!r}")
    table = PrefixSumTable(y)
    mi = region_stats(table, ri).mean
    mj = region_stats(table, rj).mean
    ni, nj = ri.volume, rj.volume
    return ni * nj / (ni + nj) * (mi - mj) ** 2 < 2.0 * lambda2


def _rect_arrays(y: LatticeField, rects):
    lo = np.array([r.lo for r in rects], dtype=np.int64)
    hi = np.array([r.hi for r in rects], dtype=np.int64)
    vol = np.prod(hi - lo + 1, axis=1).astype(float)
    table = PrefixSumTable(y)
    sums, _ = table.box_sums(tuple((lo - 1).T), tuple(hi.T))
    return lo, hi, vol, sums / vol


def _pairwise(lo, hi, vol, mean, nodes):
    """Distances and merge gains over all unordered pairs drawn from ``nodes``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    ii, jj = np.triu_indices(len(nodes), k=1)
    i, j = nodes[ii], nodes[jj]
    gap = np.maximum(0, np.maximum(lo[j] - hi[i], lo[i] - hi[j]))
    dist = np.sqrt(np.sum(gap.astype(float) ** 2, axis=1))
    gain = vol[i] * vol[j] / (vol[i] + vol[j]) * (mean[i] - mean[j]) ** 2
    return i, j, dist, gain


def _regions(y: LatticeField, rects, components) -> RegionPartition:
    shape = y.shape
    return RegionPartition(shape, [np.concatenate([rects[k].cells(shape) for k in comp]) for comp in components])


def two_step_estimate(
    y: LatticeField, lambda1: float, lambda2: float, eta: float, fit: FitResult = None
) -> tuple:
    """Size-constrained DCART followed by distance- and gain-gated merging.

    Parameters
    ----------
    y : LatticeField
    lambda1 : float
        First-step penalty.
    lambda2 : float
        Merge threshold; a pair is linked when its SSE increase is below ``2 * lambda2``.
    eta : float
        Minimum first-step rectangle volume and maximum linking distance.
    fit : FitResult, optional
        Precomputed first step (must come from the same ``y``, ``lambda1`` and ``eta``).

    Returns
    -------
    (RegionPartition, MergeTrace)
    """
    if not np.isfinite(lambda2) or lambda2 <= 0:
        raise ParameterError(f"lambda2 must be positive, got {lambda2}")
    if fit is None:
        fit = DyadicCostTable(y).fit(lambda1, eta)
    rects = fit.partition.rects
    k = len(rects)
    lo, hi, vol, mean = _rect_arrays(y, rects)
    i, j, dist, gain = _pairwise(lo, hi, vol, mean, np.arange(k))
    merged = (dist <= eta) & (gain < 2.0 * lambda2)
    graph = UndirectedGraph(k, frozenset(zip(i[merged].tolist(), j[merged].tolist())))
    comps = connected_components(graph)
    trace = MergeTrace(i, j, dist, gain, merged, graph, fit=fit)
    return _regions(y, rects, comps), trace


def naive_two_step_estimate(
    y: LatticeField,
    lambda1: float,
    lambda2: float,
    eta: float,
    gamma: float,
    policy: str = "random",
    seed: int = 0,
    fit: FitResult = None,
) -> tuple:
    """Plain DCART followed by merging of large rectangles; small ones attached afterwards.

    Rectangles of volume ``<= eta`` are left out of the merge graph.  Large
    rectangles are linked when within distance ``gamma`` and the merge gain
    is below ``2 * lambda2``.  Each small rectangle then joins one of the
    resulting components, uniformly at random (``policy="random"``, seeded)
    or the nearest one (``policy="nearest"``, ties to the lowest component).

    Returns
    -------
    (RegionPartition, MergeTrace)
    """
    cfg = MergeConfig(lambda2, eta, gamma, policy, seed)
    if gamma < eta:
        warnings.warn(f"gamma={gamma} is smaller than eta={eta}", stacklevel=2)
    if fit is None:
        fit = DyadicCostTable(y).fit(lambda1)
    rects = fit.partition.rects
    k = len(rects)
    lo, hi, vol, mean = _rect_arrays(y, rects)
    small = np.flatnonzero(vol <= eta)
    large = np.flatnonzero(vol > eta)
    if large.size == 0:
        log.debug("all %d first-step rectangles are small; returning one region", k)
        empty = np.array([], dtype=np.int64)
        trace = MergeTrace(
            empty, empty, empty.astype(float), empty.astype(float), empty.astype(bool),
            UndirectedGraph(k), small.tolist(), all_small=True, fit=fit,
        )
        return RegionPartition(y.shape, [np.arange(y.shape.N)]), trace

    i, j, dist, gain = _pairwise(lo, hi, vol, mean, large)
    merged = (dist <= cfg.gamma) & (np.minimum(vol[i], vol[j]) >= cfg.eta) & (gain < 2.0 * cfg.lambda2)
    graph = UndirectedGraph(k, frozenset(zip(i[merged].tolist(), j[merged].tolist())))
    small_set = set(small.tolist())
    # Small rects carry no edges, so each sits alone in its own component.
    comps = [c for c in connected_components(graph) if c[0] not in small_set]
    n_comp = len(comps)

    if cfg.policy == "random":
        rng = np.random.default_rng(cfg.seed)
        assign = rng.integers(0, n_comp, size=small.size)
    else:
        assign = np.empty(small.size, dtype=np.int64)
        comp_members = [np.asarray(c) for c in comps]
        for t, s in enumerate(small):
            best = np.inf
            for ci, members in enumerate(comp_members):
                gap = np.maximum(0, np.maximum(lo[members] - hi[s], lo[s] - hi[members]))
                dmin = np.sqrt(np.sum(gap.astype(float) ** 2, axis=1)).min()
                if dmin < best:
                    best, assign[t] = dmin, ci
    final = [list(c) for c in comps]
    for s, ci in zip(small.tolist(), assign.tolist()):
        final[ci].append(s)
    trace = MergeTrace(i, j, dist, gain, merged, graph, small.tolist(), fit=fit)
    return _regions(y, rects, final), trace
