"""Ground-truth partitions and partition-recovery error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConsistencyError, ShapeError
from .lattice import LatticeField, RectPartition, RegionPartition


@dataclass(frozen=True)
class ModelParams:
    kappa: float
    delta: int
    region_count: int


def induced_partition(theta: LatticeField) -> RegionPartition:
    """Maximal face-connected sets of cells sharing one value."""
    shape = theta.shape
    vals = theta.values
    idx = np.arange(shape.N).reshape(shape.dims)
    rows, cols = [], []
    for ax in range(shape.d):
        a = [slice(None)] * shape.d
        b = [slice(None)] * shape.d
        a[ax] = slice(None, -1)
        b[ax] = slice(1, None)
        same = vals[tuple(a)] == vals[tuple(b)]
        rows.append(idx[tuple(a)][same])
        cols.append(idx[tuple(b)][same])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    adj = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(shape.N, shape.N))
    _, labels = connected_components(adj, directed=False)
    return RegionPartition.from_labels(shape, labels)


def _check_same_shape(a: RegionPartition, b: RegionPartition):
    if a.shape != b.shape:
        raise ShapeError(f"partitions live on different lattices: {a.shape} vs {b.shape}")


def dist1(estimated: RegionPartition, truth: RegionPartition) -> int:
    """Localization error: max over true regions of the smallest symmetric difference to an estimated region."""
    _check_same_shape(estimated, truth)
    est = estimated.labels().ravel()
    tru = truth.labels().ravel()
    n_est, n_tru = len(estimated), len(truth)
    inter = np.bincount(tru * n_est + est, minlength=n_tru * n_est).reshape(n_tru, n_est)
    sym = truth.sizes()[:, None] + estimated.sizes()[None, :] - 2 * inter
    return int(sym.min(axis=1).max())


def dist2(estimated: RegionPartition, truth: RegionPartition) -> int:
    """Absolute difference in region counts."""
    return abs(len(estimated) - len(truth))


def model_params(theta: LatticeField, associated: RectPartition) -> ModelParams:
    """Minimum jump size, minimum rectangle volume and region count of a piecewise-constant signal.

    ``kappa`` is the smallest gap between distinct values taken by the
    signal (``inf`` for a constant signal).  ``delta`` is the smallest
    volume among the rectangles of ``associated``.
    """
    if associated.shape != theta.shape:
        raise ShapeError("associated partition lives on a different lattice")
    for r in associated.rects:
        block = theta.values[r.slices()]
        if block.max() != block.min():
            raise ConsistencyError(f"signal is not constant on {r}")
    levels = np.unique(theta.values)
    kappa = float(np.diff(levels).min()) if levels.size > 1 else float("inf")
    delta = min(r.volume for r in associated.rects)
    return ModelParams(kappa, delta, len(induced_partition(theta)))
