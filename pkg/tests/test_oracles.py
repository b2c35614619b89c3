import itertools

import numpy as np
import pytest

from latpart import LatticeField, LatticeShape, ParameterError, RefusalError, ScopeError, dcart_fit
from latpart.oracles import (
    count_dyadic_partitions,
    exhaustive_dyadic_oracle,
    exhaustive_rect_oracle,
    iter_dyadic_partitions,
    iter_rect_tilings,
)

from conftest import random_field


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]
        yield [[first]] + part


def _is_rect(block):
    rows = {i for i, _ in block}
    cols = {j for _, j in block}
    return len(block) == len(rows) * len(cols) and max(rows) - min(rows) + 1 == len(rows) and max(cols) - min(cols) + 1 == len(cols)


def test_two_by_two_counts():
    shape = LatticeShape(2, 2)
    assert count_dyadic_partitions(shape) == 9
    assert count_dyadic_partitions(shape, distinct=True) == 8


def test_one_dimensional_count():
    # sequences on a length-2^k interval: c(0)=1, c(k)=1+c(k-1)^2
    assert count_dyadic_partitions(LatticeShape(1, 4)) == 5
    assert count_dyadic_partitions(LatticeShape(1, 8)) == 26


def test_enumeration_refused_when_large():
    with pytest.raises(RefusalError):
        count_dyadic_partitions(LatticeShape(2, 8))


def test_every_enumerated_partition_tiles():
    shape = LatticeShape(2, 4)
    for part in itertools.islice(iter_dyadic_partitions(shape.full_rect()), 500):
        assert sum(r.volume for r in part) == 16


def test_rect_tilings_three_by_three_against_set_partitions():
    cells = [(i, j) for i in range(1, 4) for j in range(1, 4)]
    brute = sum(1 for p in _set_partitions(cells) if all(_is_rect(b) for b in p))
    assert brute == 322
    assert sum(1 for _ in iter_rect_tilings(LatticeShape(2, 3))) == brute


def test_constant_field_single_rect():
    y = LatticeField(np.full((4, 4), 2.0))
    assert exhaustive_dyadic_oracle(y, 0.5).leaf_count == 1
    assert exhaustive_rect_oracle(y, 0.5).leaf_count == 1


def test_rect_oracle_three_strips():
    vals = np.zeros((3, 3))
    vals[1] = 5.0
    fit = exhaustive_rect_oracle(LatticeField(vals), 0.1)
    assert fit.leaf_count == 3 and all(r.sides == (1, 3) for r in fit.partition.rects)
    assert fit.objective == pytest.approx(0.3)


def test_rect_oracle_against_explicit_tilings(rng):
    shape = LatticeShape(2, 3)
    tilings = list(iter_rect_tilings(shape))
    for _ in range(5):
        y = random_field(rng, 2, 3)
        lam = rng.uniform(0.1, 1.0)
        best = min(
            sum(0.5 * ((y.values[r.slices()] - y.values[r.slices()].mean()) ** 2).sum() + lam for r in t)
            for t in tilings
        )
        assert exhaustive_rect_oracle(y, lam).objective == pytest.approx(best, abs=1e-9)


def test_rect_oracle_never_worse_than_dcart(rng):
    for _ in range(50):
        y = random_field(rng, 2, 4)
        lam = rng.uniform(0.05, 2.0)
        assert exhaustive_rect_oracle(y, lam).objective <= dcart_fit(y, lam).objective + 1e-9


def test_memo_and_enumeration_agree(rng):
    for _ in range(10):
        y = random_field(rng, 2, 4)
        a = exhaustive_dyadic_oracle(y, 0.3, enumerate_all=True)
        b = exhaustive_dyadic_oracle(y, 0.3, enumerate_all=False)
        assert a.objective == pytest.approx(b.objective, abs=1e-12)


def test_oracle_scope_errors():
    with pytest.raises(RefusalError):
        exhaustive_dyadic_oracle(LatticeField(np.zeros((32, 32))), 1.0)
    with pytest.raises(ScopeError):
        exhaustive_rect_oracle(LatticeField(np.zeros((2, 2, 2))), 1.0)
    with pytest.raises(RefusalError):
        exhaustive_rect_oracle(LatticeField(np.zeros((8, 8))), 1.0)
    with pytest.raises(ParameterError):
        exhaustive_dyadic_oracle(LatticeField(np.zeros((2, 2))), 0.0)
