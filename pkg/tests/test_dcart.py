import itertools

import numpy as np
import pytest

from latpart import (
    DyadicCostTable,
    DyadicRectId,
    InfeasibleError,
    LatticeField,
    ParameterError,
    Rect,
    ShapeError,
    constrained_dcart_fit,
    dcart_fit,
    k_dyad,
    validate_partition,
)
from latpart.oracles import exhaustive_dyadic_oracle

from conftest import random_field


def _objective(y, fit):
    return 0.5 * float(((y.values - fit.theta.values) ** 2).sum()) + fit.lam * fit.leaf_count


def test_two_by_two_example():
    y = LatticeField(np.array([[0.0, 0.0], [10.0, 10.0]]))
    fit = dcart_fit(y, 1.0)
    assert fit.objective == pytest.approx(2.0)
    assert set(fit.partition.rects) == {Rect((1, 1), (1, 2)), Rect((2, 1), (2, 2))}
    assert fit.theta == y


def test_constant_field_single_leaf():
    fit = dcart_fit(LatticeField(np.full((8, 8), 3.0)), 0.1)
    assert fit.leaf_count == 1 and fit.objective == pytest.approx(0.1)


def test_fit_is_consistent(rng):
    y = random_field(rng, 2, 16)
    fit = dcart_fit(y, 0.5)
    assert validate_partition(fit.partition).ok
    assert fit.objective == pytest.approx(_objective(y, fit), rel=1e-10)
    for r in fit.partition.rects:
        assert fit.theta.values[r.slices()] == pytest.approx(y.values[r.slices()].mean())
        DyadicRectId.from_rect(r)  # every leaf is dyadic


@pytest.mark.parametrize("d,n", [(1, 16), (2, 4), (3, 4)])
def test_matches_oracle_other_dims(rng, d, n):
    for _ in range(10):
        y = random_field(rng, d, n)
        lam = rng.uniform(0.05, 2.0)
        assert dcart_fit(y, lam).objective == pytest.approx(exhaustive_dyadic_oracle(y, lam).objective, abs=1e-9)


def test_huge_lambda_gives_one_leaf(rng):
    assert dcart_fit(random_field(rng, 2, 8), 1e9).leaf_count == 1


def test_tiny_lambda_interpolates(rng):
    y = random_field(rng, 2, 4)
    fit = dcart_fit(y, 1e-9)
    assert fit.leaf_count == 16
    np.testing.assert_allclose(fit.theta.values, y.values)


def test_errors(rng):
    y = random_field(rng, 2, 4)
    for lam in (0.0, -1.0, np.inf):
        with pytest.raises(ParameterError):
            dcart_fit(y, lam)
    with pytest.raises(ShapeError):
        dcart_fit(LatticeField(np.zeros((6, 6))), 1.0)
    with pytest.raises(InfeasibleError):
        constrained_dcart_fit(y, 1.0, 17)
    with pytest.raises(ParameterError):
        constrained_dcart_fit(y, 1.0, 0)


def test_constrained_deviant_cell():
    vals = np.zeros((4, 4))
    vals[1, 2] = 9.0
    y = LatticeField(vals)
    fit = constrained_dcart_fit(y, 0.01, 4)
    assert min(r.volume for r in fit.partition.rects) >= 4
    assert fit.objective == pytest.approx(exhaustive_dyadic_oracle(y, 0.01, eta=4).objective, abs=1e-9)
    assert dcart_fit(y, 0.01).partition.rects != fit.partition.rects


def test_constrained_eta_equal_to_N(rng):
    y = random_field(rng, 2, 4)
    assert constrained_dcart_fit(y, 0.01, 16).leaf_count == 1


def test_constrained_non_integer_eta(rng):
    y = random_field(rng, 2, 8)
    fit = constrained_dcart_fit(y, 0.01, 2.5)
    assert min(r.volume for r in fit.partition.rects) >= 4


def test_cost_table_reuse(rng):
    y = random_field(rng, 2, 8)
    table = DyadicCostTable(y)
    assert table.n_states == 15**2
    for lam in (0.1, 1.0, 5.0):
        assert table.fit(lam).objective == pytest.approx(dcart_fit(y, lam).objective)


def test_dyadic_rect_id_round_trip():
    for levels in itertools.product(range(3), repeat=2):
        for offs in itertools.product(range(2), repeat=2):
            rid = DyadicRectId(levels, offs)
            assert DyadicRectId.from_rect(rid.to_rect()) == rid
    with pytest.raises(ParameterError):
        DyadicRectId.from_rect(Rect((2, 1), (3, 1)))


class TestKDyad:
    def test_constant(self):
        assert k_dyad(LatticeField(np.ones((8, 8)))) == 1

    def test_halves(self):
        vals = np.zeros((4, 4))
        vals[:, 2:] = 1
        assert k_dyad(LatticeField(vals)) == 2

    def test_single_cell(self):
        vals = np.zeros((4, 4))
        vals[0, 0] = 1
        # the 2x2 corner holding the cell needs 3 pieces, the rest of the lattice 2 more
        assert k_dyad(LatticeField(vals)) == 5

    def test_matches_fit_with_tiny_lambda(self, rng):
        for _ in range(10):
            vals = rng.integers(0, 2, (2, 2)).repeat(2, 0).repeat(2, 1).astype(float)
            y = LatticeField(vals)
            assert k_dyad(y) == dcart_fit(y, 1e-6).leaf_count


@pytest.mark.parametrize("lam", np.linspace(0.05, 10, 15))
def test_leaf_count_monotone_in_lambda(lam):
    rng = np.random.default_rng(7)
    y = random_field(rng, 2, 16)
    table = DyadicCostTable(y)
    assert table.fit(lam).leaf_count >= table.fit(lam * 1.5).leaf_count
