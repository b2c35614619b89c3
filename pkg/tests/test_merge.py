import warnings

import numpy as np
import pytest

from latpart import DisjointnessError, LatticeField, ParameterError, Rect, validate_partition
from latpart.dcart import dcart_fit
from latpart.merge import MergeConfig, merge_decision, naive_two_step_estimate, two_step_estimate
from latpart.metrics import dist1, induced_partition
from latpart.simulation import ScenarioSpec, corrupt, scenario_signal


def _pair_field(mean_j):
    vals = np.zeros((4, 4))
    vals[2:, :2] = mean_j
    return LatticeField(vals), Rect((1, 1), (2, 2)), Rect((3, 1), (4, 2))


@pytest.mark.parametrize("route", ["gain", "direct"])
def test_merge_decision_examples(route):
    y, ri, rj = _pair_field(1.0)
    assert merge_decision(y, ri, rj, 1.5, route=route)
    y, ri, rj = _pair_field(10.0)
    assert not merge_decision(y, ri, rj, 1.5, route=route)


def test_merge_decision_errors():
    y, ri, _ = _pair_field(1.0)
    with pytest.raises(DisjointnessError):
        merge_decision(y, ri, Rect((2, 2), (3, 3)), 1.0)
    with pytest.raises(ParameterError):
        merge_decision(y, ri, Rect((3, 3), (4, 4)), 1.0, route="other")


@pytest.mark.parametrize(
    "kwargs", [dict(lambda2=0), dict(lambda2=1, eta=-1), dict(lambda2=1, gamma=np.inf), dict(lambda2=1, policy="first")]
)
def test_merge_config_validation(kwargs):
    with pytest.raises(ParameterError):
        MergeConfig(**kwargs)


def test_two_step_constant_field():
    y = LatticeField(np.full((8, 8), 4.0))
    regions, trace = two_step_estimate(y, 0.1, 0.1, 4)
    assert len(regions) == 1 and regions.sizes()[0] == 64


def test_two_step_noiseless_square():
    theta = scenario_signal(ScenarioSpec("S1", 16))
    regions, trace = two_step_estimate(theta, 0.01, 0.15, 4)
    assert len(regions) == 2
    assert validate_partition(regions).ok
    # the square cannot be matched exactly by volume >= 4 dyadic pieces
    assert dist1(regions, induced_partition(theta)) <= 5


def test_two_step_trace(rng):
    theta = scenario_signal(ScenarioSpec("S1", 16))
    y = corrupt(theta, 0.3, 1)
    regions, trace = two_step_estimate(y, 1.0, 1.0, 4)
    k = trace.fit.leaf_count
    assert len(trace.pairs_tested) == k * (k - 1) // 2
    for i, j, dist, gain, merged in trace.pairs_tested:
        assert merged == (dist <= 4 and gain < 2.0)
        ri, rj = trace.fit.partition.rects[i], trace.fit.partition.rects[j]
        assert merged == (dist <= 4 and merge_decision(y, ri, rj, 1.0))
    assert min(r.volume for r in trace.fit.partition.rects) >= 4
    assert validate_partition(regions).ok


def test_two_step_regions_are_unions_of_rects(rng):
    y = LatticeField(rng.normal(size=(16, 16)))
    regions, trace = two_step_estimate(y, 0.5, 0.8, 2)
    lab = regions.labels()
    for r in trace.fit.partition.rects:
        assert np.unique(lab[r.slices()]).size == 1


def test_naive_one_region_when_all_equal():
    y = LatticeField(np.full((8, 8), 1.0))
    fit = dcart_fit(LatticeField(np.arange(64.0).reshape(8, 8) % 2), 1.0)
    # a fine first-step partition of a flat field: every pair has zero gain
    regions, trace = naive_two_step_estimate(y, 1.0, 1.0, 1, 100, fit=fit)
    assert len(regions) == 1


def test_naive_all_small():
    y = LatticeField(np.random.default_rng(0).normal(size=(4, 4)))
    regions, trace = naive_two_step_estimate(y, 1e-6, 1.0, 100, 100)
    assert trace.all_small and len(regions) == 1


def test_naive_warns_when_gamma_below_eta():
    y = LatticeField(np.zeros((8, 8)))
    with pytest.warns(UserWarning):
        naive_two_step_estimate(y, 1.0, 1.0, 8, 4)


def test_naive_policies_deterministic(rng):
    theta = scenario_signal(ScenarioSpec("S4", 32))
    y = corrupt(theta, 0.5, 3)
    for policy in ("random", "nearest"):
        a, ta = naive_two_step_estimate(y, 1.0, 1.0, 8, 8, policy=policy, seed=5)
        b, tb = naive_two_step_estimate(y, 1.0, 1.0, 8, 8, policy=policy, seed=5)
        assert a == b and validate_partition(a).ok
        assert ta.small_rects == tb.small_rects


def test_naive_small_rects_excluded_from_graph(rng):
    theta = scenario_signal(ScenarioSpec("S1", 32))
    y = corrupt(theta, 0.5, 2)
    _, trace = naive_two_step_estimate(y, 0.5, 1.0, 8, 8)
    vols = [r.volume for r in trace.fit.partition.rects]
    small = {k for k, v in enumerate(vols) if v <= 8}
    assert small == set(trace.small_rects)
    for i, j in trace.graph.edges:
        assert i not in small and j not in small


def test_nearest_policy_attaches_to_adjacent_component():
    vals = np.zeros((8, 8))
    vals[:, 4:] = 10.0
    vals[0, 0] = 3.0  # forces a small rect in the left half
    y = LatticeField(vals)
    regions, trace = naive_two_step_estimate(y, 0.01, 1.0, 2, 8, policy="nearest")
    lab = regions.labels()
    assert lab[0, 0] == lab[7, 0] != lab[0, 7]
