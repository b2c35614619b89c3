"""From rectangles to regions: the two merge-based estimators on Scenario 4."""

from latpart.merge import naive_two_step_estimate, two_step_estimate
from latpart.metrics import dist1, dist2, induced_partition
from latpart.simulation import ScenarioSpec, corrupt, lambda_select, scenario_signal

theta = scenario_signal(ScenarioSpec("S4", 128))
truth = induced_partition(theta)
y = corrupt(theta, sigma=0.5, seed=3)

g, fit = lambda_select(y)
lam = fit.lam
print(f"grid value {g:.2f} -> lambda1 = {lam:.3f}, {fit.leaf_count} first-step rectangles")

regions, trace = naive_two_step_estimate(y, lam, lam, eta=8, gamma=8, seed=3, fit=fit)
print(f"naive:     {len(regions)} regions (truth {len(truth)}), "
      f"dist1={dist1(regions, truth)} dist2={dist2(regions, truth)}, "
      f"{len(trace.small_rects)} small rects attached at random")

regions, trace = two_step_estimate(y, lam, lam, eta=8)
merged = sum(1 for *_, m in trace.pairs_tested if m)
print(f"two-step:  {len(regions)} regions, dist1={dist1(regions, truth)} dist2={dist2(regions, truth)}, "
      f"{merged} of {len(trace.pairs_tested)} pairs linked")
