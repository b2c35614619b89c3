"""A small Monte Carlo run summarized as mean(sd) per scenario."""

import sys

from latpart.fieldio import table_cell
from latpart.simulation import BenchConfig, monte_carlo

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 10
print(f"{'scenario':>8} {'sigma':>6} {'dist1':>12} {'dist2':>10}   ({reps} reps, naive two-step)")
for scenario, sigma in (("S1", 0.5), ("S1", 1.0), ("S3", 0.5), ("S4", 0.5)):
    res = monte_carlo(BenchConfig(scenario=scenario, sigma=sigma, reps=reps))
    agg = res.aggregates()
    print(f"{scenario:>8} {sigma:6.1f} {table_cell(*agg['dist1']):>12} {table_cell(*agg['dist2']):>10}")
