"""The DP against brute force: dyadic enumeration and unrestricted rectangular tilings."""

import numpy as np

from latpart import LatticeField, LatticeShape, dcart_fit
from latpart.oracles import count_dyadic_partitions, exhaustive_dyadic_oracle, exhaustive_rect_oracle

shape = LatticeShape(2, 4)
print("4x4 split sequences:", count_dyadic_partitions(shape),
      "distinct partitions:", count_dyadic_partitions(shape, distinct=True))

rng = np.random.default_rng(0)
gaps, slack = [], []
for _ in range(25):
    y = LatticeField(rng.normal(size=(4, 4)) + rng.integers(0, 2, (4, 4)))
    dp = dcart_fit(y, 0.3)
    gaps.append(abs(dp.objective - exhaustive_dyadic_oracle(y, 0.3).objective))
    slack.append(dp.objective - exhaustive_rect_oracle(y, 0.3).objective)
print(f"max |DP - dyadic oracle| = {max(gaps):.1e}")
print(f"price of dyadic restriction: mean {np.mean(slack):.3f}, max {max(slack):.3f}")
