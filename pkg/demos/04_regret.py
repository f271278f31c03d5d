"""FTRL regret against the best fixed mixture in hindsight.

Run:  python3 demos/04_regret.py

The one-step prediction loss is convex in the weights, so follow-the-
regularised-leader with an entropy regulariser has regret growing like
sqrt(T log M).  We check the ratio Reg(T) / sqrt(T log M) over horizons.
"""

import numpy as np

from ssep import adapt, dynamics
from ssep.expert import ExpertBank

points = [np.array(p) for p in ([0.1, 1.0], [2.0, 0.0], [2.0, 2.0])]
damp = lambda x: np.clip([-0.3 * x[1]], -1, 1)  # gentle velocity feedback
bank = ExpertBank(points, [damp] * 3)

# The real system (1, 1) is not one of the representative systems, so no
# single expert model is exact.  Its model is, however, an exact convex
# mixture of the three (the dynamics are affine in 1/xi1 and xi2/xi1), so the
# hindsight comparator reaches zero loss and FTRL's regret stops growing.
T = 1600
oco = adapt.OcoState.zeros(len(bank), eta=0.5, update_period=5)
trace = adapt.run_adaptation(dynamics.ParamSchedule.constant((1.0, 1.0), T), bank, oco,
                             warmup_steps=20, excitation=0.3, rng=np.random.default_rng(0))

w_star, best = adapt.hindsight_minimum(trace.losses())
print("best fixed mixture in hindsight:", np.round(w_star, 3), f"(total loss {best:.4f})")
print("final FTRL weights:            ", np.round(trace.w[-1], 3))
for horizon in (100, 400, 1600):
    reg = trace.regret(horizon)
    print(f"T={horizon:5d}  regret={reg:9.4f}  regret/sqrt(T log M)={adapt.regret_ratio(reg, horizon, 3):.4f}")
