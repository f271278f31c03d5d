"""Soft switching between experts while the real system changes.

Run:  python3 demos/03_soft_switching.py [bank.json]

Without a bank file the demo uses three hand-made stabilising controllers
(one per representative system) so it runs instantly; with a bank written
by `ssep build-bank` it uses the trained DDPG experts.
"""

import sys

import numpy as np

from ssep import adapt, dynamics, serialization
from ssep.expert import ExpertBank

points = [np.array(p) for p in ([0.1, 1.0], [2.0, 0.0], [2.0, 2.0])]


def pd_expert(xi, kp=10.0, kd=6.0):
    # cancels gravity and friction of *its* system, then adds PD feedback
    def policy(x):
        u = (-xi[0] * 9.81 * np.sin(x[0]) + xi[1] * x[1] - xi[0] * (kp * x[0] + kd * x[1])) / 10
        return np.clip([u], -1, 1)
    return policy


if len(sys.argv) > 1:
    bank = serialization.load_bank(sys.argv[1])
    start = dynamics.X_TILDE
else:
    bank = ExpertBank(points, [pd_expert(p) for p in points])
    start = (0.3, 0.0)  # the PD experts cannot swing up, so start near the top

# The real system follows a schedule the controller never observes:
# three segments with different parameters and a reset at each switch.
schedule = dynamics.DEFAULT_SCHEDULE
for seg in schedule.segments:
    print(f"steps {seg.start:3d}-{seg.end:3d}: real xi = {list(seg.xi)}")

# Discounted FTRL forgets old evidence (beta < 1), so the weights can move
# when the system changes.  Every step the observed transition is compared
# with what each expert's *model* predicts, and the weights follow the
# experts whose models explain the data.
oco = adapt.OcoState.zeros(len(bank), eta=1.0, beta=0.9, update_period=5)
trace = adapt.run_adaptation(schedule, bank, oco, x1=start, reset_state=start)

for t in (1, 50, 100, 105, 120, 150, 200, 205, 220, 300, 500):
    w = trace.w[t - 1]
    print(f"t={t:3d}  x1={trace.x[t - 1, 0]:+.3f}  w=" + " ".join(f"{v:.3f}" for v in w)
          + f"  leader=expert {np.argmax(w) + 1}")

# Once the pendulum rests upright every expert model predicts the same next
# state, the loss gradients vanish, and the discounted sums decay: the weights
# drift back towards uniform until the next disturbance (here: the resets).
print("segment returns:", [round(r, 1) for r in trace.segment_returns(schedule)])
