"""The pendulum model, its reward, and what "performing well" means.

Run:  python3 demos/01_pendulum_and_reward.py
"""

import numpy as np

from ssep import dynamics
from ssep.expert import EvalSpec, evaluate

# The state is [angle, angular velocity]; angle 0 is upright, pi is hanging.
# xi = [xi1, xi2] scales inertia and friction; the action is a torque in [-1, 1].
x = np.array([np.pi / 2, 0.0])
print("one step from the horizontal, a=0.5, xi=[1,1]:", dynamics.step(x, 0.5, [1.0, 1.0]))

# Both rest positions are fixed points of the unforced model.
for rest in ([0.0, 0.0], [np.pi, 0.0]):
    print("fixed point", rest, "->", dynamics.step(rest, 0.0, [1.3, 0.7]))

# The reward penalises angle, velocity and effort.  It is 0 only when upright
# and idle, and the angle is NOT wrapped: a full turn costs (2*pi)^2 per step.
print("reward upright:", dynamics.reward([0.0, 0.0], 0.0))
print("reward hanging:", dynamics.reward([np.pi, 0.0], 0.0))
print("reward after a full turn:", dynamics.reward([2 * np.pi, 0.0], 0.0))

# A policy is judged by G: the undiscounted return over H=1000 steps from
# the hanging state.  G below -1500 counts as "does not perform well".
spec = EvalSpec()
idle = lambda x: np.zeros(1)
print(f"\ndoing nothing: G = {evaluate(idle, [1.0, 1.0], spec):.0f}  (threshold {spec.threshold:.0f})")

# A hand-made energy-pumping controller shows that the threshold is reachable
# but depends strongly on the parameters: heavy, strongly damped pendulums
# need several swings before they can be caught.
def pump_and_catch(xi, k=0.2, kp=10.0, kd=6.0, zone=1.0):
    def policy(x):
        energy = 0.5 * xi[0] * x[1] ** 2 + xi[0] * 9.81 * (np.cos(x[0]) - 1)
        if abs(x[0]) < zone:
            u = (-xi[0] * 9.81 * np.sin(x[0]) + xi[1] * x[1] - xi[0] * (kp * x[0] + kd * x[1])) / 10
        else:
            u = -k * energy * x[1]
        return np.clip([u], -1, 1)
    return policy

for xi in dynamics.param_grid(offsets=(0.25, 0.25), step=0.8):
    print(f"xi={xi.tolist()}: hand controller G = {evaluate(pump_and_catch(xi), xi, spec):9.0f}")

# The parameter grid used for heat maps: 19 x 20 points.
grid = dynamics.param_grid()
print("\ngrid points:", len(grid), "first", grid[0], "last", grid[-1])
