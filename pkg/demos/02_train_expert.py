"""Train one DDPG expert on a representative pendulum and measure it.

Run:  python3 demos/02_train_expert.py [episodes]

The full budget (500 episodes of 200 steps) takes a few minutes on one
core; the default here is a short run to show the moving parts.
"""

import sys

import numpy as np

from ssep.ddpg import DdpgConfig, train
from ssep.expert import EvalSpec, evaluate
from ssep import serialization

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 40
point = np.array([0.1, 1.0])  # the light pendulum: easy to swing up

# Defaults: 2x128 ReLU actor and critic, tanh actor output, Adam 1e-4 / 1e-3.
cfg = DdpgConfig(episodes=episodes, seed=0)
print("config:", cfg.to_dict())

# The callback sees the agent after every episode; use it to watch G.
def report(episode, agent):
    if (episode + 1) % 10 == 0:
        print(f"  episode {episode + 1:4d}: G = {evaluate(agent.actor, point):10.1f}")

result = train(cfg, xi=point, callback=report)
returns = np.array(result.returns)
print(f"first/last 10 training returns: {returns[:10].mean():.0f} / {returns[-10:].mean():.0f}")

spec = EvalSpec()
G = evaluate(result.agent.actor, point, spec)
print(f"final G on its own system: {G:.1f} (performs well: {G > spec.threshold})")

# Policies are stored as plain JSON and can be fed to the CLI (ssep eval-grid).
doc = serialization.policy_document(result.agent.actor, point, {"episodes": episodes})
serialization.write_text("demo_expert.json", doc)
print("wrote demo_expert.json")
