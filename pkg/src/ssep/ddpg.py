"""Deep deterministic policy gradient with replay, target networks and
optional per-episode domain randomisation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dynamics
from .dynamics import N_ACTION, N_PARAM, N_STATE, PARAM_SPACE, Pendulum, ParamSpace
from .nn import AdamState, DenseNet, adam_step, backward_input, backward_params, forward, init_net

log = logging.getLogger(__name__)

DR_MODES = ("off", "blind", "informed")


@dataclass
class DdpgConfig:
    gamma: float = 0.995
    tau: float = 0.005
    batch_size: int = 128
    episodes: int = 500
    steps_per_episode: int = 200
    buffer_capacity: int = 100_000
    noise_sigma: float = 0.2
    noise_decay: float = 0.995
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    hidden: tuple[int, ...] = (128, 128)
    seed: int = 0
    dr_mode: str = "off"
    init_mode: str = "uniform"
    reward_scale: float = 1.0
    output_init: float | None = 3e-3
    # gradient steps that update only the critic before the actor starts learning
    warmup_steps: int = 5000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not (0 < self.gamma < 1 and 0 < self.tau < 1):
            raise ValueError("gamma and tau must lie in (0, 1)")
        if self.batch_size < 1 or self.steps_per_episode < 1 or self.episodes < 0:
            raise ValueError("batch_size and steps_per_episode must be >= 1, episodes >= 0")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer capacity must hold at least one batch")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.noise_sigma < 0 or not 0 < self.noise_decay <= 1:
            raise ValueError("noise_sigma must be >= 0 and noise_decay in (0, 1]")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.dr_mode not in DR_MODES:
            raise ValueError(f"dr_mode must be one of {DR_MODES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class ReplayBuffer:
    """Fixed-capacity ring buffer of ``(x, a, x_next, r)`` transitions."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int = N_ACTION):
        self.capacity = int(capacity)
        self.x = np.zeros((self.capacity, obs_dim))
        self.a = np.zeros((self.capacity, act_dim))
        self.x_next = np.zeros((self.capacity, obs_dim))
        self.r = np.zeros(self.capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, x, a, x_next, r):
        i = self.cursor
        self.x[i], self.a[i], self.x_next[i], self.r[i] = x, a, x_next, r
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=n)

    def sample(self, n: int, rng: np.random.Generator) -> "Batch":
        idx = self.sample_indices(n, rng)
        return Batch(self.x[idx], self.a[idx], self.x_next[idx], self.r[idx])


@dataclass
class Batch:
    x: np.ndarray
    a: np.ndarray
    x_next: np.ndarray
    r: np.ndarray

    def __len__(self):
        return len(self.r)


@dataclass
class DdpgAgent:
    actor: DenseNet
    critic: DenseNet
    target_actor: DenseNet
    target_critic: DenseNet
    actor_opt: AdamState
    critic_opt: AdamState
    buffer: ReplayBuffer
    gamma: float = 0.995

    @classmethod
    def create(cls, cfg: DdpgConfig, obs_dim: int = N_STATE, rng=None) -> "DdpgAgent":
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        actor = init_net([obs_dim, *cfg.hidden, N_ACTION], "relu", "tanh", rng, cfg.output_init)
        critic = init_net([obs_dim + N_ACTION, *cfg.hidden, 1], "relu", "linear", rng, cfg.output_init)
        return cls(
            actor,
            critic,
            actor.copy(),
            critic.copy(),
            AdamState.for_net(actor, cfg.actor_lr),
            AdamState.for_net(critic, cfg.critic_lr),
            ReplayBuffer(cfg.buffer_capacity, obs_dim),
            cfg.gamma,
        )


def select_action(agent: DdpgAgent, x, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    a = agent.actor(x)
    if noise_scale > 0:
        a = a + rng.normal(0.0, noise_scale, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def td_targets(agent: DdpgAgent, batch: Batch, gamma: float | None = None) -> np.ndarray:
    gamma = agent.gamma if gamma is None else gamma
    a_next = agent.target_actor(batch.x_next)
    q_next = agent.target_critic(np.hstack([batch.x_next, a_next]))[:, 0]
    return batch.r + gamma * q_next


def critic_loss_and_grads(critic: DenseNet, batch: Batch, y: np.ndarray):
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    q, cache = forward(critic, np.hstack([batch.x, batch.a]))
    err = q[:, 0] - y
    loss = float(np.mean(err**2))
    grads = backward_params(critic, cache, (2.0 / n) * err[:, None])
    return loss, grads


def critic_update(agent: DdpgAgent, batch: Batch) -> float:
    """One Adam step on the mean squared TD error; returns the pre-update loss."""
    y = td_targets(agent, batch)
    loss, grads = critic_loss_and_grads(agent.critic, batch, y)
    adam_step(agent.critic, grads, agent.critic_opt)
    return loss


def policy_gradient(actor: DenseNet, critic: DenseNet, x: np.ndarray) -> list[np.ndarray]:
    """Gradient of ``mean_n Q(x_n, mu(x_n))`` w.r.t. the actor parameters.

    The critic's action gradient is taken at the current policy action.
    """
    n = len(x)
    if n == 0:
        raise ValueError("empty batch")
    a, actor_cache = forward(actor, x)
    _, critic_cache = forward(critic, np.hstack([x, a]))
    dq_dinput = backward_input(critic, critic_cache, np.full((n, 1), 1.0 / n))
    dq_da = dq_dinput[:, x.shape[1]:]
    return backward_params(actor, actor_cache, dq_da)


def actor_update(agent: DdpgAgent, batch: Batch) -> float:
    """Ascent step on the critic's value of the policy; returns the gradient norm."""
    grads = policy_gradient(agent.actor, agent.critic, batch.x)
    adam_step(agent.actor, [-g for g in grads], agent.actor_opt)
    return float(np.sqrt(sum(np.sum(g * g) for g in grads)))


def soft_update(agent: DdpgAgent, tau: float) -> None:
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for online, target in ((agent.actor, agent.target_actor), (agent.critic, agent.target_critic)):
        for p, tp in zip(online.params(), target.params()):
            tp *= 1.0 - tau
            tp += tau * p


def _observe(x, xi, informed):
    return np.concatenate([x, xi]) if informed else x


@dataclass
class TrainResult:
    agent: DdpgAgent
    returns: list[float] = field(default_factory=list)
    diverged: bool = False


def train(
    cfg: DdpgConfig,
    xi=None,
    space: ParamSpace = PARAM_SPACE,
    system: Pendulum = dynamics.PENDULUM,
    rng: np.random.Generator | None = None,
    callback=None,
) -> TrainResult:
    """Train one agent.

    With ``cfg.dr_mode == "off"`` the simulator uses the fixed ``xi``; otherwise
    a fresh ``xi ~ U(space)`` is drawn at the start of every episode and, in
    ``"informed"`` mode, appended to the observation.
    The first ``cfg.warmup_steps`` gradient steps update only the critic, so
    the actor never climbs an untrained critic.
    ``callback(episode, agent)`` runs after every episode.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if cfg.dr_mode == "off":
        if xi is None:
            raise ValueError("fixed-parameter training needs xi")
        xi = np.asarray(xi, dtype=np.float64)
    informed = cfg.dr_mode == "informed"
    obs_dim = N_STATE + (N_PARAM if informed else 0)
    agent = DdpgAgent.create(cfg, obs_dim, rng)
    result = TrainResult(agent)
    sigma = cfg.noise_sigma
    updates = 0
    for episode in range(cfg.episodes):
        ep_xi = xi if cfg.dr_mode == "off" else space.sample(rng)
        x = dynamics.sample_initial(rng, cfg.init_mode)
        total = 0.0
        for _ in range(cfg.steps_per_episode):
            obs = _observe(x, ep_xi, informed)
            a = select_action(agent, obs, sigma, rng)
            x_next = system.step(x, a, ep_xi)
            r = dynamics.reward(x, a)
            total += r
            agent.buffer.add(obs, a, _observe(x_next, ep_xi, informed), cfg.reward_scale * r)
            if len(agent.buffer) >= cfg.batch_size:
                batch = agent.buffer.sample(cfg.batch_size, rng)
                critic_update(agent, batch)
                updates += 1
                if updates > cfg.warmup_steps:
                    actor_update(agent, batch)
                soft_update(agent, cfg.tau)
            x = x_next
        result.returns.append(total)
        sigma *= cfg.noise_decay
        if not (agent.actor.is_finite() and agent.critic.is_finite()):
            log.warning("training diverged at episode %d", episode)
            result.diverged = True
            break
        log.debug("episode %d return %.1f", episode, total)
        if callback is not None:
            callback(episode, agent)
    return result
