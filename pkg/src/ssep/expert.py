"""Expert policy banks: training, evaluation over parameter grids, coverage."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics
from .ddpg import DdpgConfig, train
from .dynamics import PENDULUM, Pendulum
from .nn import DenseNet, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalSpec:
    x_tilde: tuple[float, float] = dynamics.X_TILDE
    horizon: int = 1000
    threshold: float = -1500.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("evaluation horizon must be >= 1")


def policy_action(policy, x, xi) -> np.ndarray:
    """Greedy action of ``policy`` at state ``x``.

    A network whose input is wider than the state receives ``[x; xi]`` (a
    parameter-informed policy); a plain callable receives ``x`` only.
    """
    if isinstance(policy, DenseNet):
        inp = np.concatenate([x, xi]) if policy.n_in > len(x) else x
        return forward(policy, inp)[0]
    return np.asarray(policy(x), dtype=np.float64).reshape(dynamics.N_ACTION)


def evaluate(policy, xi, spec: EvalSpec = EvalSpec(), system: Pendulum = PENDULUM) -> float:
    """Undiscounted noiseless return over ``spec.horizon`` steps from ``spec.x_tilde``.

    Returns ``-inf`` if the trajectory leaves the finite reals.
    """
    xi = np.asarray(xi, dtype=np.float64)
    x = np.array(spec.x_tilde, dtype=np.float64)
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(spec.horizon):
            a = policy_action(policy, x, xi)
            total += dynamics.reward(x, a)
            x = system.step_batch(x[None, :], a, xi)[0]
            if not (np.all(np.isfinite(x)) and math.isfinite(total)):
                log.warning("non-finite trajectory for xi=%s", xi.tolist())
                return -math.inf
    return total


def eval_grid(policy, grid, spec: EvalSpec = EvalSpec(), system: Pendulum = PENDULUM):
    if len(grid) == 0:
        raise ValueError("grid is empty")
    return [(np.asarray(xi, dtype=np.float64), evaluate(policy, xi, spec, system)) for xi in grid]


@dataclass
class ExpertBank:
    """Representative points with one state-feedback expert each.

    Experts are normally networks; plain callables ``x -> action`` are also
    accepted (handy for hand-made controllers), but only networks serialise.
    """

    points: list[np.ndarray]
    actors: list
    metadata: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.points = [np.asarray(p, dtype=np.float64) for p in self.points]
        if not self.points:
            raise ValueError("an expert bank needs at least one expert")
        if len(self.points) != len(self.actors):
            raise ValueError("one actor per representative point is required")
        if not self.metadata:
            self.metadata = [{} for _ in self.points]
        keys = {tuple(p.tolist()) for p in self.points}
        if len(keys) != len(self.points):
            raise ValueError("representative points must be distinct")
        shapes = {(a.n_in, a.n_out) for a in self.actors if isinstance(a, DenseNet)}
        if len(shapes) > 1:
            raise ValueError(f"experts disagree on input/output widths: {shapes}")

    def __len__(self):
        return len(self.points)

    def actions(self, x) -> np.ndarray:
        """Stack of every expert's action at ``x``: shape (M, n_action)."""
        return np.stack([policy_action(actor, x, None) for actor in self.actors])

    def add(self, point, actor, metadata=None) -> "ExpertBank":
        return ExpertBank(
            [*self.points, point], [*self.actors, actor], [*self.metadata, metadata or {}]
        )


@dataclass
class CoverageReport:
    covered: bool
    uncovered: list[np.ndarray]
    scores: np.ndarray  # (n_grid, M)
    best_expert: np.ndarray  # 0-based index per grid point

    @property
    def best_score(self) -> np.ndarray:
        return self.scores.max(axis=1) if self.scores.size else np.zeros(0)

    @property
    def fraction_covered(self) -> float:
        n = len(self.scores)
        return 1.0 if n == 0 else 1.0 - len(self.uncovered) / n


def score_matrix(bank: ExpertBank, grid, spec: EvalSpec = EvalSpec(), system: Pendulum = PENDULUM):
    scores = np.zeros((len(grid), len(bank)))
    for j, actor in enumerate(bank.actors):
        for i, xi in enumerate(grid):
            scores[i, j] = evaluate(actor, xi, spec, system)
    return scores


def coverage_check(bank: ExpertBank, grid, spec: EvalSpec = EvalSpec(), system: Pendulum = PENDULUM,
                   scores=None) -> CoverageReport:
    """A grid point is covered when its best expert reaches ``spec.threshold``.

    Precomputed ``scores`` of shape (len(grid), M) may be passed to skip evaluation.
    """
    if scores is None:
        scores = score_matrix(bank, grid, spec, system)
    if len(grid) == 0:
        return CoverageReport(True, [], np.zeros((0, len(bank))), np.zeros(0, dtype=int))
    best = scores.max(axis=1)
    uncovered = [np.asarray(grid[i], dtype=np.float64) for i in np.flatnonzero(best < spec.threshold)]
    return CoverageReport(not uncovered, uncovered, scores, scores.argmax(axis=1))


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def train_expert(point, cfg: DdpgConfig, system: Pendulum = PENDULUM):
    """Train one fixed-parameter expert; returns the :class:`~ssep.ddpg.TrainResult`."""
    return train(replace(cfg, dr_mode="off"), xi=point, system=system)


def expert_seeds(base_seed: int, n: int) -> list[int]:
    """Independent per-expert seeds derived from a single base seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(base_seed).spawn(n)]


def build_bank(points, cfg: DdpgConfig, system: Pendulum = PENDULUM, seeds=None):
    """Train one expert per point. Diverged experts are dropped with a warning.

    Returns ``(bank, failed_indices, training_returns)``.
    """
    points = [np.asarray(p, dtype=np.float64) for p in points]
    if len({tuple(p.tolist()) for p in points}) != len(points):
        raise ValueError("representative points must be distinct")
    seeds = expert_seeds(cfg.seed, len(points)) if seeds is None else list(seeds)
    kept_points, actors, meta, failed, curves = [], [], [], [], []
    for j, (p, seed) in enumerate(zip(points, seeds)):
        run_cfg = replace(cfg, seed=seed, dr_mode="off")
        result = train_expert(p, run_cfg, system)
        curves.append(result.returns)
        if result.diverged:
            log.warning("expert %d at xi=%s diverged; excluded from the bank", j, p.tolist())
            failed.append(j)
            continue
        kept_points.append(p)
        actors.append(result.agent.actor)
        meta.append({"seed": seed, "config_digest": config_digest(run_cfg.to_dict())})
    if not actors:
        raise RuntimeError("every expert diverged")
    return ExpertBank(kept_points, actors, meta), failed, curves
