"""Online soft switching between experts.

The adaptive action is a convex combination of the experts' actions. The
weights are a similarity estimate: each representative model predicts the
next state, the squared prediction error of the mixed model is the online
loss, and (discounted) follow-the-regularised-leader with an entropic
regulariser turns the accumulated loss gradients into weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .dynamics import PENDULUM, ParamSchedule, Pendulum
from .expert import ExpertBank

SIMPLEX_TOL = 1e-12


def simplex_weights(w) -> np.ndarray:
    """Validate and renormalise a weight vector onto the probability simplex."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"weights must be finite and nonnegative, got {w}")
    s = w.sum()
    if s <= 0:
        raise ValueError("weights sum to zero")
    return w / s


def uniform_weights(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def adaptive_action(bank: ExpertBank, w, x) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if len(w) != len(bank):
        raise ValueError(f"{len(w)} weights for {len(bank)} experts")
    return w @ bank.actions(x)


def prediction_matrix(x, a, points, system: Pendulum = PENDULUM) -> np.ndarray:
    """(n_state, M) matrix whose column j is the next state predicted by model j."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    xs = np.broadcast_to(x, (len(points), len(x)))
    a = np.broadcast_to(np.asarray(a, dtype=np.float64).reshape(-1)[0], len(points))
    return system.step_batch(xs, a, points).T


def loss(w, F, x_next) -> float:
    r = np.asarray(x_next) - F @ w
    return float(r @ r)


def loss_gradient(w, F, x_next) -> np.ndarray:
    return -2.0 * F.T @ (np.asarray(x_next) - F @ w)


@dataclass
class OcoState:
    """Discounted running sum of loss gradients; ``beta=1`` is plain FTRL."""

    cumulative_gradient: np.ndarray
    eta: float = 0.5
    beta: float = 1.0
    update_period: int = 5
    gradient_log: list[np.ndarray] | None = None

    def __post_init__(self):
        self.cumulative_gradient = np.asarray(self.cumulative_gradient, dtype=np.float64).copy()
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.update_period < 1:
            raise ValueError("update_period must be >= 1")

    @classmethod
    def zeros(cls, m: int, **kwargs) -> "OcoState":
        return cls(np.zeros(m), **kwargs)


def ftrl_weights(state: OcoState) -> np.ndarray:
    """Closed-form minimiser of ``<G, w> + (1/eta) * sum(w log w - w)`` over the simplex."""
    z = -state.eta * state.cumulative_gradient
    if not np.all(np.isfinite(z)):
        raise ValueError("cumulative gradient is not finite")
    z = np.exp(z - z.max())
    return z / z.sum()


def accumulate(state: OcoState, gradient) -> OcoState:
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.cumulative_gradient.shape:
        raise ValueError(f"gradient shape {g.shape} != {state.cumulative_gradient.shape}")
    state.cumulative_gradient = state.beta * state.cumulative_gradient + g
    if state.gradient_log is not None:
        state.gradient_log.append(g.copy())
    return state


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def quadratic_terms(losses):
    """Sum the per-step losses ``|x' - F w|^2`` into ``w'Aw - 2 b'w + c``."""
    losses = list(losses)
    m = losses[0][0].shape[1]
    A, b, c = np.zeros((m, m)), np.zeros(m), 0.0
    for F, x_next in losses:
        x_next = np.asarray(x_next, dtype=np.float64)
        A += F.T @ F
        b += F.T @ x_next
        c += float(x_next @ x_next)
    return A, b, c


def minimize_quadratic_on_simplex(A, b, tol=1e-10, max_iter=200_000):
    """Projected gradient descent for ``min_w w'Aw - 2 b'w`` on the simplex.

    Stops when the projected-gradient step moves less than ``tol``.
    """
    m = len(b)
    lipschitz = 2.0 * max(np.linalg.eigvalsh(A).max(), 1e-300)
    step = 1.0 / lipschitz
    w = uniform_weights(m)
    for _ in range(max_iter):
        grad = 2.0 * (A @ w - b)
        w_new = project_simplex(w - step * grad)
        if np.max(np.abs(w_new - w)) < tol * step * lipschitz:
            return w_new
        w = w_new
    return w


def hindsight_minimum(losses) -> tuple[np.ndarray, float]:
    """Best fixed weight vector for a sequence of ``(F, x_next)`` losses, and its total loss."""
    A, b, c = quadratic_terms(losses)
    w = minimize_quadratic_on_simplex(A, b)
    return w, float(w @ A @ w - 2.0 * b @ w + c)


def static_regret(losses, played) -> float:
    losses, played = list(losses), list(played)
    if len(losses) != len(played):
        raise ValueError("one played weight vector per loss is required")
    if not losses:
        return 0.0
    incurred = sum(loss(w, F, xn) for (F, xn), w in zip(losses, played))
    return incurred - hindsight_minimum(losses)[1]


@dataclass
class AdaptationTrace:
    t: np.ndarray
    x: np.ndarray
    a: np.ndarray
    x_next: np.ndarray
    r: np.ndarray
    w: np.ndarray  # weights used for the action at each step
    F: np.ndarray  # (T, n_state, M) model predictions
    updates: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    @property
    def total_return(self) -> float:
        return float(self.r.sum())

    def losses(self, upto: int | None = None):
        n = len(self) if upto is None else upto
        return [(self.F[i], self.x_next[i]) for i in range(n)]

    def regret(self, upto: int | None = None) -> float:
        n = len(self) if upto is None else upto
        return static_regret(self.losses(n), self.w[:n])

    def segment_returns(self, schedule: ParamSchedule) -> list[float]:
        out = []
        for seg in schedule.segments:
            mask = (self.t >= seg.start) & (self.t <= seg.end)
            out.append(float(self.r[mask].sum()))
        return out


def run_adaptation(
    schedule: ParamSchedule,
    bank: ExpertBank,
    oco: OcoState,
    total_steps: int | None = None,
    x1=dynamics.X_TILDE,
    system: Pendulum = PENDULUM,
    reset_state=dynamics.X_TILDE,
    warmup_steps: int = 0,
    excitation: float = 0.0,
    rng: np.random.Generator | None = None,
) -> AdaptationTrace:
    """Control the scheduled "real" system with the adaptive policy.

    Gradients are accumulated at every step using the weights that produced
    the action; the weights are recomputed every ``oco.update_period`` steps.
    During the first ``warmup_steps`` the actions are uniform random, and
    ``excitation`` adds Gaussian noise of that scale to every later action
    (both clipped to [-1, 1]); these only serve identification experiments.
    """
    total_steps = schedule.horizon if total_steps is None else int(total_steps)
    if total_steps < 0:
        raise ValueError("total_steps must be nonnegative")
    if total_steps > schedule.horizon:
        raise ValueError(f"{total_steps} steps exceed the schedule horizon {schedule.horizon}")
    if len(oco.cumulative_gradient) != len(bank):
        raise ValueError("OCO state and bank sizes differ")
    if (warmup_steps or excitation) and rng is None:
        raise ValueError("random excitation needs an rng")
    m = len(bank)
    points = np.stack(bank.points)
    w = ftrl_weights(oco)
    x = np.array(x1, dtype=np.float64)
    rec = {k: [] for k in ("t", "x", "a", "x_next", "r", "w", "F")}
    updates = []
    for t in range(1, total_steps + 1):
        xi, reset = dynamics.params_at(schedule, t)
        if reset and t > 1:
            x = np.array(reset_state, dtype=np.float64)
        if t <= warmup_steps:
            a = rng.uniform(-1.0, 1.0, size=dynamics.N_ACTION)
        else:
            a = adaptive_action(bank, w, x)
            if excitation > 0:
                a = np.clip(a + rng.normal(0.0, excitation, size=a.shape), -1.0, 1.0)
        a = np.clip(a, -1.0, 1.0)
        x_next = system.step(x, a, xi)
        F = prediction_matrix(x, a, points, system)
        accumulate(oco, loss_gradient(w, F, x_next))
        for key, val in zip(rec, (t, x, a[0], x_next, dynamics.reward(x, a), w, F)):
            rec[key].append(val)
        if t % oco.update_period == 0:
            w = ftrl_weights(oco)
            updates.append({"t": t, "loss": loss(rec["w"][-1], F, x_next), "w": w})
        x = x_next
    if total_steps == 0:
        return AdaptationTrace(
            np.zeros(0, dtype=int), np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)),
            np.zeros(0), np.zeros((0, m)), np.zeros((0, 2, m)), [],
        )
    return AdaptationTrace(
        np.array(rec["t"]), np.array(rec["x"]), np.array(rec["a"]), np.array(rec["x_next"]),
        np.array(rec["r"]), np.array(rec["w"]), np.array(rec["F"]), updates,
    )


def regret_ratio(regret: float, horizon: int, m: int) -> float:
    return regret / math.sqrt(horizon * math.log(m))


def evaluate_adaptive(bank: ExpertBank, xi, spec, oco: OcoState, system: Pendulum = PENDULUM) -> float:
    """Return of the adaptive policy on a fixed system, starting from uniform weights."""
    schedule = ParamSchedule.constant(xi, spec.horizon)
    return run_adaptation(schedule, bank, oco, spec.horizon, x1=spec.x_tilde, system=system).total_return
