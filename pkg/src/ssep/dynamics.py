"""Parametric pendulum model, reward, parameter grids and schedules.

State is ``[angle, angular velocity]`` with the angle measured from the
upright target, so ``[0, 0]`` is the (unstable) goal and ``[pi, 0]`` the
hanging rest position. Angles are never wrapped.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

N_STATE = 2
N_ACTION = 1
N_PARAM = 2


class DomainError(ValueError):
    """Raised when a state, action or parameter is outside its domain."""


@dataclass(frozen=True)
class Pendulum:
    """Euler-discretised pendulum; the constants are overridable."""

    g: float = 9.81
    dt: float = 0.05
    length: float = 1.0
    gain: float = 10.0

    def step(self, x, a, xi):
        return step(x, a, xi, self)

    def step_batch(self, x, a, xi):
        """Vectorised step: ``x`` (B, 2), ``a`` (B,) or (B, 1), ``xi`` (B, 2) or (2,)."""
        x = np.asarray(x, dtype=np.float64)
        a = np.asarray(a, dtype=np.float64).reshape(len(x))
        xi = np.broadcast_to(np.asarray(xi, dtype=np.float64), x.shape)
        inertia = xi[:, 0] * self.length**2
        x1, x2 = x[:, 0], x[:, 1]
        acc = self.g / self.length * np.sin(x1) - xi[:, 1] * x2 / inertia + self.gain * a / inertia
        return np.stack([x1 + self.dt * x2, x2 + self.dt * acc], axis=1)


PENDULUM = Pendulum()


@dataclass(frozen=True)
class ParamSpace:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper bounds differ in length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"empty box {self.lower} .. {self.upper}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, xi, tol=1e-12) -> bool:
        xi = np.asarray(xi, dtype=np.float64)
        return bool(
            np.all(xi >= np.asarray(self.lower) - tol) and np.all(xi <= np.asarray(self.upper) + tol)
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


#: Default parameter box: mass-like coefficient in [0.1, 2], friction in [0, 2].
PARAM_SPACE = ParamSpace((0.1, 0.0), (2.0, 2.0))
GRID_OFFSETS = (0.15, 0.05)
GRID_STEP = 0.1


def _check_finite(name, v):
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} must be finite, got {v!r}")


def step(x, a, xi, system: Pendulum = PENDULUM) -> np.ndarray:
    """Advance the pendulum one step under torque command ``a`` in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    a = float(np.asarray(a, dtype=np.float64).reshape(-1)[0])
    xi = np.asarray(xi, dtype=np.float64)
    _check_finite("state", x)
    _check_finite("action", a)
    _check_finite("parameters", xi)
    if not -1.0 <= a <= 1.0:
        raise DomainError(f"action {a} outside [-1, 1]")
    if xi[0] <= 0.0:
        raise DomainError(f"mass-like parameter must be positive, got {xi[0]}")
    inertia = xi[0] * system.length**2
    acc = system.g / system.length * np.sin(x[0]) - xi[1] * x[1] / inertia + system.gain * a / inertia
    return np.array([x[0] + system.dt * x[1], x[1] + system.dt * acc])


def reward(x, a) -> float:
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    return float(-x[0] ** 2 - 0.1 * x[1] ** 2 - 10.0 * a[0] ** 2)


def reward_batch(x, a) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64).reshape(len(x))
    return -x[:, 0] ** 2 - 0.1 * x[:, 1] ** 2 - 10.0 * a**2


def param_grid(space: ParamSpace = PARAM_SPACE, offsets=GRID_OFFSETS, step=GRID_STEP) -> list[np.ndarray]:
    """Cartesian grid ``offset_i + k*step`` clipped to the box, sorted lexicographically.

    >>> len(param_grid())
    380
    """
    if step <= 0:
        raise ValueError("grid step must be positive")
    offsets = tuple(offsets)
    if len(offsets) != space.dim:
        raise ValueError("one offset per dimension is required")
    axes = []
    for lo, hi, off in zip(space.lower, space.upper, offsets):
        if not lo - 1e-12 <= off <= hi + 1e-12:
            raise ValueError(f"offset {off} outside [{lo}, {hi}]")
        n = int(np.floor((hi - off) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError("empty grid axis")
        # round away accumulated float noise so 0.15 + 3*0.1 == 0.45 prints as 0.45
        axes.append(np.round(off + step * np.arange(n), 12))
    return [np.array(p) for p in itertools.product(*axes)]


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    xi: tuple[float, ...]
    reset: bool = True


@dataclass(frozen=True)
class ParamSchedule:
    """Piecewise-constant parameters over inclusive, 1-based step ranges."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        expected = 1
        for seg in self.segments:
            if seg.start != expected or seg.end < seg.start:
                raise ValueError(f"segments must be contiguous from step 1; bad segment {seg}")
            expected = seg.end + 1

    @property
    def horizon(self) -> int:
        return self.segments[-1].end

    @classmethod
    def constant(cls, xi, horizon: int) -> "ParamSchedule":
        return cls((Segment(1, int(horizon), tuple(float(v) for v in xi), True),))


#: Abrupt parameter changes at steps 101 and 201 with a state reset each time.
DEFAULT_SCHEDULE = ParamSchedule(
    (
        Segment(1, 100, (1.2, 0.0), True),
        Segment(101, 200, (0.2, 1.0), True),
        Segment(201, 500, (1.8, 2.0), True),
    )
)


def params_at(schedule: ParamSchedule, t: int) -> tuple[np.ndarray, bool]:
    for seg in schedule.segments:
        if seg.start <= t <= seg.end:
            return np.array(seg.xi), (t == seg.start and seg.reset)
    raise ValueError(f"step {t} outside schedule horizon 1..{schedule.horizon}")


X_TILDE = (np.pi, 0.0)


def sample_initial(rng: np.random.Generator, mode="uniform", value=X_TILDE, angle_range=(-np.pi, np.pi)):
    """Initial state: ``mode="fixed"`` returns ``value``; ``"uniform"`` draws the angle."""
    if mode == "fixed":
        return np.array(value, dtype=np.float64)
    if mode == "uniform":
        lo, hi = angle_range
        if lo > hi:
            raise ValueError(f"empty angle range {angle_range}")
        return np.array([rng.uniform(lo, hi) if hi > lo else float(lo), 0.0])
    raise ValueError(f"unknown initial-state mode {mode!r}")
