"""Experiment configuration. Every default reproduces the pendulum study, so
an empty JSON object ``{}`` is a valid config."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .ddpg import DdpgConfig
from .dynamics import DEFAULT_SCHEDULE, ParamSchedule, ParamSpace, Pendulum, Segment
from .expert import EvalSpec


class ConfigError(ValueError):
    pass


@dataclass
class GridSpec:
    offsets: tuple[float, ...] = (0.15, 0.05)
    step: float = 0.1


@dataclass
class OcoConfig:
    ftrl_eta: float = 0.5
    discounted_eta: float = 1.0
    beta: float = 0.9
    update_period: int = 5
    fixed_xi: tuple[float, ...] = (1.0, 1.0)


@dataclass
class ExperimentConfig:
    system: Pendulum = field(default_factory=Pendulum)
    space: ParamSpace = field(default_factory=lambda: ParamSpace((0.1, 0.0), (2.0, 2.0)))
    grid: GridSpec = field(default_factory=GridSpec)
    eval: EvalSpec = field(default_factory=EvalSpec)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)
    points: tuple[tuple[float, ...], ...] = ((0.1, 1.0), (2.0, 0.0), (2.0, 2.0))
    oco: OcoConfig = field(default_factory=OcoConfig)
    schedule: ParamSchedule = DEFAULT_SCHEDULE
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "system": asdict(self.system),
            "space": {"lower": list(self.space.lower), "upper": list(self.space.upper)},
            "grid": {"offsets": list(self.grid.offsets), "step": self.grid.step},
            "eval": {
                "x_tilde": list(self.eval.x_tilde),
                "horizon": self.eval.horizon,
                "threshold": self.eval.threshold,
            },
            "ddpg": self.ddpg.to_dict(),
            "points": [list(p) for p in self.points],
            "oco": {**asdict(self.oco), "fixed_xi": list(self.oco.fixed_xi)},
            "schedule": [
                {"start": s.start, "end": s.end, "xi": list(s.xi), "reset": s.reset}
                for s in self.schedule.segments
            ],
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def ddpg_for_run(self) -> DdpgConfig:
        from dataclasses import replace

        return replace(self.ddpg, seed=self.seed)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        kwargs[k] = tuple(v) if isinstance(v, list) else v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    unknown = set(data) - {f.name for f in fields(ExperimentConfig)}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    cfg = ExperimentConfig()
    for key, cls in (("system", Pendulum), ("grid", GridSpec), ("eval", EvalSpec),
                     ("ddpg", DdpgConfig), ("oco", OcoConfig)):
        if key in data:
            # merge onto defaults so partial sections are allowed
            if not isinstance(data[key], dict):
                raise ConfigError(f"{key}: expected an object")
            base = getattr(cfg, key)
            base_dict = base.to_dict() if hasattr(base, "to_dict") else asdict(base)
            base_dict.update(data[key])
            setattr(cfg, key, _build(cls, base_dict, key))
    if "space" in data:
        sp = data["space"]
        try:
            cfg.space = ParamSpace(tuple(sp["lower"]), tuple(sp["upper"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"space: {exc}") from exc
    if "points" in data:
        pts = data["points"]
        if not isinstance(pts, list) or not pts:
            raise ConfigError("points: expected a non-empty list")
        cfg.points = tuple(tuple(float(v) for v in p) for p in pts)
    if "schedule" in data:
        try:
            cfg.schedule = ParamSchedule(tuple(
                Segment(int(s["start"]), int(s["end"]), tuple(float(v) for v in s["xi"]),
                        bool(s.get("reset", True)))
                for s in data["schedule"]
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"schedule: {exc}") from exc
    if "seed" in data:
        if not isinstance(data["seed"], int):
            raise ConfigError("seed must be an integer")
        cfg.seed = data["seed"]
    for i, p in enumerate(cfg.points):
        if len(p) != cfg.space.dim or not cfg.space.contains(np.array(p)):
            raise ConfigError(f"points[{i}]={list(p)} is outside the parameter space")
    return cfg


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)
