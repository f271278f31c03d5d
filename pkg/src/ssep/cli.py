"""Command-line front end: ``ssep <command> [--config PATH] [--seed N] [--out DIR]``.

Exit status is 0 on success, 1 on runtime failure (e.g. diverged training)
and 2 on usage, config or input-file errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, adapt, dynamics, expert, serialization
from .config import ConfigError, ExperimentConfig, load_config
from .ddpg import train
from .serialization import FormatError, write_text

log = logging.getLogger("ssep")


class UsageError(Exception):
    pass


class RunFailure(Exception):
    pass


def _grid(cfg: ExperimentConfig):
    return dynamics.param_grid(cfg.space, cfg.grid.offsets, cfg.grid.step)


def _timestamp() -> str:
    # honour SOURCE_DATE_EPOCH so manifests are reproducible too
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = _dt.datetime.fromtimestamp(int(epoch) if epoch else _dt.datetime.now().timestamp(),
                                      tz=_dt.timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


class Outputs:
    """Collects written files and emits a run manifest."""

    def __init__(self, out_dir, command, cfg: ExperimentConfig):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg = cfg
        self.files: list[str] = []
        self.started = _timestamp()

    def write(self, name, text):
        write_text(self.dir / name, text)
        self.files.append(name)
        return self.dir / name

    def close(self):
        manifest = {
            "command": self.command,
            "config_digest": self.cfg.digest(),
            "tool_version": __version__,
            "started": self.started,
            "finished": _timestamp(),
            "files": sorted(self.files),
        }
        write_text(self.dir / f"manifest-{self.command}.json", serialization.json_document(manifest))


def _point(cfg, index):
    if index is None or not 1 <= index <= len(cfg.points):
        raise UsageError(f"--point-index must be in 1..{len(cfg.points)}, got {index}")
    return np.array(cfg.points[index - 1])


def cmd_train_expert(cfg, args):
    j = args.point_index
    point = _point(cfg, j)
    seeds = expert.expert_seeds(cfg.seed, len(cfg.points))
    run_cfg = replace(cfg.ddpg, seed=seeds[j - 1], dr_mode="off")
    result = expert.train_expert(point, run_cfg, cfg.system)
    out = Outputs(args.out, f"train-expert-{j}", cfg)
    out.write(f"expert_{j}_returns.csv", serialization.returns_csv(result.returns))
    if result.diverged:
        out.close()
        raise RunFailure(f"expert {j} diverged during training")
    meta = {"seed": run_cfg.seed, "config_digest": expert.config_digest(run_cfg.to_dict())}
    out.write(f"expert_{j}.json", serialization.policy_document(result.agent.actor, point, meta))
    score = expert.evaluate(result.agent.actor, point, cfg.eval, cfg.system)
    log.info("expert %d at %s: G=%.1f", j, point.tolist(), score)
    out.close()


def cmd_build_bank(cfg, args):
    out = Outputs(args.out, "build-bank", cfg)
    if args.experts:
        loaded = [serialization.load_policy(p) for p in args.experts]
        if any(pt is None for _, pt, _ in loaded):
            raise UsageError("every expert file must carry its representative point")
        bank = expert.ExpertBank([pt for _, pt, _ in loaded], [n for n, _, _ in loaded],
                                 [m for _, _, m in loaded])
    else:
        bank, failed, curves = expert.build_bank(cfg.points, cfg.ddpg_for_run(), cfg.system)
        for j, curve in enumerate(curves):
            out.write(f"expert_{j + 1}_returns.csv", serialization.returns_csv(curve))
        if failed:
            log.warning("experts %s diverged and were excluded", [j + 1 for j in failed])
    out.write("bank.json", serialization.bank_document(bank))
    out.close()


def cmd_eval_grid(cfg, args):
    kind, obj = serialization.load_any(args.policy)
    grid = _grid(cfg)
    if kind == "bank":
        scores = expert.score_matrix(obj, grid, cfg.eval, cfg.system)
        rows = [(xi, s.max(), s) for xi, s in zip(grid, scores)]
        text = serialization.heatmap_csv(rows, len(obj))
    else:
        rows = expert.eval_grid(obj[0], grid, cfg.eval, cfg.system)
        text = serialization.heatmap_csv(rows)
    out = Outputs(args.out, "eval-grid", cfg)
    out.write(args.name or "heatmap.csv", text)
    out.close()


def cmd_run_ddpg_dr(cfg, args):
    mode = args.mode or "blind"
    if mode not in ("blind", "informed"):
        raise UsageError("--mode must be 'blind' or 'informed'")
    run_cfg = replace(cfg.ddpg_for_run(), dr_mode=mode)
    result = train(run_cfg, space=cfg.space, system=cfg.system)
    out = Outputs(args.out, f"run-ddpg-dr-{mode}", cfg)
    out.write(f"dr_{mode}_returns.csv", serialization.returns_csv(result.returns))
    if result.diverged:
        out.close()
        raise RunFailure("domain-randomised training diverged")
    actor = result.agent.actor
    out.write(f"dr_{mode}.json", serialization.policy_document(actor, metadata={"dr_mode": mode}))
    rows = expert.eval_grid(actor, _grid(cfg), cfg.eval, cfg.system)
    out.write(f"dr_{mode}_heatmap.csv", serialization.heatmap_csv(rows))
    out.close()


def _oco_state(cfg, mode, m):
    if mode == "ftrl":
        return adapt.OcoState.zeros(m, eta=cfg.oco.ftrl_eta, beta=1.0, update_period=cfg.oco.update_period)
    return adapt.OcoState.zeros(m, eta=cfg.oco.discounted_eta, beta=cfg.oco.beta,
                                update_period=cfg.oco.update_period)


def cmd_run_adapt(cfg, args):
    mode = args.mode or "ftrl"
    if mode not in ("ftrl", "discounted"):
        raise UsageError("--mode must be 'ftrl' or 'discounted'")
    bank = serialization.load_bank(args.bank)
    if mode == "ftrl":
        schedule = dynamics.ParamSchedule.constant(cfg.oco.fixed_xi, cfg.eval.horizon)
    else:
        schedule = cfg.schedule
    steps = schedule.horizon if args.steps is None else args.steps
    if not 0 <= steps <= schedule.horizon:
        raise UsageError(f"--steps must be in 0..{schedule.horizon}")
    trace = adapt.run_adaptation(schedule, bank, _oco_state(cfg, mode, len(bank)), steps,
                                 x1=cfg.eval.x_tilde, system=cfg.system, reset_state=cfg.eval.x_tilde)
    summary = {
        "mode": mode,
        "steps": steps,
        "total_return": trace.total_return,
        "regret": trace.regret(),
        "segment_returns": trace.segment_returns(schedule) if steps else [],
        "final_w": trace.w[-1].tolist() if steps else adapt.uniform_weights(len(bank)).tolist(),
        "config_digest": cfg.digest(),
    }
    out = Outputs(args.out, f"run-adapt-{mode}", cfg)
    out.write(f"adapt_{mode}_trace.csv", serialization.trace_csv(trace))
    out.write(f"adapt_{mode}_summary.json", serialization.json_document(summary))
    if args.grid:
        rows = [(xi, adapt.evaluate_adaptive(bank, xi, cfg.eval, _oco_state(cfg, mode, len(bank)),
                                             cfg.system)) for xi in _grid(cfg)]
        out.write(f"adapt_{mode}_heatmap.csv", serialization.heatmap_csv(rows))
    out.close()


def cmd_coverage(cfg, args):
    bank = serialization.load_bank(args.bank)
    grid = _grid(cfg)
    report = expert.coverage_check(bank, grid, cfg.eval, cfg.system)
    doc = {
        "covered": report.covered,
        "fraction_covered": report.fraction_covered,
        "threshold": cfg.eval.threshold,
        "uncovered": [p.tolist() for p in report.uncovered],
        "points": [
            {"xi": np.asarray(xi).tolist(), "best_expert": int(b) + 1, "G_best": float(g)}
            for xi, b, g in zip(grid, report.best_expert, report.best_score)
        ],
        "config_digest": cfg.digest(),
    }
    out = Outputs(args.out, "coverage", cfg)
    out.write("coverage.json", serialization.json_document(doc))
    out.close()


COMMANDS = {
    "train-expert": cmd_train_expert,
    "build-bank": cmd_build_bank,
    "eval-grid": cmd_eval_grid,
    "run-ddpg-dr": cmd_run_ddpg_dr,
    "run-adapt": cmd_run_adapt,
    "coverage": cmd_coverage,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config (defaults reproduce the pendulum study)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    p = common(sub.add_parser("train-expert", help="train one expert on a representative point"))
    p.add_argument("--point-index", type=int, required=True, help="1-based representative point index")
    p = common(sub.add_parser("build-bank", help="train all experts (or assemble expert files) into a bank"))
    p.add_argument("--experts", nargs="*", help="expert policy files to assemble instead of training")
    p = common(sub.add_parser("eval-grid", help="evaluate a policy or bank over the parameter grid"))
    p.add_argument("policy", help="policy or bank file")
    p.add_argument("--name", help="output CSV name (default heatmap.csv)")
    p = common(sub.add_parser("run-ddpg-dr", help="train and evaluate a domain-randomised baseline"))
    p.add_argument("--mode", choices=("blind", "informed"), default="blind")
    p = common(sub.add_parser("run-adapt", help="run the adaptive policy on the real system"))
    p.add_argument("bank", help="bank file")
    p.add_argument("--mode", choices=("ftrl", "discounted"), default="ftrl")
    p.add_argument("--steps", type=int, help="number of control steps (default: full horizon)")
    p.add_argument("--grid", action="store_true", help="also write an adaptive-policy heatmap")
    p = common(sub.add_parser("coverage", help="coverage report of a bank over the grid"))
    p.add_argument("bank", help="bank file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError, FormatError, OSError) as exc:
        print(f"ssep {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RunFailure as exc:
        print(f"ssep {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
