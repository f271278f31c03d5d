import json

import numpy as np
import pytest

from ssep import serialization
from ssep.cli import main
from ssep.config import ConfigError, ExperimentConfig, config_from_dict, load_config

TINY = {
    "ddpg": {"episodes": 2, "steps_per_episode": 20, "hidden": [4], "batch_size": 4, "buffer_capacity": 64},
    "eval": {"horizon": 30},
    "grid": {"offsets": [0.15, 0.05], "step": 0.9},
}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    return str(path)


@pytest.fixture(autouse=True)
def fixed_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    return serialization.read_heatmap(path)


@pytest.fixture
def bank_path(tmp_path, cfg_path):
    out = tmp_path / "bank"
    assert run("build-bank", "--config", cfg_path, "--out", out) == 0
    return out / "bank.json"


def test_empty_config_reproduces_the_study_defaults():
    cfg = config_from_dict({})
    assert cfg.eval.horizon == 1000 and cfg.eval.threshold == -1500
    assert cfg.points == ((0.1, 1.0), (2.0, 0.0), (2.0, 2.0))
    assert cfg.oco.ftrl_eta == 0.5 and cfg.oco.discounted_eta == 1.0 and cfg.oco.beta == 0.9
    assert cfg.ddpg.actor_lr == 1e-4 and cfg.ddpg.critic_lr == 1e-3 and cfg.ddpg.hidden == (128, 128)
    assert load_config(None).digest() == cfg.digest()


def test_config_errors():
    for bad in ({"ddpg": {"gamma": 2}}, {"bogus": 1}, {"points": [[5.0, 5.0]]}, {"eval": {"horizon": 0}},
                {"ddpg": {"nope": 1}}, {"seed": "x"}):
        with pytest.raises(ConfigError):
            config_from_dict(bad)


def test_digest_is_order_independent_and_field_sensitive():
    a = config_from_dict({"seed": 3, "eval": {"horizon": 10, "threshold": -5.0}})
    b = config_from_dict({"eval": {"threshold": -5.0, "horizon": 10}, "seed": 3})
    c = config_from_dict({"eval": {"threshold": -5.0, "horizon": 11}, "seed": 3})
    assert a.digest() == b.digest() != c.digest()
    assert ExperimentConfig().digest() != config_from_dict({"oco": {"beta": 0.8}}).digest()


def test_train_expert_outputs_and_determinism(tmp_path, cfg_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run("train-expert", "--config", cfg_path, "--point-index", 1, "--out", out) == 0
    for name in ("expert_1.json", "expert_1_returns.csv", "manifest-train-expert-1.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    _, point, _ = serialization.load_policy(outs[0] / "expert_1.json")
    np.testing.assert_array_equal(point, [0.1, 1.0])
    lines = (outs[0] / "expert_1_returns.csv").read_text().splitlines()
    assert lines[1] == "episode,return" and len(lines) == 4


@pytest.mark.parametrize("index", [0, 4])
def test_invalid_point_index_is_a_usage_error(tmp_path, cfg_path, index):
    assert run("train-expert", "--config", cfg_path, "--point-index", index, "--out", tmp_path) == 2


def test_missing_config_and_bad_json(tmp_path):
    assert run("coverage", str(tmp_path / "x.json"), "--config", tmp_path / "nope.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("coverage", "x.json", "--config", bad) == 2


def test_bank_assembled_from_expert_files_matches_build_bank(tmp_path, cfg_path, bank_path):
    files = []
    for j in (1, 2, 3):
        run("train-expert", "--config", cfg_path, "--point-index", j, "--out", tmp_path / "e")
        files.append(tmp_path / "e" / f"expert_{j}.json")
    assert run("build-bank", "--config", cfg_path, "--out", tmp_path / "asm", "--experts", *files) == 0
    a = serialization.load_bank(tmp_path / "asm" / "bank.json")
    b = serialization.load_bank(bank_path)
    for x, y in zip(a.actors, b.actors):
        assert all(p.tobytes() == q.tobytes() for p, q in zip(x.params(), y.params()))


def test_eval_grid_on_bank_and_policy(tmp_path, cfg_path, bank_path):
    out = tmp_path / "eval"
    assert run("eval-grid", bank_path, "--config", cfg_path, "--out", out) == 0
    header, rows = read_csv(out / "heatmap.csv")
    assert header == ["xi1", "xi2", "G", "G_expert_1", "G_expert_2", "G_expert_3", "G_max"]
    assert len(rows) == 3 * 3
    assert [r[:2] for r in rows] == sorted(r[:2] for r in rows)
    for r in rows:
        assert r[-1] == max(r[3:6]) == r[2]


def test_eval_grid_full_default_grid_has_380_rows(tmp_path, bank_path):
    cfg = tmp_path / "full.json"
    cfg.write_text(json.dumps({"eval": {"horizon": 2}}))
    doc = json.loads(bank_path.read_text())
    policy = tmp_path / "p.json"
    policy.write_text(json.dumps({"format": "ssep-policy", "version": 1, "network": doc["experts"][0]["network"]}))
    assert run("eval-grid", policy, "--config", cfg, "--out", tmp_path / "o") == 0
    text = (tmp_path / "o" / "heatmap.csv").read_text().splitlines()
    assert text[1] == "xi1,xi2,G" and len(text) == 2 + 380


def test_singleton_grid_matches_evaluate(tmp_path, bank_path):
    from ssep.expert import EvalSpec, evaluate

    cfg = tmp_path / "one.json"
    cfg.write_text(json.dumps({"grid": {"offsets": [1.0, 1.0], "step": 5.0}, "eval": {"horizon": 40}}))
    assert run("eval-grid", bank_path, "--config", cfg, "--out", tmp_path / "o") == 0
    _, rows = read_csv(tmp_path / "o" / "heatmap.csv")
    bank = serialization.load_bank(bank_path)
    assert len(rows) == 1
    assert rows[0][3] == evaluate(bank.actors[0], (1.0, 1.0), EvalSpec(horizon=40))


def test_malformed_policy_file_is_reported(tmp_path, cfg_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "ssep-policy", "version": 1, "network": {"layer_sizes": [2, 1]}}')
    assert run("eval-grid", bad, "--config", cfg_path, "--out", tmp_path) == 2
    assert "network" in capsys.readouterr().err


@pytest.mark.parametrize("mode", ["blind", "informed"])
def test_ddpg_dr_is_reproducible(tmp_path, cfg_path, mode):
    for out in ("a", "b"):
        assert run("run-ddpg-dr", "--config", cfg_path, "--mode", mode, "--out", tmp_path / out) == 0
    for name in (f"dr_{mode}.json", f"dr_{mode}_heatmap.csv", f"dr_{mode}_returns.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    net, _, meta = serialization.load_policy(tmp_path / "a" / f"dr_{mode}.json")
    assert net.n_in == (4 if mode == "informed" else 2) and meta["dr_mode"] == mode


def test_run_adapt_ftrl_trace(tmp_path, cfg_path, bank_path):
    assert run("run-adapt", bank_path, "--config", cfg_path, "--mode", "ftrl", "--out", tmp_path / "o", "--grid") == 0
    lines = (tmp_path / "o" / "adapt_ftrl_trace.csv").read_text().splitlines()
    assert lines[1] == "t,x1,x2,a,r,w_1,w_2,w_3"
    rows = np.array([[float(c) for c in ln.split(",")] for ln in lines[2:]])
    assert len(rows) == 30
    np.testing.assert_allclose(rows[:, 5:].sum(axis=1), 1.0, atol=1e-12)
    summary = json.loads((tmp_path / "o" / "adapt_ftrl_summary.json").read_text())
    assert summary["regret"] >= -1e-9
    assert summary["total_return"] == pytest.approx(rows[:, 4].sum())
    assert (tmp_path / "o" / "adapt_ftrl_heatmap.csv").exists()


def test_run_adapt_discounted_over_the_schedule(tmp_path, cfg_path, bank_path):
    assert run("run-adapt", bank_path, "--config", cfg_path, "--mode", "discounted", "--out", tmp_path) == 0
    lines = (tmp_path / "adapt_discounted_trace.csv").read_text().splitlines()[2:]
    rows = np.array([[float(c) for c in ln.split(",")] for ln in lines])
    assert rows[0, 0] == 1 and rows[-1, 0] == 500
    for t in (1, 101, 201):
        np.testing.assert_array_equal(rows[t - 1, 1:3], [np.pi, 0.0])
    summary = json.loads((tmp_path / "adapt_discounted_summary.json").read_text())
    assert len(summary["segment_returns"]) == 3


def test_zero_step_adaptation(tmp_path, cfg_path, bank_path):
    assert run("run-adapt", bank_path, "--config", cfg_path, "--steps", 0, "--out", tmp_path) == 0
    assert len((tmp_path / "adapt_ftrl_trace.csv").read_text().splitlines()) == 2
    assert json.loads((tmp_path / "adapt_ftrl_summary.json").read_text())["regret"] == 0.0
    assert run("run-adapt", bank_path, "--config", cfg_path, "--steps", 10_000, "--out", tmp_path) == 2


def test_coverage_report(tmp_path, cfg_path, bank_path):
    assert run("coverage", bank_path, "--config", cfg_path, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "coverage.json").read_text())
    assert len(doc["points"]) == 9
    assert all(p["best_expert"] in (1, 2, 3) for p in doc["points"])
    assert doc["covered"] == (not doc["uncovered"])


def test_empty_bank_is_rejected(tmp_path, cfg_path):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"format": "ssep-bank", "version": 1, "M": 0, "experts": []}))
    assert run("coverage", path, "--config", cfg_path, "--out", tmp_path) == 2


def test_manifest_records_digest_and_files(tmp_path, cfg_path, bank_path):
    manifest = json.loads((bank_path.parent / "manifest-build-bank.json").read_text())
    assert manifest["config_digest"] == load_config(cfg_path).digest()
    assert "bank.json" in manifest["files"]
    assert manifest["started"] == "2023-11-14T22:13:20Z"
