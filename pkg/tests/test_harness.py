import csv
import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lectr import harness, policyio
from lectr.config import ConfigError, ExperimentConfig, load
from lectr.envs import RepeatedGame, hallway, room
from lectr.qlearn import TabularQ, make_learner

OPT = sum(0.95 ** t for t in range(5))


def small(**over):
    base = {"run.episodes": 8, "run.epochs": 2, "reward.tau": 1.0, "run.seeds": 2}
    base.update(over)
    return ExperimentConfig().replace(**base)


# config

def test_defaults_follow_domain():
    cfg = ExperimentConfig()
    assert cfg.episodes == 50 and cfg.learner_kind == "tabular" and cfg.label == "lectr-veg"
    room_cfg = cfg.replace(**{"env.domain": "room"})
    assert room_cfg.episodes == 150 and room_cfg.learner_kind == "tilecoded"
    assert cfg.replace(**{"env.domain": "hallway"}).episodes == 100


def test_config_file_round_trip(tmp_path):
    cfg = ExperimentConfig().replace(**{"env.domain": "room", "env.rotation": 180,
                                        "reward.cost": 0.5, "reward.tau": 0.25,
                                        "env.start_cells": "6,2;10,2"})
    path = tmp_path / "exp.ini"
    cfg.write(path)
    again = load(path)
    assert again == cfg
    assert again.digest() == cfg.digest()


@pytest.mark.parametrize("key,value", [("env.domain", "maze"), ("run.algorithm", "oracle"),
                                       ("reward.kind", "XYZ"), ("env.rotation", 45),
                                       ("env.flip", "diagonal"), ("run.epochs", 0)])
def test_invalid_config(key, value):
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**{key: value})


def test_unknown_keys_and_files(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**{"env.size": 3})
    bad = tmp_path / "bad.ini"
    bad.write_text("[env]\ncolour = red\n")
    with pytest.raises(ConfigError):
        load(bad)
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.ini")


def test_rotation_only_in_room():
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**{"env.domain": "hallway", "env.rotation": 90})
    env = harness.build_env(ExperimentConfig().replace(**{"env.domain": "room",
                                                          "env.rotation": 180}))
    assert env.signature()["n_obs"] == room().signature()["n_obs"]


# metrics

def test_auc_and_normalised_auc():
    assert harness.auc([1.0, 2.0, 3.0]) == 6.0
    assert harness.normalized_auc([OPT] * 4, OPT) == pytest.approx(1.0)
    assert harness.normalized_auc([], OPT) == 0.0


def test_welch_examples():
    assert harness.welch_t_test([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert harness.welch_t_test([0] * 4, [1] * 4) == 0.0
    assert harness.welch_t_test([2] * 4, [2] * 4) == 1.0
    with pytest.raises(ValueError):
        harness.welch_t_test([1], [1, 2])


def test_welch_power():
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        hits += harness.welch_t_test(rng.normal(0, 1, 30), rng.normal(1, 1, 30)) < 0.01
    # power of the two-sided test at d=1, n=30 is about 0.96
    assert hits / 200 > 0.9


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_welch_same_distribution_calibrated(seed):
    rng = np.random.default_rng(seed)
    p = harness.welch_t_test(rng.normal(size=10), rng.normal(size=10))
    assert 0.0 <= p <= 1.0


def test_welch_false_positive_rate():
    rng = np.random.default_rng(0)
    ps = [harness.welch_t_test(rng.normal(size=10), rng.normal(size=10)) for _ in range(2000)]
    rate = np.mean(np.array(ps) < 0.05)
    assert abs(rate - 0.05) < 3 * np.sqrt(0.05 * 0.95 / 2000)


# evaluate and policy files

def _optimal_repeated(path):
    env = RepeatedGame()
    learners = [TabularQ(6, 2), TabularQ(6, 2)]
    learners[0].weights[:, 0] = 1.0
    learners[1].weights[:, 1] = 1.0
    policyio.save_policies(path, learners, env=env)


def test_evaluate_optimal_repeated(tmp_path):
    path = str(tmp_path / "opt.npz")
    _optimal_repeated(path)
    assert harness.evaluate(path, ExperimentConfig(), 10) == pytest.approx(OPT, abs=1e-9)
    with pytest.raises(ValueError):
        harness.evaluate(path, ExperimentConfig(), 0)


def test_evaluate_fresh_hallway_is_zero(tmp_path):
    env = hallway()
    path = str(tmp_path / "fresh.npz")
    policyio.save_policies(path, [make_learner(env, "tilecoded") for _ in range(2)], env=env)
    cfg = ExperimentConfig().replace(**{"env.domain": "hallway"})
    assert harness.evaluate(path, cfg, 5) == 0.0


def test_policy_round_trip_with_advising(tmp_path):
    cfg = small()
    r = harness.train(cfg, 0, str(tmp_path))
    ps = policyio.load_policy_set(r.policy_path)
    assert ps is not None and ps.entropy == cfg.advising.entropy
    assert harness.evaluate(r.policy_path, cfg, 1) == pytest.approx(r.v_bar)
    desc = policyio.describe(r.policy_path)
    assert desc["version"] == policyio.VERSION and "advising/critic/0" in desc["arrays"]


def test_policy_version_mismatch(tmp_path):
    path = str(tmp_path / "p.npz")
    _optimal_repeated(path)
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    header = json.loads(str(arrays["__header__"]))
    header["version"] = 99
    arrays["__header__"] = np.array(json.dumps(header))
    np.savez(path, **arrays)
    with pytest.raises(policyio.PolicyFormatError):
        policyio.load_learners(path, RepeatedGame())


def test_room_policies_do_not_load_into_hallway(tmp_path):
    env = room()
    path = str(tmp_path / "room.npz")
    policyio.save_policies(path, [make_learner(env, "tilecoded") for _ in range(2)], env=env)
    with pytest.raises(policyio.PolicyFormatError):
        policyio.load_learners(path, hallway())
    cfg = ExperimentConfig().replace(**{"env.domain": "hallway"})
    with pytest.raises(policyio.PolicyFormatError):
        harness.transfer(cfg, path, "horizontal", 0)
    with pytest.raises(FileNotFoundError):
        harness.transfer(cfg, str(tmp_path / "none.npz"), "horizontal", 0)


def test_not_a_policy_file(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"junk")
    with pytest.raises(policyio.PolicyFormatError):
        policyio.read_header(str(path))


# train

def test_none_is_one_independent_run():
    cfg = small(**{"run.algorithm": "none"})
    r = harness.train(cfg, 3)
    assert len(r.curve) == 8 and r.advice_per_episode == 0.0
    assert 0.0 <= r.norm_auc <= 1.0 + 1e-9
    assert 0.0 <= r.v_bar <= OPT + 1e-9


def test_lectr_single_epoch_advises_at_random():
    cfg = small(**{"run.epochs": 1})
    r = harness.train(cfg, 0)
    # fresh actors request and answer about half the time: some advice, not all
    per_step = r.advice_per_episode / np.mean(r.episode_steps)
    assert 0.05 < per_step < 2.0
    assert r.tau == 1.0


def test_reference_tau_is_cached(tmp_path):
    cfg = ExperimentConfig().replace(**{"run.episodes": 5, "reward.tau_reference_seeds": 2})
    tau = harness.reference_tau(cfg, str(tmp_path))
    files = os.listdir(tmp_path / "cache")
    assert len(files) == 1
    harness._MEMO.clear()
    assert harness.reference_tau(cfg, str(tmp_path)) == tau
    assert harness.prepare(cfg, str(tmp_path)).reward.tau == tau


def test_reproducible_rows():
    cfg = small()
    a, b = harness.train(cfg, 5), harness.train(cfg, 5)
    assert a.row() == b.row()
    assert a.curve_csv() == b.curve_csv()
    assert harness.train(cfg, 6).row() != a.row()


def test_compare_outputs(tmp_path):
    configs = [small(), small(**{"run.algorithm": "none"})]
    report = harness.compare(configs, seeds=[0, 1], out=str(tmp_path))
    with open(tmp_path / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert {r["algorithm"] for r in rows} == {"lectr-veg", "none"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["summary"]) == {"lectr-veg", "none"}
    assert len(os.listdir(tmp_path / "curves")) == 4
    assert 0.0 <= report.p("lectr-veg", "none") <= 1.0
    merged = harness.export(str(tmp_path))
    assert merged.count("\n") == 1 + 4 * 8


def test_compare_identical_twice_not_significant():
    a = small(**{"run.algorithm": "none", "run.label": "a"})
    b = small(**{"run.algorithm": "none", "run.label": "b"})
    report = harness.compare([a, b], seeds=[0, 1, 2])
    assert report.p("a", "b") == pytest.approx(1.0)
    assert report.winners["v_bar"] == ["a", "b"]


def test_compare_preconditions():
    with pytest.raises(ConfigError):
        harness.compare([small()], seeds=[0, 1])
    with pytest.raises(ConfigError):
        harness.compare([small(), small(**{"run.algorithm": "none"})], seeds=[0])
    with pytest.raises(ConfigError):
        harness.compare([small(), small()], seeds=[0, 1])


def test_failed_cell_is_recorded(tmp_path):
    bad = small(**{"run.algorithm": "importance_advising",
                   "heuristic.expert_policy": str(tmp_path / "missing.npz")})
    report = harness.compare([small(**{"run.algorithm": "none"}), bad], seeds=[0, 1])
    assert report.summary["importance_advising"].failures == 2
    assert all(r.error for r in report.results["importance_advising"])


def test_parallel_equals_serial():
    cells = [(small(), s, None, None, "none") for s in (0, 1)]
    serial = [r.row() for r in harness.run_cells(cells, 1)]
    parallel = [r.row() for r in harness.run_cells(cells, 2)]
    assert serial == parallel


def test_sweep_labels():
    base = small(**{"run.algorithm": "none"})
    report = harness.sweep(base, {"learner.alpha": [0.1, 0.5]}, seeds=[0, 1])
    assert set(report.summary) == {"none[alpha=0.1]", "none[alpha=0.5]"}


def test_transfer_identity_with_none_starts_fresh(tmp_path):
    cfg = ExperimentConfig().replace(**{"env.domain": "hallway", "run.algorithm": "none",
                                        "run.episodes": 5})
    source = str(tmp_path / "src.npz")
    env = hallway()
    learners = [make_learner(env, "tilecoded", agent=k) for k in range(2)]
    for q in learners:
        q.weights[:] = 1.0
    policyio.save_policies(source, learners, env=env)
    r = harness.transfer(cfg, source, "none", 0)
    assert r.curve[0] < 0.5
