"""Experiment orchestration: the two-phase outer loop, metrics, comparisons,
transfer runs, persistence."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import policyio
from .advising import AdvisingPolicySet, advising_obs_dims
from .config import DEFAULT_HORIZON, ConfigError, ExperimentConfig, parse_cells
from .envs import flip, make_env, oracle_value
from .heuristics import HeuristicKind, HeuristicState
from .protocol import (HeuristicTeaching, LectrTeaching, NoTeaching, RewardSettings,
                       run_episode, run_phase1, run_phase2)
from .qlearn import make_learner
from .rewards import RewardKind, greedy_return

log = logging.getLogger(__name__)

# seeds for the no-teaching runs behind tau and the expert teachers; kept
# apart from experiment seeds so they never share a random stream
REFERENCE_ENTROPY = 7_340_033
EXPERT_ENTROPY = 9_437_189
EXPERT_ATTEMPTS = 20


# construction helpers

def build_env(cfg: ExperimentConfig, apply_flip: bool = True):
    e = cfg.env
    horizon = e.horizon if e.horizon is not None else DEFAULT_HORIZON[e.domain]
    kw = {"horizon": horizon}
    if e.domain != "repeated":
        starts, goals = parse_cells(e.start_cells), parse_cells(e.goal_cells)
        if e.domain == "hallway":
            starts = starts and tuple(c[0] for c in starts)
            goals = goals and tuple(c[0] for c in goals)
        if starts is not None:
            kw["start_cells"] = starts
        if goals is not None:
            kw["goal_cells"] = goals
    if e.domain == "room":
        kw["rotations"] = (0, e.rotation % 360)
    env = make_env(e.domain, **kw)
    if apply_flip and e.flip != "none":
        env = flip(env, e.flip)
    return env


def build_learners(env, cfg: ExperimentConfig, epsilon: float | None = None):
    lc = cfg.learner
    return [make_learner(env, cfg.learner_kind, alpha=lc.alpha, gamma=lc.gamma,
                         epsilon=lc.epsilon if epsilon is None else epsilon,
                         tie_break=lc.tie_break, n_tilings=lc.n_tilings,
                         tile_width=lc.tile_width, agent=k)
            for k in range(2)]


def build_policy_set(env, cfg: ExperimentConfig, rng) -> AdvisingPolicySet:
    a = cfg.advising
    return AdvisingPolicySet(
        advising_obs_dims(env.encoded_dim, env.n_actions), env.n_actions, rng,
        hidden=a.hidden, n_hidden=a.n_hidden, lr=a.lr, gamma=a.gamma, polyak=a.polyak,
        temperature=a.temperature, buffer_capacity=a.buffer_capacity,
        batch_size=a.batch_size, reservoir_capacity=a.reservoir_capacity,
        entropy=a.entropy)


def reward_settings(cfg: ExperimentConfig) -> RewardSettings:
    r = cfg.reward
    return RewardSettings(kind=RewardKind(r.kind.upper()), cost=r.cost,
                          tau=0.0 if r.tau is None else r.tau,
                          veg_at=r.veg_at, jvg_rollouts=r.jvg_rollouts)


def run_streams(seed: int):
    """Independent generators: task exploration, advising choices, network
    initialisation, Phase II minibatches."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


# metrics

def auc(curve) -> float:
    return float(np.sum(curve))


def normalized_auc(curve, oracle: float) -> float:
    if len(curve) == 0 or oracle <= 0:
        return 0.0
    return float(np.sum(curve) / (len(curve) * oracle))


def evaluate_learners(env, learners, rollouts: int, gamma: float = 0.95) -> float:
    if rollouts < 1:
        raise ValueError("evaluation needs at least one rollout")
    scratch = env.clone()
    return float(np.mean([greedy_return(scratch, learners, gamma) for _ in range(rollouts)]))


def welch_t_test(a, b) -> float:
    """Two-sided Welch p-value with exact rules for zero-variance groups."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return 1.0 if a[0] == b[0] else 0.0
    with warnings.catch_warnings():
        # near-identical samples trigger a precision warning; the p-value is still usable
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


# results

@dataclass
class RunResult:
    seed: int
    algorithm: str
    curve: list = field(default_factory=list)
    v_bar: float = 0.0
    auc: float = 0.0
    norm_auc: float = 0.0
    # per-episode advice counts into (agent i, agent j) and episode lengths
    advice_counts: list = field(default_factory=list)
    episode_steps: list = field(default_factory=list)
    train_returns: list = field(default_factory=list)
    tau: float | None = None
    oracle: float = 0.0
    policy_path: str | None = None
    error: str | None = None

    @property
    def advice_rate(self) -> list:
        return [(i / n, j / n) if n else (0.0, 0.0)
                for (i, j), n in zip(self.advice_counts, self.episode_steps)]

    @property
    def advice_per_episode(self) -> float:
        if not self.advice_counts:
            return 0.0
        return float(np.mean([i + j for i, j in self.advice_counts]))

    @property
    def train_return(self) -> float:
        return float(np.mean(self.train_returns)) if self.train_returns else 0.0

    def row(self) -> dict:
        tot = np.sum(self.advice_counts, axis=0) if self.advice_counts else (0, 0)
        return {"seed": self.seed, "algorithm": self.algorithm, "v_bar": repr(self.v_bar),
                "auc": repr(self.auc), "norm_auc": repr(self.norm_auc),
                "advice_i": int(tot[0]), "advice_j": int(tot[1]),
                "advice_per_episode": repr(self.advice_per_episode),
                "train_return": repr(self.train_return), "error": self.error or ""}

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["episode", "greedy_return", "advice_rate_i", "advice_rate_j"])
        rates = self.advice_rate or [(0.0, 0.0)] * len(self.curve)
        for k, (v, (ri, rj)) in enumerate(zip(self.curve, rates)):
            w.writerow([k, repr(float(v)), repr(float(ri)), repr(float(rj))])
        return buf.getvalue()


RESULT_FIELDS = ["seed", "algorithm", "v_bar", "auc", "norm_auc", "advice_i", "advice_j",
                 "advice_per_episode", "train_return", "error"]


@dataclass
class AlgorithmSummary:
    n: int
    v_bar_mean: float
    v_bar_std: float
    auc_mean: float
    auc_std: float
    norm_auc_mean: float
    norm_auc_std: float
    advice_per_episode_mean: float
    failures: int = 0


@dataclass
class ComparisonReport:
    results: dict  # label -> list[RunResult]
    summary: dict  # label -> AlgorithmSummary
    p_values: dict  # metric -> {"a|b": p}
    winners: dict  # metric -> sorted labels flagged best

    def values(self, label: str, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.results[label] if r.error is None]

    def p(self, a: str, b: str, metric: str = "v_bar") -> float:
        table = self.p_values[metric]
        return table.get(f"{a}|{b}", table.get(f"{b}|{a}"))

    def to_json(self) -> dict:
        return {"summary": {k: asdict(v) for k, v in self.summary.items()},
                "p_values": self.p_values, "winners": self.winners}


METRICS = ("v_bar", "auc", "norm_auc", "advice_per_episode")


def summarize(results: dict, alpha: float = 0.05) -> ComparisonReport:
    summary, p_values, winners = {}, {m: {} for m in METRICS}, {}
    for label, runs in results.items():
        ok = [r for r in runs if r.error is None]

        def ms(metric):
            vals = [getattr(r, metric) for r in ok]
            return (float(np.mean(vals)), float(np.std(vals))) if vals else (math.nan, math.nan)

        summary[label] = AlgorithmSummary(len(ok), *ms("v_bar"), *ms("auc"), *ms("norm_auc"),
                                          ms("advice_per_episode")[0], len(runs) - len(ok))
    labels = list(results)
    for metric in METRICS:
        vals = {k: [getattr(r, metric) for r in results[k] if r.error is None] for k in labels}
        for a, b in itertools.combinations(labels, 2):
            if len(vals[a]) >= 2 and len(vals[b]) >= 2:
                p_values[metric][f"{a}|{b}"] = welch_t_test(vals[a], vals[b])
        if metric == "advice_per_episode":
            continue
        means = {k: np.mean(v) for k, v in vals.items() if v}
        if not means:
            winners[metric] = []
            continue
        top = max(means, key=means.get)
        flagged = [k for k in means if k == top
                   or p_values[metric].get(f"{k}|{top}", p_values[metric].get(f"{top}|{k}", 0.0))
                   >= alpha]
        winners[metric] = sorted(flagged)
    return ComparisonReport(results, summary, p_values, winners)


# cached precomputation: VEG threshold and expert teachers

def _cache_dir(out: str | None) -> str | None:
    if out is None:
        return None
    path = os.path.join(out, "cache")
    os.makedirs(path, exist_ok=True)
    return path


_MEMO: dict = {}


def reference_tau(cfg: ExperimentConfig, out: str | None = None) -> float:
    """Fraction of the mean initial-state value estimate that independent
    learners reach without teaching."""
    key = "tau-" + cfg.digest("env", "learner") + f"-{cfg.episodes}-{cfg.reward.tau_fraction}" \
          f"-{cfg.reward.tau_reference_seeds}"
    cache = _cache_dir(out)
    path = os.path.join(cache, key + ".json") if cache else None
    if key in _MEMO:
        return _MEMO[key]
    if path and os.path.exists(path):
        with open(path) as fh:
            _MEMO[key] = json.load(fh)["tau"]
        return _MEMO[key]
    vals = []
    for s in range(cfg.reward.tau_reference_seeds):
        env = build_env(cfg)
        learners = build_learners(env, cfg)
        rng = np.random.default_rng([REFERENCE_ENTROPY, s])
        run_phase1(env, learners, NoTeaching(), cfg.episodes, rng, gamma=cfg.learner.gamma)
        obs = env.reset()
        vals += [learners[k].value_estimate(obs[k]) for k in range(2)]
    tau = float(cfg.reward.tau_fraction * np.mean(vals))
    _MEMO[key] = tau
    if path:
        with open(path, "w") as fh:
            json.dump({"tau": tau, "reference_values": vals}, fh)
    log.info("reference tau %.4f from %d no-teaching runs", tau, len(vals) // 2)
    return tau


def pretrain_experts(cfg: ExperimentConfig, out: str | None = None):
    """Independent learners trained with extra exploration until their greedy
    joint policy is optimal; returns the pair and the file it was saved to."""
    h = cfg.heuristic
    key = "experts-" + cfg.digest("env", "learner") + f"-{h.expert_episodes}-{h.expert_epsilon}"
    cache = _cache_dir(out)
    path = os.path.join(cache, key + ".npz") if cache else None
    env = build_env(cfg)
    if path and os.path.exists(path):
        return policyio.load_learners(path, env), path
    if key in _MEMO:
        return [lr.copy() for lr in _MEMO[key]], path
    target = oracle_value(env, cfg.learner.gamma)
    best, best_v = None, -math.inf
    for attempt in range(EXPERT_ATTEMPTS):
        learners = build_learners(env, cfg, epsilon=h.expert_epsilon)
        rng = np.random.default_rng([EXPERT_ENTROPY, attempt])
        for _ in range(h.expert_episodes):
            run_episode(env, learners, NoTeaching(), rng, gamma=cfg.learner.gamma)
        v = greedy_return(env.clone(), learners, cfg.learner.gamma)
        if v > best_v:
            best, best_v = learners, v
        if v >= target - 1e-9:
            break
    if best_v < target - 1e-9:
        log.warning("experts reach %.4f of optimum %.4f", best_v, target)
    _MEMO[key] = best
    if path:
        policyio.save_policies(path, best, env=env, extra={"role": "expert", "value": best_v})
    return [lr.copy() for lr in best], path


def prepare(cfg: ExperimentConfig, out: str | None = None) -> ExperimentConfig:
    """Resolve derived settings once, before any cell runs: the VEG threshold
    and, for expert heuristics, the expert policy file."""
    updates = {}
    if cfg.run.algorithm == "lectr" and cfg.reward.kind.upper() == "VEG" and cfg.reward.tau is None:
        updates["reward.tau"] = reference_tau(cfg, out)
    algo = cfg.run.algorithm
    if algo not in ("lectr", "none") and HeuristicKind(algo.upper()).needs_expert \
            and cfg.heuristic.expert_policy is None:
        _, path = pretrain_experts(cfg, out)
        if path is None:
            raise ConfigError("expert heuristics need an output directory or heuristic.expert_policy")
        updates["heuristic.expert_policy"] = path
    return cfg.replace(**updates) if updates else cfg


# the outer loop

def train(cfg: ExperimentConfig, seed: int, out: str | None = None, knowledge=None,
          save: bool = True) -> RunResult:
    """Run the configured algorithm for one seed.

    LeCTR runs ``epochs`` generations: each re-initialises the task learners,
    runs Phase I with the current advising policies while collecting advising
    experience, then trains the advising policies.  Other algorithms have no
    advising-level learning and run Phase I once.  ``knowledge`` gives fixed
    teacher policies (transfer runs).
    """
    cfg = prepare(cfg, out)
    env = build_env(cfg)
    gamma = cfg.learner.gamma
    task_rng, adv_rng, init_rng, p2_rng = run_streams(seed)
    algo = cfg.run.algorithm
    rewards = reward_settings(cfg)
    policy_set = None

    if algo == "lectr":
        policy_set = build_policy_set(env, cfg, init_rng)
        teaching = LectrTeaching(policy_set)
        for epoch in range(cfg.run.epochs):
            learners = build_learners(env, cfg)
            res = run_phase1(env, learners, teaching, cfg.episodes, task_rng, adv_rng,
                             rewards=rewards, policy_set=policy_set, collect=True,
                             knowledge=knowledge, gamma=gamma)
            n_updates = int(round(res.steps * cfg.advising.updates_per_step))
            if n_updates and len(policy_set.buffer):
                run_phase2(policy_set, n_updates, p2_rng)
            log.debug("seed %d epoch %d final %.3f", seed, epoch, res.curve[-1] if res.curve else 0)
    else:
        learners = build_learners(env, cfg)
        if algo == "none":
            teaching = NoTeaching()
        else:
            kind = HeuristicKind(algo.upper())
            h = cfg.heuristic
            state = HeuristicState(threshold=h.threshold, budget=h.budget, upsilon=h.upsilon)
            teachers = (None, None)
            if knowledge is not None:
                teachers = tuple(knowledge)
            elif kind.needs_expert:
                teachers = tuple(policyio.load_learners(h.expert_policy, env))
            teaching = HeuristicTeaching(kind, state, teachers)
        res = run_phase1(env, learners, teaching, cfg.episodes, task_rng, adv_rng,
                         rewards=rewards, gamma=gamma)

    oracle = oracle_value(env, gamma)
    result = RunResult(
        seed=seed, algorithm=cfg.label, curve=[float(v) for v in res.curve],
        v_bar=evaluate_learners(env, learners, cfg.run.eval_rollouts, gamma),
        auc=auc(res.curve), norm_auc=normalized_auc(res.curve, oracle),
        advice_counts=[tuple(int(c) for c in a) for a in res.advice_counts],
        episode_steps=list(res.episode_steps), train_returns=list(res.train_returns),
        tau=cfg.reward.tau, oracle=oracle)
    if save and out is not None:
        pdir = os.path.join(out, "policies")
        os.makedirs(pdir, exist_ok=True)
        result.policy_path = os.path.join(pdir, f"{cfg.label}_seed{seed}.npz")
        policyio.save_policies(result.policy_path, learners, policy_set, env,
                               extra={"algorithm": cfg.label, "seed": seed})
    return result


def evaluate(policy_path, cfg: ExperimentConfig, rollouts: int | None = None) -> float:
    """Mean greedy advice-free discounted return of saved task policies."""
    rollouts = cfg.run.eval_rollouts if rollouts is None else rollouts
    if rollouts < 1:
        raise ValueError("evaluation needs at least one rollout")
    env = build_env(cfg)
    learners = policyio.load_learners(policy_path, env)
    return evaluate_learners(env, learners, rollouts, cfg.learner.gamma)


def _run_cell(args) -> RunResult:
    cfg, seed, out, knowledge_path, flip_axis = args
    try:
        if knowledge_path is not None:
            return _transfer_cell(cfg, knowledge_path, flip_axis, seed, out)
        return train(cfg, seed, out)
    except Exception as exc:  # recorded per cell, never fatal to the comparison
        log.exception("cell %s seed %d failed", cfg.label, seed)
        return RunResult(seed=seed, algorithm=cfg.label, error=f"{type(exc).__name__}: {exc}")


def run_cells(cells, workers: int = 1) -> list[RunResult]:
    if workers <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells))


def compare(configs, seeds=None, out: str | None = None, workers: int | None = None,
            source: str | None = None, flip_axis: str = "none") -> ComparisonReport:
    """Run every (algorithm, seed) cell and test the differences."""
    configs = list(configs)
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate algorithm labels: {labels}")
    if len(configs) < 2:
        raise ConfigError("compare needs at least two algorithms")
    seeds = list(configs[0].seed_list if seeds is None else seeds)
    if len(seeds) < 2:
        raise ConfigError("compare needs at least two seeds")
    workers = configs[0].run.workers if workers is None else workers
    resolved = [prepare(_transfer_cfg(c, flip_axis) if source else c, out) for c in configs]
    cells = [(c, s, out, source, flip_axis) for c in resolved for s in seeds]
    flat = run_cells(cells, workers)
    results = {c.label: [] for c in resolved}
    for r in flat:
        results[r.algorithm].append(r)
    report = summarize(results)
    if out is not None:
        write_report(report, out)
    return report


def sweep(base: ExperimentConfig, grid: dict, seeds=None, out: str | None = None,
          workers: int | None = None) -> ComparisonReport:
    """Compare every point of a grid of dotted-key overrides, e.g.
    ``{"reward.cost": [0, 0.5]}``."""
    keys = list(grid)
    configs = []
    for values in itertools.product(*(grid[k] for k in keys)):
        over = dict(zip(keys, values))
        tag = ",".join(f"{k.split('.')[-1]}={v}" for k, v in over.items())
        over["run.label"] = f"{base.label}[{tag}]"
        configs.append(base.replace(**over))
    return compare(configs, seeds, out, workers)


def _transfer_cfg(cfg: ExperimentConfig, axis: str) -> ExperimentConfig:
    return cfg.replace(**{"env.flip": axis})


def _transfer_cell(cfg, source_path, axis, seed, out) -> RunResult:
    env = build_env(cfg)
    knowledge = policyio.load_learners(source_path, env)
    return train(cfg, seed, out, knowledge=knowledge)


def transfer(cfg: ExperimentConfig, source_path: str, axis: str, seed: int,
             out: str | None = None) -> RunResult:
    """Fresh learners in the flipped task, taught from fixed source policies."""
    if not os.path.exists(source_path):
        raise FileNotFoundError(f"source policy file not found: {source_path}")
    return _transfer_cell(_transfer_cfg(cfg, axis), source_path, axis, seed, out)


# persistence of comparison artifacts

def write_report(report: ComparisonReport, out: str) -> None:
    os.makedirs(os.path.join(out, "curves"), exist_ok=True)
    with open(os.path.join(out, "results.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for runs in report.results.values():
            for r in sorted(runs, key=lambda r: r.seed):
                w.writerow(r.row())
                with open(os.path.join(out, "curves", f"{r.algorithm}_seed{r.seed}.csv"),
                          "w") as cf:
                    cf.write(r.curve_csv())
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def export(path: str, dest: str | None = None) -> str:
    """A policy file becomes a JSON description; a results directory becomes
    one long-format CSV of every curve."""
    if os.path.isdir(path):
        cdir = os.path.join(path, "curves")
        if not os.path.isdir(cdir):
            raise FileNotFoundError(f"no curves directory in {path}")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm", "seed", "episode", "greedy_return", "advice_rate_i",
                    "advice_rate_j"])
        for name in sorted(os.listdir(cdir)):
            stem = name[:-4]
            label, _, seed = stem.rpartition("_seed")
            with open(os.path.join(cdir, name)) as fh:
                for row in list(csv.reader(fh))[1:]:
                    w.writerow([label, seed, *row])
        text = buf.getvalue()
    else:
        text = json.dumps(policyio.describe(path), indent=2, sort_keys=True) + "\n"
    if dest is not None:
        with open(dest, "w") as fh:
            fh.write(text)
    return text
