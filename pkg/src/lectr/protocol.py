"""The advice-exchange loop: one task episode, Phase I and Phase II."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .advising import (AdvisingActionSet, AdvisingPolicySet, actor_update,
                       build_advising_obs, critic_update, select_advising_actions)
from .heuristics import HeuristicKind, HeuristicState, decide_advise, decide_request
from .rewards import (RewardContext, RewardKind, advising_reward, estimate_joint_value,
                      greedy_return, joint_advising_reward)


@dataclass(frozen=True)
class BehavioralPolicy:
    """Student-local map from an advised action index to the executed one."""

    mapping: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mapping is not None and sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError(f"behavioral map {self.mapping} is not a bijection")

    def __call__(self, action: int) -> int:
        return action if self.mapping is None else self.mapping[action]


IDENTITY = BehavioralPolicy()


@dataclass
class Exchange:
    requested: tuple[bool, bool]
    # advice delivered to each student, None when nothing was executed
    advice: tuple[int | None, int | None]
    actions: AdvisingActionSet | None = None


class NoTeaching:
    name = "none"
    uses_advising_obs = False

    def exchange(self, joint_obs, learners, intended, adv_obs, rng) -> Exchange:
        return Exchange((False, False), (None, None))

    def observe(self, joint_obs, reports):
        pass


class LectrTeaching:
    """Advice chosen by the learned actors (sampled or greedy)."""

    name = "lectr"
    uses_advising_obs = True

    def __init__(self, policy_set: AdvisingPolicySet, mode: str = "sample"):
        self.policy_set = policy_set
        self.mode = mode

    def exchange(self, joint_obs, learners, intended, adv_obs, rng) -> Exchange:
        acts = select_advising_actions(self.policy_set, adv_obs, rng, self.mode)
        return Exchange(acts.requests, (acts.advice_for(0), acts.advice_for(1)), acts)

    def observe(self, joint_obs, reports):
        pass


class HeuristicTeaching:
    """A hand-crafted baseline; ``teachers[a]`` is the Q-function agent a
    consults when advising its peer (a fixed expert, or None for the live
    teammate learner)."""

    uses_advising_obs = False

    def __init__(self, kind: HeuristicKind, state: HeuristicState | None = None,
                 teachers=(None, None)):
        self.kind = HeuristicKind(kind)
        self.state = state if state is not None else HeuristicState()
        self.teachers = tuple(teachers)
        if self.kind.needs_expert and any(t is None for t in self.teachers):
            raise ValueError(f"{self.kind.value} needs expert teacher policies")
        self.name = self.kind.value.lower()

    def exchange(self, joint_obs, learners, intended, adv_obs, rng) -> Exchange:
        requested, advice = [False, False], [None, None]
        for student in (0, 1):
            teacher = 1 - student
            o = joint_obs[student]
            q_teacher = (self.teachers[teacher] or learners[teacher]).q_values(o)
            if self.kind.student_initiated:
                ask = decide_request(self.kind, self.state, learners[student].q_values(o),
                                     intended[student])
                requested[student] = ask
                if not ask:
                    continue
            elif not self.kind.teacher_initiated:
                continue
            advice[student] = decide_advise(self.kind, self.state, q_teacher, o,
                                            intended[student], rng, student)
        return Exchange(tuple(requested), tuple(advice))

    def observe(self, joint_obs, reports):
        for agent, (o, rep) in enumerate(zip(joint_obs, reports)):
            self.state.record_visit(agent, o)
            self.state.record_td(agent, o, rep.delta_pre)


@dataclass
class RewardSettings:
    kind: RewardKind = RewardKind.VEG
    cost: float = 0.0
    tau: float = 0.0
    veg_at: str = "next"
    jvg_rollouts: int = 10


@dataclass
class StepRecord:
    obs: tuple
    intended: tuple
    requested: tuple
    advice: tuple
    executed: tuple
    reward: float
    advising_rewards: tuple


@dataclass
class EpisodeTrace:
    steps: list = field(default_factory=list)
    episode_return: float = 0.0
    advice_counts: list = field(default_factory=lambda: [0, 0])
    n_steps: int = 0


def run_episode(env, learners, teaching, rng: np.random.Generator,
                adv_rng: np.random.Generator | None = None, behavioral=(IDENTITY, IDENTITY),
                rewards: RewardSettings | None = None, policy_set: AdvisingPolicySet | None = None,
                collect: bool = False, knowledge=None, record: bool = False,
                gamma: float = 0.95) -> EpisodeTrace:
    """Play one task episode with advice exchange and online task learning.

    ``rng`` drives task-level exploration only, so a run that never advises
    consumes exactly the random stream of plain independent Q-learning.
    ``knowledge`` optionally replaces the teachers' own Q-functions in the
    advising observations and in the teacher-side reward terms.
    """
    rewards = rewards or RewardSettings()
    adv_rng = adv_rng if adv_rng is not None else rng
    need_adv_obs = teaching.uses_advising_obs
    teacher_q_src = knowledge if knowledge is not None else learners
    jvg = rewards.kind is RewardKind.JVG
    trace = EpisodeTrace()
    obs = env.reset()
    adv_obs = build_advising_obs(obs, learners, env.encode, knowledge) if need_adv_obs else None
    t = 0
    while True:
        intended = tuple(learners[k].act(obs[k], rng) for k in range(2))
        ex = teaching.exchange(obs, learners, intended, adv_obs, adv_rng)
        executed = tuple(
            behavioral[k](ex.advice[k]) if ex.advice[k] is not None else intended[k]
            for k in range(2)
        )
        advised = tuple(a is not None for a in ex.advice)
        v_before = None
        if jvg and any(advised):
            v_before = estimate_joint_value(env, learners, rewards.jvg_rollouts, gamma=gamma)
        res = env.step(executed)
        reports = [learners[k].update(obs[k], executed[k], res.reward, res.next_obs[k], res.done)
                   for k in range(2)]
        teaching.observe(obs, reports)
        v_after = None
        if v_before is not None:
            v_after = estimate_joint_value(env, learners, rewards.jvg_rollouts, gamma=gamma)

        dir_rewards = []
        for s in (0, 1):
            ctx = RewardContext(
                advised=advised[s], report=reports[s],
                teacher_q=teacher_q_src[1 - s].q_values(obs[s]),
                intended_action=intended[s], task_reward=res.reward,
                joint_value_before=v_before, joint_value_after=v_after,
                tau=rewards.tau, cost=rewards.cost, veg_at=rewards.veg_at,
            )
            scaler = policy_set.scaler if policy_set is not None else None
            dir_rewards.append(advising_reward(rewards.kind, ctx, scaler) if advised[s] else 0.0)
        r_adv = joint_advising_reward(*dir_rewards)

        next_adv_obs = None
        if need_adv_obs:
            next_adv_obs = build_advising_obs(res.next_obs, learners, env.encode, knowledge)
            if collect and ex.actions is not None:
                policy_set.store(adv_obs, ex.actions, r_adv, next_adv_obs)

        trace.episode_return += gamma ** t * res.reward
        for s in (0, 1):
            trace.advice_counts[s] += advised[s]
        if record:
            trace.steps.append(StepRecord(obs, intended, ex.requested, ex.advice, executed,
                                          res.reward, tuple(dir_rewards)))
        t += 1
        obs, adv_obs = res.next_obs, next_adv_obs
        if res.done:
            trace.n_steps = t
            return trace


@dataclass
class Phase1Result:
    curve: list = field(default_factory=list)
    train_returns: list = field(default_factory=list)
    advice_counts: list = field(default_factory=list)
    episode_steps: list = field(default_factory=list)
    steps: int = 0


def run_phase1(env, learners, teaching, episodes: int, rng, adv_rng=None,
               behavioral=(IDENTITY, IDENTITY), rewards: RewardSettings | None = None,
               policy_set=None, collect: bool = False, knowledge=None,
               gamma: float = 0.95) -> Phase1Result:
    """Task-level learning from the given learners, with one greedy
    advice-free evaluation after every episode."""
    out = Phase1Result()
    eval_env = env.clone()
    for _ in range(episodes):
        trace = run_episode(env, learners, teaching, rng, adv_rng, behavioral, rewards,
                            policy_set, collect, knowledge, gamma=gamma)
        out.train_returns.append(trace.episode_return)
        out.advice_counts.append(tuple(trace.advice_counts))
        out.episode_steps.append(trace.n_steps)
        out.steps += trace.n_steps
        out.curve.append(greedy_return(eval_env, learners, gamma))
    return out


@dataclass
class Phase2Stats:
    critic_losses: list = field(default_factory=list)
    actor_grad_norms: list = field(default_factory=list)

    @property
    def mean_critic_loss(self) -> float:
        return float(np.mean(self.critic_losses)) if self.critic_losses else 0.0


def run_phase2(policy_set: AdvisingPolicySet, updates: int, rng) -> Phase2Stats:
    """``updates`` rounds of one critic step and one step per actor."""
    if len(policy_set.buffer) == 0:
        raise ValueError("Phase II needs a non-empty replay buffer")
    stats = Phase2Stats()
    for _ in range(updates):
        batch = policy_set.buffer.sample(policy_set.batch_size, rng)
        stats.critic_losses.append(critic_update(policy_set, batch))
        stats.actor_grad_norms.append(actor_update(policy_set, batch, rng))
    return stats
