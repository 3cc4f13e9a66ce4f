"""Advising-level rewards for one advising direction (student <- teacher)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .qlearn import UpdateReport


class RewardKind(str, enum.Enum):
    JVG = "JVG"  # joint value gain
    QTR = "QTR"  # teacher's importance of the student's intended action
    LG = "LG"  # student loss reduction
    LGG = "LGG"  # student squared gradient norm
    TDG = "TDG"  # student TD-error reduction
    VEG = "VEG"  # student value estimate above a threshold
    TASK_REWARD = "TASK_REWARD"  # the task reward itself (a known bad choice)

    @property
    def scaled(self) -> bool:
        """Whether the reservoir scaler is applied before the cost."""
        return self not in (RewardKind.VEG, RewardKind.TASK_REWARD)


class MissingContext(ValueError):
    pass


@dataclass
class RewardContext:
    advised: bool
    report: UpdateReport | None = None
    teacher_q: np.ndarray | None = None
    intended_action: int | None = None
    task_reward: float | None = None
    joint_value_before: float | None = None
    joint_value_after: float | None = None
    tau: float | None = None
    cost: float = 0.0
    # which value estimate VEG thresholds: "next" (new observation) or
    # "post" (advised observation after the update)
    veg_at: str = "next"


def _need(ctx, *names):
    for name in names:
        if getattr(ctx, name) is None:
            raise MissingContext(f"reward context is missing {name!r}")


def raw_advising_reward(kind: RewardKind, ctx: RewardContext) -> float:
    """The ungated, uncosted reward value of ``kind``."""
    kind = RewardKind(kind)
    if kind is RewardKind.JVG:
        _need(ctx, "joint_value_before", "joint_value_after")
        return ctx.joint_value_after - ctx.joint_value_before
    if kind is RewardKind.QTR:
        _need(ctx, "teacher_q", "intended_action")
        q = np.asarray(ctx.teacher_q)
        return float(q.max() - q[ctx.intended_action])
    if kind is RewardKind.TASK_REWARD:
        _need(ctx, "task_reward")
        return float(ctx.task_reward)
    _need(ctx, "report")
    rep = ctx.report
    if kind is RewardKind.LG:
        return rep.loss_pre - rep.loss_post
    if kind is RewardKind.LGG:
        return rep.grad_sq_norm
    if kind is RewardKind.TDG:
        return abs(rep.delta_pre) - abs(rep.delta_post)
    _need(ctx, "tau")
    v_hat = rep.v_hat_next if ctx.veg_at == "next" else rep.v_hat_post
    return 1.0 if v_hat > ctx.tau else 0.0


def advising_reward(kind: RewardKind, ctx: RewardContext, scaler=None) -> float:
    """Gated, optionally rescaled, costed reward.

    Zero when the direction exchanged no advice.  When ``scaler`` is given it
    rescales the kinds that need it (everything but VEG and TASK_REWARD).
    """
    if not ctx.advised:
        return 0.0
    value = raw_advising_reward(kind, ctx)
    if scaler is not None and RewardKind(kind).scaled:
        value = scaler.scale(value)
    return value - ctx.cost


def joint_advising_reward(r_into_i: float, r_into_j: float) -> float:
    return r_into_i + r_into_j


def greedy_return(env, learners, gamma: float = 0.95) -> float:
    """Discounted return of one advice-free greedy episode on ``env``."""
    obs = env.reset()
    total, t = 0.0, 0
    while True:
        acts = [learners[k].greedy(obs[k]) for k in range(2)]
        res = env.step(acts)
        total += gamma ** t * res.reward
        t += 1
        obs = res.next_obs
        if res.done:
            return total


def estimate_joint_value(env, learners, rollouts: int = 10, rng=None,
                         gamma: float = 0.95) -> float:
    """Mean discounted return of greedy joint policies from the initial state.

    Environments and greedy policies are deterministic here, so every
    rollout returns the same value; one is simulated and reused.
    """
    if rollouts < 1:
        raise ValueError("need at least one rollout")
    return greedy_return(env.clone(), learners, gamma)
