import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lectr.advising import ReservoirScaler
from lectr.envs import RepeatedGame, hallway, oracle_value
from lectr.qlearn import TabularQ, UpdateReport, make_learner
from lectr.rewards import (MissingContext, RewardContext, RewardKind, advising_reward,
                           estimate_joint_value, joint_advising_reward, raw_advising_reward)

KINDS = list(RewardKind)


def _report(alpha=0.1, delta=1.0):
    q = TabularQ(4, 2, alpha=alpha)
    q.weights[0, 1] = 1.0 - delta
    return q.update(0, 1, 1.0, 1, True)


def _full_ctx(**kw):
    base = dict(advised=True, report=_report(), teacher_q=np.array([0.5, 0.2]),
                intended_action=1, task_reward=1.0, joint_value_before=0.3,
                joint_value_after=0.3, tau=0.4)
    base.update(kw)
    return RewardContext(**base)


@pytest.mark.parametrize("kind", KINDS)
def test_no_advice_gives_zero(kind):
    assert advising_reward(kind, _full_ctx(advised=False, cost=0.7)) == 0.0
    # missing context is irrelevant when nothing was advised
    assert advising_reward(kind, RewardContext(advised=False)) == 0.0


def test_table_examples():
    ctx = _full_ctx()
    assert advising_reward(RewardKind.QTR, ctx) == pytest.approx(0.3)
    assert advising_reward(RewardKind.TDG, ctx) == pytest.approx(0.1)
    assert advising_reward(RewardKind.LG, ctx) == pytest.approx(0.19)
    assert advising_reward(RewardKind.JVG, ctx) == 0.0
    assert advising_reward(RewardKind.TASK_REWARD, ctx) == 1.0
    assert advising_reward(RewardKind.LGG, ctx) == ctx.report.grad_sq_norm


def test_veg_threshold_on_value_estimate():
    rep = UpdateReport(0, 0, 0, 0, 0, v_hat_next=0.5, v_hat_pre=0.0, v_hat_post=0.3)
    assert advising_reward(RewardKind.VEG, _full_ctx(report=rep)) == 1.0
    assert advising_reward(RewardKind.VEG, _full_ctx(report=rep, veg_at="post")) == 0.0


def test_joint_reward_examples():
    assert joint_advising_reward(0.1, 0.0) == 0.1
    assert joint_advising_reward(0.0, 0.0) == 0.0
    rep = UpdateReport(0, 0, 0, 0, 0, v_hat_next=0.5, v_hat_pre=0.0, v_hat_post=0.5)
    one = advising_reward(RewardKind.VEG, _full_ctx(report=rep, cost=0.5))
    assert joint_advising_reward(one, one) == 1.0


@settings(max_examples=100)
@given(st.sampled_from(KINDS), st.floats(0, 5), st.floats(-2, 2), st.floats(0.01, 1))
def test_cost_invariant(kind, cost, delta, alpha):
    ctx = _full_ctx(report=_report(alpha, delta))
    costed = _full_ctx(report=ctx.report, cost=cost)
    assert advising_reward(kind, costed) == pytest.approx(advising_reward(kind, ctx) - cost)


@settings(max_examples=100)
@given(st.floats(-3, 3), st.floats(0.01, 1.0))
def test_tabular_closed_forms(delta, alpha):
    rep = _report(alpha, delta)
    ctx = _full_ctx(report=rep)
    d = rep.delta_pre
    assert raw_advising_reward(RewardKind.TDG, ctx) == pytest.approx(alpha * abs(d), abs=1e-12)
    assert raw_advising_reward(RewardKind.LG, ctx) == pytest.approx(
        d * d * (1 - (1 - alpha) ** 2), abs=1e-12)


@settings(max_examples=50)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_veg_range_and_scaler_bypass(v_hat, tau):
    rep = UpdateReport(0, 0, 0, 0, 0, v_hat_next=v_hat, v_hat_pre=0, v_hat_post=v_hat)
    scaler = ReservoirScaler(10)
    out = advising_reward(RewardKind.VEG, _full_ctx(report=rep, tau=tau), scaler)
    assert out in (0.0, 1.0)
    assert scaler.count == 0


def test_scaled_kinds_pass_through_scaler():
    scaler = ReservoirScaler(10)
    assert advising_reward(RewardKind.QTR, _full_ctx(), scaler) == 1.0
    assert scaler.count == 1


@pytest.mark.parametrize("kind,missing", [(RewardKind.QTR, "teacher_q"),
                                          (RewardKind.JVG, "joint_value_after"),
                                          (RewardKind.VEG, "tau"),
                                          (RewardKind.TDG, "report"),
                                          (RewardKind.TASK_REWARD, "task_reward")])
def test_missing_context(kind, missing):
    with pytest.raises(MissingContext):
        advising_reward(kind, _full_ctx(**{missing: None}))


def test_joint_value_of_optimal_repeated_policies():
    env = RepeatedGame()
    learners = [TabularQ(6, 2), TabularQ(6, 2)]
    learners[0].weights[:, 0] = 1.0
    learners[1].weights[:, 1] = 1.0
    assert estimate_joint_value(env, learners) == pytest.approx(sum(0.95 ** t for t in range(5)), abs=1e-9)
    assert estimate_joint_value(env, learners) == pytest.approx(oracle_value(env), abs=1e-9)
    with pytest.raises(ValueError):
        estimate_joint_value(env, learners, rollouts=0)


def test_joint_value_of_fresh_hallway_policies():
    env = hallway()
    learners = [make_learner(env, "tilecoded", agent=k) for k in range(2)]
    # lowest-index ties: both walk left; only agent 0 can reach its goal
    assert estimate_joint_value(env, learners) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_joint_value_bounds_for_random_policies(seed):
    env = hallway()
    rng = np.random.default_rng(seed)
    learners = [make_learner(env, "tilecoded", agent=k) for k in range(2)]
    for q in learners:
        q.weights[:] = rng.normal(size=q.weights.shape)
    v = estimate_joint_value(env, learners, rollouts=100)
    assert 0.0 <= v <= 0.95 ** 5 + 1e-12


def test_estimate_does_not_touch_live_env():
    env = hallway()
    env.reset()
    env.step((1, 1))
    before = env.signature(), env._observe()
    estimate_joint_value(env, [make_learner(env, "tilecoded") for _ in range(2)])
    assert (env.signature(), env._observe()) == before
