import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lectr.envs import RepeatedGame, hallway, room
from lectr.qlearn import TabularQ, TileCodedQ, make_learner


def test_fresh_update_reports():
    q = TabularQ(4, 2, alpha=0.1)
    rep = q.update(0, 1, 1.0, 1, True)
    assert rep.delta_pre == 1.0
    assert rep.delta_post == pytest.approx(0.9, abs=1e-15)
    assert rep.loss_pre == 1.0
    assert rep.grad_sq_norm == 4.0
    assert q.q_values(0)[1] == pytest.approx(0.1)
    assert rep.v_hat_pre == 0.0 and rep.v_hat_post == pytest.approx(0.1)


def test_zero_reward_zero_table_is_silent():
    q = TabularQ(4, 2)
    rep = q.update(0, 0, 0.0, 1, False)
    assert rep.delta_pre == 0.0 and rep.grad_sq_norm == 0.0
    assert not q.weights.any()


def test_bootstrap_target_uses_next_max():
    q = TabularQ(3, 2, alpha=0.5, gamma=0.9)
    q.weights[1] = [0.2, 0.6]
    rep = q.update(0, 0, 0.5, 1, False)
    assert rep.delta_pre == pytest.approx(0.5 + 0.9 * 0.6)
    assert rep.v_hat_next == pytest.approx(0.6)
    q2 = TabularQ(3, 2, alpha=0.5, gamma=0.9)
    q2.weights[1] = [0.2, 0.6]
    assert q2.update(0, 0, 0.5, 1, True).delta_pre == pytest.approx(0.5)


@settings(max_examples=60)
@given(st.floats(-5, 5), st.floats(0.01, 1.0), st.floats(0, 0.99),
       st.integers(0, 2), st.integers(0, 1), st.booleans())
def test_td_shrink_identity(reward, alpha, gamma, obs, action, done):
    """Tabular update of an observation distinct from its successor scales
    the TD error by exactly (1 - alpha)."""
    q = TabularQ(4, 2, alpha=alpha, gamma=gamma)
    q.weights = np.arange(8, dtype=float).reshape(4, 2) / 7.0
    rep = q.update(obs, action, reward, 3, done)
    assert rep.delta_post == pytest.approx((1 - alpha) * rep.delta_pre, rel=1e-12, abs=1e-12)
    assert rep.loss_post == pytest.approx(rep.delta_post ** 2, rel=1e-12, abs=1e-15)


def test_tile_coded_update_arithmetic():
    env = hallway()
    q = TileCodedQ(env.obs_dims, env.obs_coords, 2, n_tilings=4)
    assert q.alpha == pytest.approx(0.025)
    rep = q.update(6, 1, 1.0, 7, True)
    assert len(q.features(6)) == 4
    # each of 4 tiles moves by alpha * delta
    assert q.q_values(6)[1] == pytest.approx(4 * q.alpha * rep.delta_pre)
    assert q.q_values(6)[1] == pytest.approx(0.1)
    assert rep.grad_sq_norm == pytest.approx(16.0)


def test_tile_features_active_one_per_tiling():
    env = room()
    q = TileCodedQ(env.obs_dims, env.obs_coords, 4)
    for obs in range(env.n_obs):
        f = q.features(obs)
        assert len(set(f)) == 4
        assert all(k * q.tiles_per_tiling <= v < (k + 1) * q.tiles_per_tiling
                   for k, v in enumerate(f))


def test_tilings_generalise_to_neighbours():
    env = hallway()
    q = TileCodedQ(env.obs_dims, env.obs_coords, 2)
    shared = len(set(q.features(5)) & set(q.features(6)))
    assert 0 < shared < 4
    assert len(set(q.features(0)) & set(q.features(16))) == 0


def test_value_estimate_and_greedy():
    q = TabularQ(2, 2)
    q.weights[0] = [0.3, 0.8]
    assert q.value_estimate(0) == 0.8
    assert q.greedy(0) == 1
    assert q.value_estimate(1) == 0.0 and q.greedy(1) == 0


def test_act_exploration_is_uniform():
    q = TabularQ(1, 4, epsilon=1.0)
    rng = np.random.default_rng(0)
    counts = np.bincount([q.act(0, rng) for _ in range(10_000)], minlength=4)
    p = 0.25
    sigma = np.sqrt(10_000 * p * (1 - p))
    assert np.all(np.abs(counts - 2500) < 3 * sigma)


def test_act_zero_epsilon_is_greedy():
    q = TabularQ(1, 3, epsilon=0.0)
    q.weights[0] = [0.0, 1.0, 0.5]
    rng = np.random.default_rng(0)
    assert {q.act(0, rng) for _ in range(100)} == {1}


def test_random_tie_break_only_when_exploring():
    q = TabularQ(1, 2, epsilon=0.0, tie_break="random")
    rng = np.random.default_rng(1)
    assert {q.act(0, rng) for _ in range(100)} == {0, 1}
    assert q.act(0, rng, greedy=True) == 0
    with pytest.raises(ValueError):
        TabularQ(1, 2, tie_break="last")


def test_copy_is_independent():
    q = TabularQ(2, 2)
    c = q.copy()
    c.weights[0, 0] = 1.0
    assert q.weights[0, 0] == 0.0


def test_make_learner_kinds():
    assert make_learner(RepeatedGame(), "tabular").weights.shape == (6, 2)
    assert make_learner(room(), "tilecoded").n_actions == 4
    with pytest.raises(ValueError):
        make_learner(room(), "deep")


def _corridor_value_iteration(length, horizon, gamma):
    # states 0..length-1, goal at the right end, actions left/right
    v = np.zeros(length)
    for _ in range(horizon):
        new = np.zeros(length)
        for s in range(length - 1):
            best = 0.0
            for step in (-1, 1):
                s2 = min(max(s + step, 0), length - 1)
                r = 1.0 if s2 == length - 1 else 0.0
                best = max(best, r + (0.0 if r else gamma * v[s2]))
            new[s] = best
        v = new
    return v[0]


def test_single_agent_corridor_matches_oracle():
    length, horizon, gamma = 7, 20, 0.95
    q = TabularQ(length, 2, alpha=0.2, gamma=gamma, epsilon=0.3, tie_break="random")
    rng = np.random.default_rng(3)

    def run(greedy):
        s, ret = 0, 0.0
        for t in range(horizon):
            a = q.act(s, rng, greedy=greedy)
            s2 = min(max(s + (1 if a else -1), 0), length - 1)
            r = 1.0 if s2 == length - 1 else 0.0
            if not greedy:
                q.update(s, a, r, s2, r > 0)
            ret += gamma ** t * r
            s = s2
            if r:
                break
        return ret

    for _ in range(2000):
        run(False)
    assert run(True) == pytest.approx(_corridor_value_iteration(length, horizon, gamma),
                                      abs=1e-6)
    assert q.value_estimate(0) == pytest.approx(gamma ** (length - 2), abs=1e-6)
