"""Learned advising policies: four decentralized actors and a centralized critic.

Actor order everywhere is (ask_i, ask_j, teach_i, teach_j).  A student actor
chooses between NO_REQUEST (0) and REQUEST (1).  A teacher actor outputs an
action index from its peer's action space, or the extra last index meaning
"no advice".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import Adam, Mlp, gumbel_softmax, sample_gumbel, softmax, softmax_backward

NO_REQUEST, REQUEST = 0, 1
ASK_I, ASK_J, TEACH_I, TEACH_J = range(4)


class IncompatibleObservation(ValueError):
    pass


def build_advising_obs(joint_obs, learners, encode, knowledge=None):
    """Advising observations for both agents in both roles.

    ``knowledge`` optionally replaces each agent's own Q-function in its
    teacher observation (used when a fixed source policy is the teacher's
    knowledge in transfer runs).
    """
    o_i, o_j = joint_obs
    l_i, l_j = learners
    k_i, k_j = knowledge if knowledge is not None else learners
    e_i, e_j = encode(o_i), encode(o_j)
    if e_i.shape != e_j.shape:
        raise IncompatibleObservation("agents use different observation encodings")
    q_i, q_j = l_i.q_values(o_i), l_j.q_values(o_j)
    own_i_at_j = k_i.q_values(o_j)
    own_j_at_i = k_j.q_values(o_i)
    if own_i_at_j.shape != q_j.shape or own_j_at_i.shape != q_i.shape:
        raise IncompatibleObservation("teacher and student Q-vectors differ in length")
    return (
        np.concatenate([e_i, q_i]),
        np.concatenate([e_j, q_j]),
        np.concatenate([e_j, q_j, own_i_at_j]),
        np.concatenate([e_i, q_i, own_j_at_i]),
    )


def advising_obs_dims(encoded_dim: int, n_actions) -> tuple[int, int, int, int]:
    n_i, n_j = n_actions
    return (encoded_dim + n_i, encoded_dim + n_j,
            encoded_dim + 2 * n_j, encoded_dim + 2 * n_i)


@dataclass
class AdvisingActionSet:
    """Raw indices chosen by the four actors."""

    indices: tuple[int, int, int, int]
    n_actions: tuple[int, int]

    @property
    def requests(self) -> tuple[bool, bool]:
        return (self.indices[ASK_I] == REQUEST, self.indices[ASK_J] == REQUEST)

    def teacher_advice(self, teacher: int):
        """Action ``teacher`` offers its peer, or None for no advice."""
        idx = self.indices[TEACH_I + teacher]
        return None if idx == self.n_actions[1 - teacher] else idx

    def advice_for(self, student: int):
        """Advice actually delivered to ``student``: it must have asked."""
        if not self.requests[student]:
            return None
        return self.teacher_advice(1 - student)

    def onehot(self) -> np.ndarray:
        dims = action_dims(self.n_actions)
        out = np.zeros(sum(dims))
        start = 0
        for idx, d in zip(self.indices, dims):
            out[start + idx] = 1.0
            start += d
        return out


def action_dims(n_actions) -> tuple[int, int, int, int]:
    n_i, n_j = n_actions
    return (2, 2, n_j + 1, n_i + 1)


class ReplayBuffer:
    """Fixed-capacity ring buffer of advising experiences."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int = 100_000):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((self.capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(self.capacity, dtype=np.float32)
        self.next_obs = np.zeros((self.capacity, obs_dim), dtype=np.float32)
        self.size = 0
        self.pos = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, reward, next_obs) -> None:
        self.obs[self.pos] = obs
        self.act[self.pos] = act
        self.rew[self.pos] = reward
        self.next_obs[self.pos] = next_obs
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(self.size, size=batch_size)
        return (self.obs[idx].astype(float), self.act[idx].astype(float),
                self.rew[idx].astype(float), self.next_obs[idx].astype(float))


class ReservoirScaler:
    """Maps raw rewards to [-1, 1] through the empirical CDF of a reservoir."""

    def __init__(self, capacity: int = 1000, rng: np.random.Generator | None = None):
        self.capacity = int(capacity)
        self.values: list[float] = []
        self.count = 0
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def insert(self, x: float) -> None:
        self.count += 1
        if len(self.values) < self.capacity:
            self.values.append(float(x))
        else:
            k = int(self.rng.integers(self.count))
            if k < self.capacity:
                self.values[k] = float(x)

    def cdf(self, x: float) -> float:
        return sum(v <= x for v in self.values) / len(self.values)

    def scale(self, x: float) -> float:
        self.insert(x)
        return 2.0 * self.cdf(x) - 1.0


def scale_reward(scaler: ReservoirScaler, raw: float) -> float:
    return scaler.scale(raw)


class AdvisingPolicySet:
    """Actors, centralized critic with a Polyak-averaged target, replay."""

    def __init__(self, obs_dims, n_actions, rng: np.random.Generator, hidden: int = 32,
                 n_hidden: int = 3, lr: float = 1e-3, gamma: float = 0.99,
                 polyak: float = 0.01, temperature: float = 1.0,
                 buffer_capacity: int = 100_000, batch_size: int = 64,
                 reservoir_capacity: int = 1000, entropy: float = 0.0):
        self.obs_dims = tuple(int(d) for d in obs_dims)
        self.n_actions = tuple(int(n) for n in n_actions)
        self.act_dims = action_dims(self.n_actions)
        self.gamma = gamma
        self.polyak = polyak
        self.temperature = temperature
        # weight of the actors' entropy bonus
        self.entropy = entropy
        self.batch_size = batch_size
        self.lr = lr
        hid = [hidden] * n_hidden
        self.actors = [Mlp([d_in, *hid, d_out], rng)
                       for d_in, d_out in zip(self.obs_dims, self.act_dims)]
        self.critic = Mlp([sum(self.obs_dims) + sum(self.act_dims), *hid, 1], rng)
        self.critic_target = self.critic.copy()
        self.actor_opt = [Adam(a.params, lr) for a in self.actors]
        self.critic_opt = Adam(self.critic.params, lr)
        self.buffer = ReplayBuffer(sum(self.obs_dims), sum(self.act_dims), buffer_capacity)
        self.scaler = ReservoirScaler(reservoir_capacity, rng)
        self._obs_slices = _slices(self.obs_dims)
        self._act_slices = _slices(self.act_dims)

    def store(self, obs, actions: AdvisingActionSet, reward: float, next_obs) -> None:
        self.buffer.add(np.concatenate(obs), actions.onehot(), reward, np.concatenate(next_obs))

    def probabilities(self, obs) -> list[np.ndarray]:
        return [softmax(actor(o, cache=False)) for actor, o in zip(self.actors, obs)]

    def sync_target(self) -> None:
        self.critic_target.load_from(self.critic)

    # batched helpers over flat (batch, sum(obs_dims)) arrays
    def _greedy_actions(self, obs_flat: np.ndarray) -> np.ndarray:
        blocks = []
        for actor, s, d in zip(self.actors, self._obs_slices, self.act_dims):
            logits = actor(obs_flat[:, s], cache=False)
            blocks.append(np.eye(d)[np.argmax(logits, axis=1)])
        return np.concatenate(blocks, axis=1)

    def q(self, obs_flat, act_flat, target: bool = False) -> np.ndarray:
        net = self.critic_target if target else self.critic
        return net(np.concatenate([obs_flat, act_flat], axis=1), cache=False)[:, 0]


def _slices(dims):
    out, start = [], 0
    for d in dims:
        out.append(slice(start, start + d))
        start += d
    return out


def select_advising_actions(policy_set: AdvisingPolicySet, obs, rng: np.random.Generator,
                            mode: str = "sample") -> AdvisingActionSet:
    """Each actor maps only its own observation block to its own action."""
    indices = []
    for actor, o in zip(policy_set.actors, obs):
        logits = actor(o, cache=False)
        if mode == "greedy":
            indices.append(int(np.argmax(logits)))
        elif mode == "sample":
            indices.append(int(np.argmax(logits + sample_gumbel(logits.shape, rng))))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return AdvisingActionSet(tuple(indices), policy_set.n_actions)


def critic_update(ps: AdvisingPolicySet, batch) -> float:
    """One Adam step on the squared TD error; returns the pre-step loss."""
    obs, act, rew, next_obs = batch
    next_act = ps._greedy_actions(next_obs)
    target = rew + ps.gamma * ps.q(next_obs, next_act, target=True)
    x = np.concatenate([obs, act], axis=1)
    pred = ps.critic(x)[:, 0]
    err = pred - target
    loss = float(np.mean(err ** 2))
    grads, _ = ps.critic.backward((2.0 * err / len(err))[:, None])
    ps.critic_opt.step(ps.critic.params, grads)
    ps.critic_target.load_from(ps.critic, ps.polyak)
    return loss


def _entropy(logits: np.ndarray) -> np.ndarray:
    p = softmax(logits)
    return -(p * np.log(p + 1e-12)).sum(axis=-1)


def actor_objective(ps: AdvisingPolicySet, batch, k: int, noise: np.ndarray,
                    hard: bool = True) -> float:
    """Mean critic value with actor ``k``'s batch actions replaced by its own
    (hard or soft) Gumbel-Softmax sample, plus the weighted policy entropy."""
    obs, act, _, _ = batch
    logits = ps.actors[k](obs[:, ps._obs_slices[k]], cache=False)
    h, s = gumbel_softmax(logits, ps.temperature, None, noise=noise)
    act = act.copy()
    act[:, ps._act_slices[k]] = h if hard else s
    return float(ps.q(obs, act).mean() + ps.entropy * _entropy(logits).mean())


def actor_gradients(ps: AdvisingPolicySet, batch, k: int, noise: np.ndarray,
                    straight_through: bool = True):
    """Gradients of ``-actor_objective`` w.r.t. actor ``k``'s parameters.

    With ``straight_through`` the critic is evaluated at the hard one-hot
    sample while gradients follow the soft sample.
    """
    obs, act, _, _ = batch
    actor = ps.actors[k]
    o_k = obs[:, ps._obs_slices[k]]
    logits = actor(o_k)
    hard, soft = gumbel_softmax(logits, ps.temperature, None, noise=noise)
    act = act.copy()
    act[:, ps._act_slices[k]] = hard if straight_through else soft
    x = np.concatenate([obs, act], axis=1)
    ps.critic(x)
    n = len(x)
    _, dx = ps.critic.backward(np.full((n, 1), 1.0 / n), param_grads=False)
    d_act = dx[:, obs.shape[1]:][:, ps._act_slices[k]]
    d_logits = softmax_backward(soft, d_act, ps.temperature)
    if ps.entropy:
        p = softmax(logits)
        log_p = np.log(p + 1e-12)
        h = -(p * log_p).sum(axis=1, keepdims=True)
        # dH/dz = -p (log p + H)
        d_logits = d_logits - ps.entropy * p * (log_p + h) / n
    grads, _ = actor.backward(-d_logits)
    return grads


def actor_update(ps: AdvisingPolicySet, batch, rng: np.random.Generator) -> list[float]:
    """One Adam step per actor along the straight-through policy gradient."""
    norms = []
    for k in range(4):
        noise = sample_gumbel((len(batch[0]), ps.act_dims[k]), rng)
        grads = actor_gradients(ps, batch, k, noise)
        norms.append(float(np.sqrt(sum(float((g * g).sum()) for g in grads))))
        ps.actor_opt[k].step(ps.actors[k].params, grads)
    return norms
