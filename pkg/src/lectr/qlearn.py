"""Online independent Q-learners: tabular and tile-coded.

Both are linear in a sparse binary feature vector; the tabular learner is the
special case of one tiling with unit tiles.  ``update`` returns every
per-transition quantity the advising rewards need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class UpdateReport:
    delta_pre: float
    delta_post: float
    loss_pre: float
    loss_post: float
    grad_sq_norm: float
    # greedy value at the new observation, after the update
    v_hat_next: float
    # greedy value at the updated observation, before and after the update
    v_hat_pre: float
    v_hat_post: float


class LinearQ:
    """Q(o, a) = sum of the weights of the active features of o for action a."""

    kind = "linear"

    def __init__(self, n_features: int, n_actions: int, alpha: float,
                 gamma: float = 0.95, epsilon: float = 0.1,
                 tie_break: str = "first"):
        if tie_break not in ("first", "random"):
            raise ValueError(f"tie_break must be 'first' or 'random', got {tie_break!r}")
        self.n_actions = int(n_actions)
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.epsilon = float(epsilon)
        self.tie_break = tie_break
        self.weights = np.zeros((int(n_features), self.n_actions))

    def features(self, obs) -> np.ndarray:
        raise NotImplementedError

    def q_values(self, obs) -> np.ndarray:
        return self.weights[self.features(obs)].sum(axis=0)

    def value_estimate(self, obs) -> float:
        return float(self.q_values(obs).max())

    def greedy(self, obs) -> int:
        return int(np.argmax(self.q_values(obs)))

    def act(self, obs, rng: np.random.Generator, greedy: bool = False) -> int:
        """Epsilon-greedy action; ``greedy=True`` disables exploration.

        Greedy ties go to the lowest index unless the learner was built with
        ``tie_break="random"`` and is exploring.
        """
        q = self.q_values(obs)
        if greedy:
            return int(np.argmax(q))
        if self.epsilon > 0 and rng.random() < self.epsilon:
            return int(rng.integers(self.n_actions))
        if self.tie_break == "random":
            best = np.flatnonzero(q == q.max())
            if len(best) > 1:
                return int(best[rng.integers(len(best))])
            return int(best[0])
        return int(np.argmax(q))

    def td_error(self, obs, action, reward, next_obs, done) -> float:
        target = reward
        if not done:
            target += self.gamma * self.value_estimate(next_obs)
        return float(target - self.q_values(obs)[action])

    def update(self, obs, action, reward, next_obs, done) -> UpdateReport:
        feats = self.features(obs)
        v_pre = self.value_estimate(obs)
        delta = self.td_error(obs, action, reward, next_obs, done)
        # semi-gradient of delta^2 w.r.t. the weights is -2*delta on each
        # active feature of the taken action
        grad_sq = 4.0 * delta * delta * len(feats)
        self.weights[feats, action] += self.alpha * delta
        delta_post = self.td_error(obs, action, reward, next_obs, done)
        return UpdateReport(
            delta_pre=delta,
            delta_post=delta_post,
            loss_pre=delta * delta,
            loss_post=delta_post * delta_post,
            grad_sq_norm=grad_sq,
            v_hat_next=self.value_estimate(next_obs),
            v_hat_pre=v_pre,
            v_hat_post=self.value_estimate(obs),
        )

    def copy(self):
        out = object.__new__(type(self))
        out.__dict__.update(self.__dict__)
        out.weights = self.weights.copy()
        return out

    # persistence
    def meta(self) -> dict:
        return {"kind": self.kind, "n_actions": self.n_actions, "alpha": self.alpha,
                "gamma": self.gamma, "epsilon": self.epsilon,
                "tie_break": self.tie_break}

    def arrays(self) -> dict:
        return {"weights": self.weights}


class TabularQ(LinearQ):
    kind = "tabular"

    def __init__(self, n_obs: int, n_actions: int, alpha: float = 0.1,
                 gamma: float = 0.95, epsilon: float = 0.1, tie_break: str = "first"):
        super().__init__(n_obs, n_actions, alpha, gamma, epsilon, tie_break)
        self.n_obs = int(n_obs)

    def features(self, obs) -> np.ndarray:
        return np.array([obs])

    def meta(self) -> dict:
        return {**super().meta(), "n_obs": self.n_obs}


class TileCodedQ(LinearQ):
    """Grid tile coding with uniformly displaced tilings.

    ``coords`` maps an observation to integer grid coordinates.  Tiling ``k``
    is shifted by ``k * width / n_tilings`` times the displacement vector
    (1, 3, ...) so the tilings are asymmetrically offset.
    """

    kind = "tilecoded"

    def __init__(self, dims, coords, n_actions: int, n_tilings: int = 4,
                 tile_width: float = 2.0, alpha: float | None = None,
                 gamma: float = 0.95, epsilon: float = 0.1, tie_break: str = "first"):
        self.dims = tuple(int(d) for d in dims)
        self.n_tilings = int(n_tilings)
        self.tile_width = float(tile_width)
        self.coords = coords
        displacement = np.array([2 * k + 1 for k in range(len(self.dims))], dtype=float)
        self.offsets = np.array([
            (k * self.tile_width / self.n_tilings * displacement) % self.tile_width
            for k in range(self.n_tilings)
        ])
        self.tiles_per_dim = tuple(int(np.ceil(d / self.tile_width)) + 1 for d in self.dims)
        self.tiles_per_tiling = int(np.prod(self.tiles_per_dim))
        if alpha is None:
            alpha = 0.1 / self.n_tilings
        super().__init__(self.n_tilings * self.tiles_per_tiling, n_actions, alpha,
                         gamma, epsilon, tie_break)
        self._cache: dict = {}

    def features(self, obs) -> np.ndarray:
        feats = self._cache.get(obs)
        if feats is None:
            c = np.asarray(self.coords(obs), dtype=float)
            idx = np.floor((c[None, :] + self.offsets) / self.tile_width).astype(int)
            flat = np.ravel_multi_index(idx.T, self.tiles_per_dim)
            feats = flat + np.arange(self.n_tilings) * self.tiles_per_tiling
            self._cache[obs] = feats
        return feats

    def meta(self) -> dict:
        return {**super().meta(), "dims": list(self.dims), "n_tilings": self.n_tilings,
                "tile_width": self.tile_width}


def make_learner(env, kind: str, alpha=None, gamma: float = 0.95, epsilon: float = 0.1,
                 tie_break: str = "first", n_tilings: int = 4, tile_width: float = 2.0,
                 agent: int = 0) -> LinearQ:
    n_actions = env.n_actions[agent]
    if kind == "tabular":
        return TabularQ(env.n_obs, n_actions, 0.1 if alpha is None else alpha,
                        gamma, epsilon, tie_break)
    if kind == "tilecoded":
        return TileCodedQ(env.obs_dims, env.obs_coords, n_actions, n_tilings,
                          tile_width, alpha, gamma, epsilon, tie_break)
    raise ValueError(f"unknown learner kind {kind!r}")
