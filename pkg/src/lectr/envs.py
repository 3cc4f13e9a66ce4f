"""Two-agent benchmark games: the repeated matrix game, Hallway and Room.

All environments are deterministic. Each agent observes only its own position
(or the step index in the repeated game); the team shares a single reward.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

# Room action indices in the un-rotated frame.
UP, RIGHT, DOWN, LEFT = 0, 1, 2, 3
# Hallway has only horizontal moves; index 0 is "left" so that zero-valued
# greedy learners drift left.
HALL_LEFT, HALL_RIGHT = 0, 1

_ROOM_MOVES = {UP: (0, -1), RIGHT: (1, 0), DOWN: (0, 1), LEFT: (-1, 0)}
_HALL_MOVES = {HALL_LEFT: (-1, 0), HALL_RIGHT: (1, 0)}

REPEATED_PAYOFF = ((0.0, 1.0), (0.1, 0.0))


class EpisodeFinished(RuntimeError):
    """Raised when stepping an environment whose episode already ended."""


@dataclass
class StepResult:
    reward: float
    next_obs: tuple[int, int]
    done: bool


@dataclass(frozen=True)
class ActionRotation:
    """Rotation of the four compass actions by a multiple of 90 degrees.

    ``apply(k)`` returns the index that denotes, in the rotated frame, the
    same physical move as index ``k`` in the un-rotated frame.  With 90
    degrees the rotated frame lists (left, up, right, down), so "up" (0)
    maps to 1.
    """

    degrees: int = 0

    def __post_init__(self):
        if self.degrees % 90 != 0:
            raise ValueError(f"rotation must be a multiple of 90, got {self.degrees}")

    @property
    def steps(self) -> int:
        return (self.degrees // 90) % 4

    @property
    def permutation(self) -> tuple[int, ...]:
        return tuple(self.apply(k) for k in range(4))

    def apply(self, action: int) -> int:
        return rotate_action(self, action)

    def inverse(self) -> "ActionRotation":
        return ActionRotation((-self.degrees) % 360)


def rotate_action(rotation: ActionRotation, action_index: int) -> int:
    if not 0 <= action_index < 4:
        raise ValueError(f"action index {action_index} out of range for 4 actions")
    return (action_index + rotation.steps) % 4


class RepeatedGame:
    """Five-step repeated 2x2 coordination game.

    Agent i's action picks the payoff row, agent j's the column.  Both agents
    observe the current step index.
    """

    name = "repeated"

    def __init__(self, horizon: int = 5, payoff=REPEATED_PAYOFF):
        self.payoff = np.asarray(payoff, dtype=float)
        self.horizon = int(horizon)
        self.t = 0
        self.done = False
        self.n_actions = (2, 2)

    # observation space
    @property
    def n_obs(self) -> int:
        return self.horizon + 1

    @property
    def obs_dims(self) -> tuple[int, ...]:
        return (self.horizon + 1,)

    def obs_coords(self, obs: int) -> tuple[int, ...]:
        return (obs,)

    def encode(self, obs: int) -> np.ndarray:
        out = np.zeros(self.horizon + 1)
        out[obs] = 1.0
        return out

    @property
    def encoded_dim(self) -> int:
        return self.horizon + 1

    def reset(self, rng=None) -> tuple[int, int]:
        self.t = 0
        self.done = False
        return (0, 0)

    def step(self, joint_action) -> StepResult:
        if self.done:
            raise EpisodeFinished("step() called on a finished episode")
        a_i, a_j = joint_action
        for a, n in zip(joint_action, self.n_actions):
            if not 0 <= a < n:
                raise ValueError(f"action {a} outside action space of size {n}")
        reward = float(self.payoff[a_i, a_j])
        self.t += 1
        self.done = self.t >= self.horizon
        return StepResult(reward, (self.t, self.t), self.done)

    def clone(self) -> "RepeatedGame":
        return copy.deepcopy(self)

    def signature(self) -> dict:
        return {"domain": self.name, "horizon": self.horizon,
                "n_obs": self.n_obs, "n_actions": list(self.n_actions)}


@dataclass
class GridWorld:
    """Two agents on a grid who must occupy the two goal cells at once.

    Reward 1 is granted on the transition that first puts one agent on each
    goal cell; the episode then ends.  Agents may share a cell, and moves
    off the grid leave the agent in place.
    """

    width: int
    height: int
    goal_cells: tuple[tuple[int, int], tuple[int, int]]
    start_cells: tuple[tuple[int, int], tuple[int, int]]
    horizon: int
    name: str = "grid"
    rotations: tuple[int, int] = (0, 0)
    positions: list = field(default_factory=list)
    t: int = 0
    done: bool = False

    def __post_init__(self):
        self.goal_cells = tuple(tuple(c) for c in self.goal_cells)
        self.start_cells = tuple(tuple(c) for c in self.start_cells)
        self.rotations = tuple(int(r) for r in self.rotations)
        if self.goal_cells[0] == self.goal_cells[1]:
            raise ValueError("goal cells must be distinct")
        for c in self.goal_cells + self.start_cells:
            if not self._inside(c):
                raise ValueError(f"cell {c} outside {self.width}x{self.height} grid")
        if self.height == 1 and any(r % 360 for r in self.rotations):
            raise ValueError("action rotations need the four-action room layout")
        self._rot = tuple(ActionRotation(r) for r in self.rotations)
        if not self.positions:
            self.positions = list(self.start_cells)

    @property
    def moves(self) -> dict:
        return _HALL_MOVES if self.height == 1 else _ROOM_MOVES

    @property
    def n_actions(self) -> tuple[int, int]:
        n = len(self.moves)
        return (n, n)

    @property
    def n_obs(self) -> int:
        return self.width * self.height

    @property
    def obs_dims(self) -> tuple[int, ...]:
        return (self.width,) if self.height == 1 else (self.width, self.height)

    def cell_index(self, cell) -> int:
        x, y = cell
        return y * self.width + x

    def index_cell(self, obs: int) -> tuple[int, int]:
        return (obs % self.width, obs // self.width)

    def obs_coords(self, obs: int) -> tuple[int, ...]:
        x, y = self.index_cell(obs)
        return (x,) if self.height == 1 else (x, y)

    @property
    def encoded_dim(self) -> int:
        return self.width if self.height == 1 else self.width + self.height

    def encode(self, obs: int) -> np.ndarray:
        # one-hot column, concatenated with one-hot row for 2-D grids
        x, y = self.index_cell(obs)
        out = np.zeros(self.encoded_dim)
        out[x] = 1.0
        if self.height > 1:
            out[self.width + y] = 1.0
        return out

    def _inside(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def _observe(self) -> tuple[int, int]:
        return tuple(self.cell_index(p) for p in self.positions)

    def physical_action(self, agent: int, action: int) -> int:
        """Map an agent's own action index to the un-rotated move index."""
        if self.height == 1:
            return action
        return self._rot[agent].inverse().apply(action)

    def reset(self, rng=None) -> tuple[int, int]:
        self.positions = list(self.start_cells)
        self.t = 0
        self.done = False
        return self._observe()

    def at_goals(self) -> bool:
        p = tuple(self.positions)
        g = self.goal_cells
        return p == g or p == (g[1], g[0])

    def step(self, joint_action) -> StepResult:
        if self.done:
            raise EpisodeFinished("step() called on a finished episode")
        n = len(self.moves)
        new = []
        for agent, (a, pos) in enumerate(zip(joint_action, self.positions)):
            if not 0 <= a < n:
                raise ValueError(f"action {a} outside action space of size {n}")
            dx, dy = self.moves[self.physical_action(agent, a)]
            cand = (pos[0] + dx, pos[1] + dy)
            new.append(cand if self._inside(cand) else pos)
        self.positions = new
        self.t += 1
        reward = 1.0 if self.at_goals() else 0.0
        self.done = reward > 0 or self.t >= self.horizon
        return StepResult(reward, self._observe(), self.done)

    def clone(self) -> "GridWorld":
        return copy.deepcopy(self)

    def signature(self) -> dict:
        return {"domain": self.name, "width": self.width, "height": self.height,
                "n_obs": self.n_obs, "n_actions": list(self.n_actions)}


def hallway(start_cells=(6, 10), goal_cells=(0, 16), length: int = 17,
            horizon: int = 15) -> GridWorld:
    return GridWorld(
        width=length, height=1,
        goal_cells=tuple((g, 0) for g in goal_cells),
        start_cells=tuple((s, 0) for s in start_cells),
        horizon=horizon, name="hallway",
    )


def room(start_cells=((6, 2), (10, 2)), goal_cells=((0, 2), (16, 2)),
         width: int = 17, height: int = 5, horizon: int = 60,
         rotations=(0, 0)) -> GridWorld:
    return GridWorld(
        width=width, height=height, goal_cells=goal_cells,
        start_cells=start_cells, horizon=horizon, name="room",
        rotations=rotations,
    )


def flip(env: GridWorld, axis: str) -> GridWorld:
    """Mirror start and goal cells across ``axis`` ("horizontal" mirrors
    columns, "vertical" mirrors rows)."""
    if not isinstance(env, GridWorld):
        raise TypeError("flip() applies to grid domains only")
    if axis == "none":
        return env.clone()

    def mirror(c):
        x, y = c
        if axis == "horizontal":
            return (env.width - 1 - x, y)
        if axis == "vertical":
            return (x, env.height - 1 - y)
        raise ValueError(f"unknown flip axis {axis!r}")

    out = env.clone()
    out.start_cells = tuple(mirror(c) for c in env.start_cells)
    out.goal_cells = tuple(mirror(c) for c in env.goal_cells)
    out.reset()
    return out


def make_env(domain: str, **overrides):
    if domain == "repeated":
        return RepeatedGame(**overrides)
    if domain == "hallway":
        return hallway(**overrides)
    if domain == "room":
        return room(**overrides)
    raise ValueError(f"unknown domain {domain!r}")


def oracle_value(env, gamma: float = 0.95) -> float:
    """Optimal discounted team return from the initial state.

    Brute-force value iteration over the full joint state (positions and
    step count), used to normalise learning curves and to check learners.
    """
    if isinstance(env, RepeatedGame):
        best = float(env.payoff.max())
        return sum(best * gamma ** t for t in range(env.horizon))

    n = env.n_obs
    # per-agent successor cell for every (cell, own action)
    succ = []
    for agent in range(2):
        table = np.empty((n, env.n_actions[agent]), dtype=int)
        for obs in range(n):
            x, y = env.index_cell(obs)
            for a in range(env.n_actions[agent]):
                dx, dy = env.moves[env.physical_action(agent, a)]
                cand = (x + dx, y + dy)
                table[obs, a] = env.cell_index(cand if env._inside(cand) else (x, y))
        succ.append(table)
    g0, g1 = (env.cell_index(c) for c in env.goal_cells)
    reward = np.zeros((n, n))
    reward[g0, g1] = reward[g1, g0] = 1.0
    ni = succ[0][:, :, None, None]
    nj = succ[1][None, None, :, :]
    value = np.zeros((n, n))
    for _ in range(env.horizon):
        r = reward[ni, nj]
        q = r + gamma * (1.0 - r) * value[ni, nj]
        value = q.max(axis=(1, 3))
    si, sj = (env.cell_index(c) for c in env.start_cells)
    return float(value[si, sj])
