"""FrozenLake-style maze environments.

Cell alphabet: '.' free, '#' wall, 'R' risky (higher step cost), 'G'
goal (no cost), 'S' start. Moving into a wall or off the grid keeps the
position (and still costs the step). In cyclic mode every action taken
at a goal teleports the agent back to the start, which makes the chain
irreducible and the spectral machinery applicable.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import InputError
from .model import MdpModel

LEFT, DOWN, RIGHT, UP = 0, 1, 2, 3
ACTION_NAMES = ("left", "down", "right", "up")
_MOVES = ((0, -1), (1, 0), (0, 1), (-1, 0))
_PERPENDICULAR = {LEFT: (UP, DOWN), RIGHT: (UP, DOWN),
                  DOWN: (LEFT, RIGHT), UP: (LEFT, RIGHT)}

STEP_REWARD = -1.0
RISKY_REWARD = -1.5
GOAL_REWARD = 0.0


@dataclass(frozen=True)
class GridMaze:
    """Parsed maze; states are the non-wall cells in row-major order."""

    width: int
    height: int
    grid: tuple          # tuple of row strings
    slip_probability: float = 0.0
    cyclic: bool = True

    def __post_init__(self):
        if not (0.0 <= self.slip_probability < 1.0):
            raise InputError("slip_probability must lie in [0, 1)")

    @property
    def cells(self) -> list:
        return [(r, c) for r in range(self.height) for c in range(self.width)
                if self.grid[r][c] != "#"]

    @property
    def n_states(self) -> int:
        return len(self.cells)

    def state_of(self, row: int, col: int) -> int:
        return self.cells.index((row, col))

    def cell_of(self, state: int) -> tuple[int, int]:
        return self.cells[state]

    def kind(self, state: int) -> str:
        r, c = self.cells[state]
        return self.grid[r][c]

    @property
    def start_state(self) -> int:
        return next(s for s, rc in enumerate(self.cells)
                    if self.grid[rc[0]][rc[1]] == "S")

    @property
    def goal_states(self) -> list:
        return [s for s, rc in enumerate(self.cells)
                if self.grid[rc[0]][rc[1]] == "G"]


def parse_maze(text: str, slip_probability: float = 0.0,
               cyclic: bool = True) -> GridMaze:
    """Parse an ASCII maze block into a GridMaze."""
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise InputError("empty maze")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InputError("ragged maze: all rows must have equal length")
    bad = {ch for row in rows for ch in row} - set(".#RGS")
    if bad:
        raise InputError(f"unknown maze characters: {sorted(bad)}")
    n_start = sum(row.count("S") for row in rows)
    if n_start != 1:
        raise InputError(f"maze must have exactly one start, found {n_start}")
    if not any("G" in row for row in rows):
        raise InputError("maze must have at least one goal")
    return GridMaze(width=width, height=len(rows), grid=tuple(rows),
                    slip_probability=slip_probability, cyclic=cyclic)


def to_mdp(maze: GridMaze, beta: float) -> MdpModel:
    """Tabular MDP over the maze's free cells with a uniform prior policy.

    Rewards depend on the current cell: -1 per step, -1.5 on risky
    cells, 0 at the goal. With slip, the intended direction gets
    probability 1-slip and each perpendicular direction slip/2 (all
    subject to wall bumping); the goal teleport is never subject to
    slip. Without cyclic mode the goal is absorbing, which leaves the
    chain reducible (flagged by validate_model).
    """
    cells = maze.cells
    index = {rc: s for s, rc in enumerate(cells)}
    n_s, n_a = len(cells), 4
    start = maze.start_state
    dynamics = np.zeros((n_s, n_a, n_s))
    rewards = np.empty((n_s, n_a))
    for s, (r, c) in enumerate(cells):
        kind = maze.grid[r][c]
        rewards[s, :] = (GOAL_REWARD if kind == "G"
                         else RISKY_REWARD if kind == "R" else STEP_REWARD)
        if kind == "G":
            if maze.cyclic:
                dynamics[s, :, start] = 1.0
            else:
                dynamics[s, :, s] = 1.0
            continue

        def target(action) -> int:
            dr, dc = _MOVES[action]
            nr, nc = r + dr, c + dc
            if not (0 <= nr < maze.height and 0 <= nc < maze.width) \
                    or maze.grid[nr][nc] == "#":
                return s
            return index[(nr, nc)]

        slip = maze.slip_probability
        for a in range(n_a):
            dynamics[s, a, target(a)] += 1.0 - slip
            for pa in _PERPENDICULAR[a]:
                dynamics[s, a, target(pa)] += slip / 2.0
    policy = np.full((n_s, n_a), 1.0 / n_a)
    return MdpModel(n_states=n_s, n_actions=n_a, prior_policy=policy,
                    dynamics=dynamics, rewards=rewards, beta=beta)


def env_step(model: MdpModel, state: int, action: int,
             rng: np.random.Generator) -> tuple[int, float]:
    """Sample one transition; statistics match the model's kernel."""
    if not (0 <= state < model.n_states and 0 <= action < model.n_actions):
        raise InputError(f"state/action ({state}, {action}) out of range")
    row = model.dynamics[state, action]
    next_state = int(min(np.searchsorted(np.cumsum(row), rng.random()),
                         model.n_states - 1))
    return next_state, float(model.rewards[state, action])


def start_pair_distribution(maze: GridMaze, model: MdpModel) -> np.ndarray:
    """Point mass on the start state, actions drawn from the prior policy."""
    dist = np.zeros(model.n_states * model.n_actions)
    s = maze.start_state
    dist[s * model.n_actions:(s + 1) * model.n_actions] = model.prior_policy[s]
    return dist


def load_packaged_maze(name: str, slip_probability: float = 0.0,
                       cyclic: bool = True) -> GridMaze:
    """Load one of the maze layouts shipped with the package."""
    path = resources.files("ldrl").joinpath("mazes", f"{name}.txt")
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"no packaged maze named {name!r}") from None
    return parse_maze(text, slip_probability=slip_probability, cyclic=cyclic)
