"""8x8 fully observed foraging grid for the Q-learning pipeline."""
from __future__ import annotations

import enum

import numpy as np

SIZE = 8
N_AGENTS = 4
N_TILES = SIZE * SIZE
INITIAL_FOOD = N_TILES - N_AGENTS
START_POSITIONS = ((0, 0), (SIZE - 1, 0), (0, SIZE - 1), (SIZE - 1, SIZE - 1))

EMPTY_CODE = 0.0
FOOD_CODE = 1.0
OTHER_CODE = -1.0
SELF_CODE = -0.5


class Direction(enum.IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3


_DX = (0, 1, 0, -1)
_DY = (-1, 0, 1, 0)


def centralized_code(agent_idx: int) -> float:
    return SELF_CODE - 0.1 * agent_idx


class QWorld:
    """Food grid indexed ``[row, col]``; agent positions are ``(col, row)``."""

    def __init__(self):
        self.food = np.ones((SIZE, SIZE), dtype=bool)
        self.agent_pos = np.array(START_POSITIONS, dtype=np.int64)
        for x, y in START_POSITIONS:
            self.food[y, x] = False
        self.carried = np.zeros(N_AGENTS, dtype=np.int64)
        self.step_count = 0

    def food_on_grid(self) -> int:
        return int(self.food.sum())

    def occupant(self, x: int, y: int) -> int:
        for j in range(N_AGENTS):
            if self.agent_pos[j, 0] == x and self.agent_pos[j, 1] == y:
                return j
        return -1

    def dump(self) -> str:
        rows = [["*" if f else "." for f in row] for row in self.food]
        for i, (x, y) in enumerate(self.agent_pos):
            rows[y][x] = str(i)
        return "\n".join("".join(r) for r in rows)


def new_qworld() -> QWorld:
    return QWorld()


def encode_state(world: QWorld, agent: int | None = None, alias: bool = False) -> np.ndarray:
    """Row-major 64-vector of tile codes.

    ``agent=i`` is agent i's own view (self -0.5, others -1). ``agent=None``
    is the joint view, where agent i is coded ``-0.5 - 0.1 * i``; with
    ``alias=True`` the joint view codes every agent as -1 instead.
    """
    grid = np.where(world.food, FOOD_CODE, EMPTY_CODE)
    for i, (x, y) in enumerate(world.agent_pos):
        if agent is None:
            grid[y, x] = OTHER_CODE if alias else centralized_code(i)
        else:
            grid[y, x] = SELF_CODE if i == agent else OTHER_CODE
    return grid.reshape(-1)


# tenths -> digit
_DIGITS_BASE4 = {0: 0, 10: 1, -10: 2, -5: 3}
_DIGITS_BASE6 = {0: 0, 10: 1, -5: 2, -6: 3, -7: 4, -8: 5}
_CHUNK = 16


def _digits_to_key(digits: np.ndarray, base: int) -> int:
    pad = (-digits.size) % _CHUNK
    if pad:
        digits = np.concatenate([digits, np.zeros(pad, dtype=np.int64)])
    weights = base ** np.arange(_CHUNK, dtype=np.int64)
    parts = digits.reshape(-1, _CHUNK) @ weights
    key = 0
    for c in reversed(range(parts.size)):
        key = key * base ** _CHUNK + int(parts[c])
    return key


def state_key(encoding) -> int:
    """Injective integer key: tile t contributes ``digit_t * base**t``.

    Own-view codes (0, 1, -1, -0.5) use base 4; joint views with per-agent
    codes (-0.5 .. -0.8) use base 6.
    """
    tenths = np.rint(np.asarray(encoding, dtype=float) * 10).astype(np.int64)
    joint = bool(np.isin(tenths, (-6, -7, -8)).any())
    table = _DIGITS_BASE6 if joint else _DIGITS_BASE4
    lookup = np.full(21, -1, dtype=np.int64)
    for code, digit in table.items():
        lookup[code + 10] = digit
    if tenths.min(initial=0) < -10 or tenths.max(initial=0) > 10:
        raise ValueError("unknown tile code in state encoding")
    digits = lookup[tenths + 10]
    if (digits < 0).any():
        raise ValueError("unknown tile code in state encoding")
    return _digits_to_key(digits, 6 if joint else 4)


def perspective_keys(world: QWorld, centralized: bool, alias: bool = False) -> list[int]:
    """Keys for the joint view (one) or each agent's own view (four).

    Equal to ``state_key(encode_state(...))`` but builds the digit grid once.
    """
    digits = world.food.astype(np.int64).reshape(-1)
    cells = world.agent_pos[:, 1] * SIZE + world.agent_pos[:, 0]
    if centralized:
        if alias:
            digits[cells] = 2
            return [_digits_to_key(digits, 4)]
        digits[cells] = 2 + np.arange(N_AGENTS)
        return [_digits_to_key(digits, 6)]
    digits[cells] = 2
    keys = []
    for i in range(N_AGENTS):
        digits[cells[i]] = 3
        keys.append(_digits_to_key(digits, 4))
        digits[cells[i]] = 2
    return keys


def step_joint(world: QWorld, dirs) -> np.ndarray:
    """Move agents in index order; return per-agent carried deltas.

    Off-grid moves are no-ops. Bumping into an agent hands it one unit of
    the mover's food, if the mover has any.
    """
    deltas = np.zeros(N_AGENTS, dtype=np.int64)
    for i, d in enumerate(dirs):
        x = int(world.agent_pos[i, 0]) + _DX[d]
        y = int(world.agent_pos[i, 1]) + _DY[d]
        if not (0 <= x < SIZE and 0 <= y < SIZE):
            continue
        other = world.occupant(x, y)
        if other >= 0:
            if world.carried[i] >= 1:
                world.carried[i] -= 1
                world.carried[other] += 1
                deltas[i] -= 1
                deltas[other] += 1
            continue
        world.agent_pos[i] = (x, y)
        if world.food[y, x]:
            world.food[y, x] = False
            world.carried[i] += 1
            deltas[i] += 1
    world.step_count += 1
    return deltas
