"""16x16 foraging room for the genetic-algorithm pipeline.

Four agents start in the corners of a room where every other tile holds one
unit of food. Agents see only the tile ahead, the beeps of the others and a
saturating count of their own food.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

from .brain import Brain, PackedBrains, update_nodes

SIZE = 16
N_AGENTS = 4
INITIAL_FOOD = SIZE * SIZE - N_AGENTS
DEFAULT_EPISODE_STEPS = 256

EMPTY = 0
FOOD = 1

# ahead codes, (s0, s1) big-endian
AHEAD_EMPTY, AHEAD_FOOD, AHEAD_AGENT, AHEAD_WALL = 0, 1, 2, 3

_DX = np.array([0, 1, 0, -1], dtype=np.int64)
_DY = np.array([-1, 0, 1, 0], dtype=np.int64)


class Orientation(enum.IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    def turn_left(self) -> "Orientation":
        return Orientation((self - 1) % 4)

    def turn_right(self) -> "Orientation":
        return Orientation((self + 1) % 4)


class Move(enum.IntEnum):
    NOTHING = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    FORWARD = 3


@dataclass(frozen=True)
class ForageAction:
    move: Move = Move.NOTHING
    beep: bool = False

    @classmethod
    def from_actuators(cls, bit1, bit0, beep) -> "ForageAction":
        return cls(Move(2 * int(bool(bit1)) + int(bool(bit0))), bool(beep))


START_POSITIONS = ((0, 0), (SIZE - 1, 0), (0, SIZE - 1), (SIZE - 1, SIZE - 1))
START_ORIENTATIONS = (Orientation.EAST, Orientation.WEST, Orientation.EAST, Orientation.WEST)


class ForageWorld:
    """Mutable room state; positions are ``(col, row)``.

    The room is stored as a padded ``grid`` of ahead codes (a one-tile wall
    border, agents marked in place) so sensing is a single lookup. Agents
    only ever stand on tiles they have already emptied.
    """

    def __init__(self, orientations=START_ORIENTATIONS):
        self.grid = np.full((SIZE + 2, SIZE + 2), AHEAD_WALL, dtype=np.uint8)
        self.grid[1:-1, 1:-1] = AHEAD_FOOD
        self.pos = np.array(START_POSITIONS, dtype=np.int64)
        for x, y in START_POSITIONS:
            self.grid[y + 1, x + 1] = AHEAD_AGENT
        self.orient = np.array([int(o) for o in orientations], dtype=np.int64)
        self.carried = np.zeros(N_AGENTS, dtype=np.int64)
        self.beeped = np.zeros(N_AGENTS, dtype=np.uint8)
        self.step_count = 0

    @property
    def tiles(self) -> np.ndarray:
        """Food layout indexed ``[row, col]``: 1 food, 0 empty."""
        return (self.grid[1:-1, 1:-1] == AHEAD_FOOD).astype(np.uint8)

    def food_on_tiles(self) -> int:
        return int(np.count_nonzero(self.grid == AHEAD_FOOD))

    def orientation(self, idx: int) -> Orientation:
        return Orientation(int(self.orient[idx]))

    def dump(self) -> str:
        """One character per tile: '.' empty, '*' food, digit = agent index."""
        grid = [["*" if t == FOOD else "." for t in row] for row in self.tiles]
        for i, (x, y) in enumerate(self.pos):
            grid[y][x] = str(i)
        return "\n".join("".join(row) for row in grid)


def new_forage_world() -> ForageWorld:
    return ForageWorld()


@numba.njit(cache=True, inline="always")
def _sense_into(grid, pos, orient, carried, beeped, i, out):
    o = orient[i]
    code = grid[pos[i, 1] + 1 + _DY[o], pos[i, 0] + 1 + _DX[o]]
    out[0] = (code >> 1) & 1
    out[1] = code & 1
    k = 2
    for j in range(pos.shape[0]):
        if j != i:
            out[k] = beeped[j]
            k += 1
    c = min(carried[i], 3)
    out[5] = (c >> 1) & 1
    out[6] = c & 1


@numba.njit(cache=True, inline="always")
def _step(grid, pos, orient, carried, beeped, moves, beeps, deltas):
    n = pos.shape[0]
    for i in range(n):
        deltas[i] = 0
    for i in range(n):
        mv = moves[i]
        if mv == 1:
            orient[i] = (orient[i] + 3) & 3
        elif mv == 2:
            orient[i] = (orient[i] + 1) & 3
        elif mv == 3:
            x = pos[i, 0] + _DX[orient[i]]
            y = pos[i, 1] + _DY[orient[i]]
            target = grid[y + 1, x + 1]
            if target == AHEAD_AGENT:
                if carried[i] >= 1:
                    for j in range(n):
                        if j != i and pos[j, 0] == x and pos[j, 1] == y:
                            carried[i] -= 1
                            carried[j] += 1
                            deltas[i] -= 1
                            deltas[j] += 1
            elif target != AHEAD_WALL:
                grid[pos[i, 1] + 1, pos[i, 0] + 1] = AHEAD_EMPTY
                grid[y + 1, x + 1] = AHEAD_AGENT
                pos[i, 0] = x
                pos[i, 1] = y
                if target == AHEAD_FOOD:
                    carried[i] += 1
                    deltas[i] += 1
    for i in range(n):
        beeped[i] = beeps[i]


def sense(world: ForageWorld, agent_idx: int) -> tuple[bool, ...]:
    """Seven sensor bits: ahead code (2), others' beeps (3), min(carried, 3) (2)."""
    if not 0 <= agent_idx < N_AGENTS:
        raise IndexError(f"agent index {agent_idx} out of range")
    out = np.zeros(7, dtype=np.uint8)
    _sense_into(world.grid, world.pos, world.orient, world.carried, world.beeped, agent_idx, out)
    return tuple(bool(b) for b in out)


def step_forage(world: ForageWorld, actions) -> np.ndarray:
    """Apply four actions in agent-index order; return each agent's net food change."""
    if len(actions) != N_AGENTS:
        raise ValueError(f"expected {N_AGENTS} actions")
    moves = np.array([int(a.move) for a in actions], dtype=np.int64)
    beeps = np.array([int(a.beep) for a in actions], dtype=np.uint8)
    deltas = np.zeros(N_AGENTS, dtype=np.int64)
    _step(world.grid, world.pos, world.orient, world.carried, world.beeped, moves, beeps, deltas)
    world.step_count += 1
    return deltas


@numba.njit(cache=True)
def run_episode_kernel(grid, pos, orient, carried, beeped, brain_ids, steps,
                       gate_start, kinds, n_in, n_out, ins, outs, offsets, det, prob):
    """Run ``steps`` sense/think/act ticks with the numba RNG already seeded.

    Hidden state starts cleared for every agent, even when several agents
    share one brain (clones).
    """
    n = pos.shape[0]
    nodes = np.zeros((n, 19), dtype=np.uint8)
    percept = np.zeros(7, dtype=np.uint8)
    moves = np.zeros(n, dtype=np.int64)
    beeps = np.zeros(n, dtype=np.uint8)
    deltas = np.zeros(n, dtype=np.int64)
    max_gates = 0
    for i in range(n):
        b = brain_ids[i]
        max_gates = max(max_gates, gate_start[b + 1] - gate_start[b])
    uniforms = np.zeros(max_gates)
    post = np.zeros(19, dtype=np.uint8)
    for _ in range(steps):
        for i in range(n):
            _sense_into(grid, pos, orient, carried, beeped, i, percept)
            for k in range(7):
                nodes[i, k] = percept[k]
        for i in range(n):
            b = brain_ids[i]
            g0 = gate_start[b]
            g1 = gate_start[b + 1]
            for g in range(g0, g1):
                if kinds[g] == 1:
                    uniforms[g - g0] = np.random.random()
            update_nodes(nodes[i], post, kinds, n_in, n_out, ins, outs, offsets, det, prob, uniforms, g0, g1)
            moves[i] = 2 * nodes[i, 7] + nodes[i, 8]
            beeps[i] = nodes[i, 9]
        _step(grid, pos, orient, carried, beeped, moves, beeps, deltas)


@numba.njit(cache=True)
def seeded_episode(seed, grid, pos, orient, carried, beeped, brain_ids, steps,
                   gate_start, kinds, n_in, n_out, ins, outs, offsets, det, prob):
    np.random.seed(seed)
    run_episode_kernel(grid, pos, orient, carried, beeped, brain_ids, steps,
                       gate_start, kinds, n_in, n_out, ins, outs, offsets, det, prob)


def run_forage_episode(world: ForageWorld, brains, steps: int = DEFAULT_EPISODE_STEPS,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    """Let four brains forage for ``steps`` ticks; return final carried counts.

    ``brains`` may repeat the same :class:`Brain` object (clonal groups); each
    agent still keeps its own node state.
    """
    if len(brains) != N_AGENTS:
        raise ValueError(f"expected {N_AGENTS} brains")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    unique: list[Brain] = []
    ids = []
    for b in brains:
        for k, u in enumerate(unique):
            if u is b:
                ids.append(k)
                break
        else:
            unique.append(b)
            ids.append(len(unique) - 1)
    packed = PackedBrains.from_brains(unique)
    seed = int(rng.integers(0, 2**32)) if rng is not None else 0
    seeded_episode(seed, world.grid, world.pos, world.orient, world.carried, world.beeped,
                   np.array(ids, dtype=np.int64), steps, *packed.arrays())
    world.step_count += steps
    return world.carried.copy()
