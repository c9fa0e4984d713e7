"""Tabular Q-learning over a sparse, age-pruned state table with memory replay."""
from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass

import numba
import numpy as np

from .checkpoint import read_checkpoint, write_checkpoint
from .qenv import N_AGENTS, Direction, QWorld, perspective_keys, step_joint
from .rewards import RewardScheme, group_score

log = logging.getLogger(__name__)

N_DIRECTIONS = 4
N_JOINT_ACTIONS = N_DIRECTIONS ** N_AGENTS
KEY_BYTES = 24  # 6**64 < 2**168


class ControllerMode(enum.Enum):
    CENTRALIZED = "centralized"
    DECENTRALIZED = "decentralized"

    @classmethod
    def parse(cls, text: str) -> "ControllerMode":
        key = text.strip().lower().replace("-", "_")
        aliases = {"central": "centralized", "joint": "centralized", "group": "centralized",
                   "decentral": "decentralized", "independent": "decentralized",
                   "inclusive": "decentralized"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.8
    gamma: float = 0.9
    epsilon0: float = 1.0
    epsilon_decay: float = 0.999
    epochs: int = 10_000
    steps_per_epoch: int = 50
    replay_sample: int = 2_000
    buffer_capacity: int = 50_000
    prune_age: int = 2_000
    mode: ControllerMode = ControllerMode.CENTRALIZED
    scheme: RewardScheme = RewardScheme.MEAN
    seed: int = 0
    reward_timing: str = "step"  # or "episode": scheme applied to final totals only
    alias_agents: bool = False   # joint view codes every agent -1

    def __post_init__(self):
        for name in ("alpha", "gamma", "epsilon0", "epsilon_decay"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("epochs", "steps_per_epoch", "replay_sample", "prune_age"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.buffer_capacity <= 0:
            raise ValueError("buffer_capacity must be positive")
        if self.reward_timing not in ("step", "episode"):
            raise ValueError("reward_timing must be 'step' or 'episode'")

    @property
    def centralized(self) -> bool:
        return self.mode is ControllerMode.CENTRALIZED


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    food: tuple
    epsilon: float
    table_size: int


class SparseQTable:
    """Map from state key to an action-value row plus its last-access epoch.

    Rows live in one growable array; ``_rows`` maps keys to row indices.
    Row indices stay valid until the next :meth:`prune`.
    """

    def __init__(self, n_actions: int, capacity: int = 1024):
        self.n_actions = n_actions
        self.values = np.zeros((capacity, n_actions))
        self.last_used = np.zeros(capacity, dtype=np.int64)
        self.keys: list[int] = []
        self._rows: dict[int, int] = {}

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self._rows

    def row(self, key: int, epoch: int, rng: np.random.Generator) -> int:
        """Row index for ``key``, inserting a uniform [0, 1) row if unseen."""
        r = self._rows.get(key)
        if r is None:
            r = len(self.keys)
            if r == self.values.shape[0]:
                self._grow()
            self.values[r] = rng.random(self.n_actions)
            self.keys.append(key)
            self._rows[key] = r
        self.last_used[r] = epoch
        return r

    def get(self, key: int) -> np.ndarray:
        return self.values[self._rows[key]]

    def last_used_of(self, key: int) -> int:
        return int(self.last_used[self._rows[key]])

    def _grow(self):
        cap = self.values.shape[0] * 2
        values = np.zeros((cap, self.n_actions))
        values[:len(self.keys)] = self.values[:len(self.keys)]
        last = np.zeros(cap, dtype=np.int64)
        last[:len(self.keys)] = self.last_used[:len(self.keys)]
        self.values, self.last_used = values, last

    def prune(self, epoch: int, max_age: int) -> int:
        """Drop every entry with ``epoch - last_used >= max_age``."""
        n = len(self.keys)
        keep = (epoch - self.last_used[:n]) < max_age
        removed = int(n - keep.sum())
        if removed:
            idx = np.flatnonzero(keep)
            self.values[:idx.size] = self.values[idx]
            self.last_used[:idx.size] = self.last_used[idx]
            self.keys = [self.keys[i] for i in idx]
            self._rows = {k: r for r, k in enumerate(self.keys)}
        return removed


class ReplayBuffer:
    """Fixed-capacity FIFO of (state key, action, reward, next state key)."""

    def __init__(self, capacity: int = 50_000):
        self.capacity = capacity
        self.states: list = [None] * capacity
        self.next_states: list = [None] * capacity
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self._head = 0  # next write slot
        self._size = 0

    def __len__(self):
        return self._size

    def append(self, state: int, action: int, reward: float, next_state: int) -> None:
        h = self._head
        self.states[h] = state
        self.next_states[h] = next_state
        self.actions[h] = action
        self.rewards[h] = reward
        self._head = (h + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _slot(self, i: int) -> int:
        oldest = (self._head - self._size) % self.capacity
        return (oldest + i) % self.capacity

    def __getitem__(self, i: int) -> tuple:
        """``i``-th stored transition, oldest first."""
        if not 0 <= i < self._size:
            raise IndexError(i)
        s = self._slot(i)
        return self.states[s], int(self.actions[s]), float(self.rewards[s]), self.next_states[s]

    def sample_slots(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws with replacement, as raw storage slots."""
        oldest = (self._head - self._size) % self.capacity
        return (oldest + rng.integers(0, self._size, size=n)) % self.capacity


def lookup_or_init(table: SparseQTable, key: int, epoch: int, rng: np.random.Generator) -> np.ndarray:
    r = table.row(key, epoch, rng)  # may reallocate table.values
    return table.values[r]


def select_action(values, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: random index with probability epsilon, else first argmax."""
    values = np.asarray(values)
    if rng.random() < epsilon:
        return int(rng.integers(values.size))
    return int(np.argmax(values))


def bellman_update(q: float, r: float, max_next: float, alpha: float, gamma: float) -> float:
    return (1.0 - alpha) * q + alpha * (r + gamma * max_next)


def joint_action_decode(index: int) -> tuple[Direction, ...]:
    """Base-4 little-endian digits: agent i moves in direction digit i."""
    if not 0 <= index < N_JOINT_ACTIONS:
        raise ValueError(f"joint action {index} outside 0..{N_JOINT_ACTIONS - 1}")
    return tuple(Direction((index >> (2 * i)) & 3) for i in range(N_AGENTS))


def joint_action_encode(dirs) -> int:
    return sum(int(d) << (2 * i) for i, d in enumerate(dirs))


def epsilon_at(cfg: TrainConfig, epoch: int) -> float:
    return cfg.epsilon0 * cfg.epsilon_decay ** epoch


class Learner:
    """Tables and replay buffers for one training run (one or four policies)."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        n_policies = 1 if cfg.centralized else N_AGENTS
        n_actions = N_JOINT_ACTIONS if cfg.centralized else N_DIRECTIONS
        self.tables = [SparseQTable(n_actions) for _ in range(n_policies)]
        self.buffers = [ReplayBuffer(cfg.buffer_capacity) for _ in range(n_policies)]

    def table_size(self) -> int:
        return sum(len(t) for t in self.tables)


def _keys(world: QWorld, cfg: TrainConfig) -> list[int]:
    return perspective_keys(world, cfg.centralized, cfg.alias_agents)


def rollout(learner: Learner, epoch: int, epsilon: float, rng: np.random.Generator,
            record: bool = True) -> np.ndarray:
    """Forage one episode on a fresh world; return per-agent food totals."""
    cfg = learner.cfg
    world = QWorld()
    keys = _keys(world, cfg)
    last = cfg.steps_per_epoch - 1
    for step in range(cfg.steps_per_epoch):
        actions = [select_action(lookup_or_init(t, k, epoch, rng), epsilon, rng)
                   for t, k in zip(learner.tables, keys)]
        dirs = joint_action_decode(actions[0]) if cfg.centralized else actions
        deltas = step_joint(world, dirs)
        if cfg.reward_timing == "step":
            reward = group_score(deltas, cfg.scheme)
        else:
            reward = group_score(world.carried, cfg.scheme) if step == last else 0.0
        next_keys = _keys(world, cfg)
        if record:
            for buf, k, a, nk in zip(learner.buffers, keys, actions, next_keys):
                buf.append(k, a, reward, nk)
        keys = next_keys
    return world.carried.copy()


def run_epoch(learner: Learner, epoch: int, rng: np.random.Generator) -> EpochRecord:
    eps = epsilon_at(learner.cfg, epoch)
    food = rollout(learner, epoch, eps, rng)
    return EpochRecord(epoch, tuple(int(f) for f in food), eps, learner.table_size())


@numba.njit(cache=True)
def _apply_updates(values, state_rows, next_rows, actions, rewards, alpha, gamma):
    for t in range(state_rows.shape[0]):
        best = values[next_rows[t], 0]
        for a in range(1, values.shape[1]):
            if values[next_rows[t], a] > best:
                best = values[next_rows[t], a]
        s = state_rows[t]
        a = actions[t]
        values[s, a] = (1.0 - alpha) * values[s, a] + alpha * (rewards[t] + gamma * best)


def replay_train(table: SparseQTable, buffer: ReplayBuffer, cfg: TrainConfig, epoch: int,
                 rng: np.random.Generator) -> int:
    """Sample memories with replacement and apply the Bellman update to each in turn."""
    if len(buffer) == 0 or cfg.replay_sample == 0:
        return 0
    slots = buffer.sample_slots(min(cfg.replay_sample, len(buffer)), rng)
    state_rows = np.empty(slots.size, dtype=np.int64)
    next_rows = np.empty(slots.size, dtype=np.int64)
    known = table._rows
    for t, s in enumerate(slots.tolist()):
        # inserting in the same order as row() calls keeps the rng stream fixed
        r = known.get(buffer.states[s])
        state_rows[t] = table.row(buffer.states[s], epoch, rng) if r is None else r
        r = known.get(buffer.next_states[s])
        next_rows[t] = table.row(buffer.next_states[s], epoch, rng) if r is None else r
    table.last_used[state_rows] = epoch
    table.last_used[next_rows] = epoch
    _apply_updates(table.values, state_rows, next_rows, buffer.actions[slots],
                   buffer.rewards[slots], cfg.alpha, cfg.gamma)
    return int(slots.size)


def prune(table: SparseQTable, epoch: int, prune_age: int = 2_000) -> int:
    return table.prune(epoch, prune_age)


@dataclass
class TrainingResult:
    records: list
    final_food: np.ndarray  # greedy rollout after training
    learner: Learner


def run_training(cfg: TrainConfig, learner: Learner | None = None,
                 rng: np.random.Generator | None = None, start_epoch: int = 0) -> TrainingResult:
    """Epoch loop (explore, replay, prune), then one greedy rollout."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if learner is None:
        learner = Learner(cfg)
    records = []
    for epoch in range(start_epoch, cfg.epochs):
        rec = run_epoch(learner, epoch, rng)
        for table, buf in zip(learner.tables, learner.buffers):
            replay_train(table, buf, cfg, epoch, rng)
        for table in learner.tables:
            table.prune(epoch, cfg.prune_age)
        records.append(dataclasses.replace(rec, table_size=learner.table_size()))
        if epoch % 500 == 0:
            log.debug("epoch %d food %s table %d", epoch, rec.food, learner.table_size())
    final = rollout(learner, cfg.epochs, 0.0, rng, record=False)
    return TrainingResult(records, final, learner)


def _keys_to_array(keys) -> np.ndarray:
    out = np.zeros((len(keys), KEY_BYTES), dtype=np.uint8)
    for i, k in enumerate(keys):
        out[i] = np.frombuffer(int(k).to_bytes(KEY_BYTES, "little"), dtype=np.uint8)
    return out


def _array_to_keys(arr: np.ndarray) -> list[int]:
    return [int.from_bytes(row.tobytes(), "little") for row in arr]


def save_learner(path, learner: Learner, rng: np.random.Generator, epoch: int) -> None:
    """Checkpoint tables (key, values, last_used), replay buffers and RNG state."""
    arrays = {}
    for p, (table, buf) in enumerate(zip(learner.tables, learner.buffers)):
        n = len(table)
        arrays[f"t{p}_keys"] = _keys_to_array(table.keys)
        arrays[f"t{p}_values"] = table.values[:n]
        arrays[f"t{p}_last_used"] = table.last_used[:n]
        order = [buf._slot(i) for i in range(len(buf))]
        arrays[f"b{p}_states"] = _keys_to_array([buf.states[s] for s in order])
        arrays[f"b{p}_next"] = _keys_to_array([buf.next_states[s] for s in order])
        arrays[f"b{p}_actions"] = buf.actions[order]
        arrays[f"b{p}_rewards"] = buf.rewards[order]
    meta = {"epoch": epoch, "rng": rng.bit_generator.state,
            "config": {k: (v.value if isinstance(v, enum.Enum) else v)
                       for k, v in dataclasses.asdict(learner.cfg).items()}}
    write_checkpoint(path, "QTAB", meta, arrays)


def load_learner(path) -> tuple[Learner, np.random.Generator, int]:
    meta, arrays = read_checkpoint(path, "QTAB")
    raw = dict(meta["config"])
    raw["mode"] = ControllerMode(raw["mode"])
    raw["scheme"] = RewardScheme(raw["scheme"])
    learner = Learner(TrainConfig(**raw))
    for p, (table, buf) in enumerate(zip(learner.tables, learner.buffers)):
        for key, values, last in zip(_array_to_keys(arrays[f"t{p}_keys"]), arrays[f"t{p}_values"],
                                     arrays[f"t{p}_last_used"]):
            r = len(table.keys)
            if r == table.values.shape[0]:
                table._grow()
            table.values[r] = values
            table.last_used[r] = last
            table.keys.append(key)
            table._rows[key] = r
        for s, a, rew, nx in zip(_array_to_keys(arrays[f"b{p}_states"]), arrays[f"b{p}_actions"],
                                 arrays[f"b{p}_rewards"], _array_to_keys(arrays[f"b{p}_next"])):
            buf.append(s, int(a), float(rew), nx)
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng"]
    return learner, rng, int(meta["epoch"])
