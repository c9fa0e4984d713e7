"""Genetic-algorithm pipeline: group formation, group scoring, roulette selection."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .brain import MutationConfig, PackedBrains, decode, mutate, random_genome
from .checkpoint import read_checkpoint, write_checkpoint
from .rewards import RewardScheme, aggregate_rewards, group_score  # noqa: F401  (re-export)
from .world import DEFAULT_EPISODE_STEPS, ForageWorld, run_episode_kernel

log = logging.getLogger(__name__)

GROUP_SIZE = 4
IF_PASSES = 4


class SelectionMode(enum.Enum):
    GROUP_LEVEL = "group"
    INCLUSIVE_FITNESS = "inclusive"

    @classmethod
    def parse(cls, text: str) -> "SelectionMode":
        key = text.strip().lower().replace("-", "_")
        aliases = {"grouplevel": "group", "group_level": "group", "gls": "group", "clonal": "group",
                   "inclusivefitness": "inclusive", "inclusive_fitness": "inclusive",
                   "incl": "inclusive", "random": "inclusive"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class EvoConfig:
    pop_size: int = 100
    generations: int = 50_000
    episode_steps: int = DEFAULT_EPISODE_STEPS
    mode: SelectionMode = SelectionMode.GROUP_LEVEL
    scheme: RewardScheme = RewardScheme.MEAN
    mutation: MutationConfig = field(default_factory=MutationConfig)
    seed: int = 0
    record_every: int = 100
    genome_length: int = 5_000
    initial_codons: int = 8

    def __post_init__(self):
        if self.pop_size <= 0 or self.pop_size % GROUP_SIZE:
            raise ValueError(f"pop_size must be a positive multiple of {GROUP_SIZE}, got {self.pop_size}")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.episode_steps < 0:
            raise ValueError("episode_steps must be non-negative")
        if self.record_every <= 0:
            raise ValueError("record_every must be positive")


@dataclass
class Population:
    members: list
    fitness: np.ndarray

    @classmethod
    def random(cls, cfg: EvoConfig, rng: np.random.Generator) -> "Population":
        members = [random_genome(rng, cfg.genome_length, cfg.initial_codons) for _ in range(cfg.pop_size)]
        return cls(members, np.zeros(cfg.pop_size))

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    group_food: float      # mean over groups of the group's summed food
    rank_means: tuple      # mean food per rank, best collector first
    mean_fitness: float


@dataclass
class EvolutionResult:
    records: list
    population: Population


def form_groups(pop_size: int, mode: SelectionMode, rng: np.random.Generator) -> np.ndarray:
    """Member indices for every group evaluated in one generation, shape (k, 4)."""
    if pop_size <= 0 or pop_size % GROUP_SIZE:
        raise ValueError(f"pop_size must be a positive multiple of {GROUP_SIZE}, got {pop_size}")
    if mode is SelectionMode.GROUP_LEVEL:
        return np.repeat(np.arange(pop_size)[:, None], GROUP_SIZE, axis=1)
    passes = [rng.permutation(pop_size).reshape(-1, GROUP_SIZE) for _ in range(IF_PASSES)]
    return np.concatenate(passes)


_START_GRID = ForageWorld().grid
_START_POS = ForageWorld().pos
_START_ORIENT = ForageWorld().orient


@numba.njit(cache=True)
def _evaluate_groups(seeds, groups, steps, start_grid, start_pos, start_orient,
                     gate_start, kinds, n_in, n_out, ins, outs, offsets, det, prob):
    n_groups = groups.shape[0]
    collected = np.zeros((n_groups, 4), dtype=np.int64)
    for g in range(n_groups):
        np.random.seed(seeds[g])
        grid = start_grid.copy()
        pos = start_pos.copy()
        orient = start_orient.copy()
        carried = np.zeros(4, dtype=np.int64)
        beeped = np.zeros(4, dtype=np.uint8)
        run_episode_kernel(grid, pos, orient, carried, beeped, groups[g], steps,
                           gate_start, kinds, n_in, n_out, ins, outs, offsets, det, prob)
        collected[g] = carried
    return collected


def group_seeds(seed: int, generation: int, n_groups: int) -> np.ndarray:
    """Per-group RNG seeds, a pure function of (seed, generation, group index)."""
    state = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, generation]).generate_state(n_groups)
    return state.astype(np.int64)


def evaluate_groups(brains, groups: np.ndarray, steps: int, seeds: np.ndarray) -> np.ndarray:
    """Food collected by each agent of each group, shape (len(groups), 4)."""
    packed = PackedBrains.from_brains(brains)
    return _evaluate_groups(seeds, np.ascontiguousarray(groups, dtype=np.int64), steps,
                            _START_GRID, _START_POS, _START_ORIENT, *packed.arrays())


def _score(pop: Population, cfg: EvoConfig, rng, generation, brains=None):
    if brains is None:
        brains = [decode(g) for g in pop.members]
    groups = form_groups(len(pop), cfg.mode, rng)
    collected = evaluate_groups(brains, groups, cfg.episode_steps,
                                group_seeds(cfg.seed, generation, len(groups)))
    scores = np.array([group_score(c, cfg.scheme) for c in collected])
    fitness = np.zeros(len(pop))
    counts = np.zeros(len(pop))
    # clonal groups: only the original (index 0) is credited
    credited = groups[:, :1] if cfg.mode is SelectionMode.GROUP_LEVEL else groups
    for k in range(credited.shape[1]):
        np.add.at(fitness, credited[:, k], scores)
        np.add.at(counts, credited[:, k], 1)
    fitness /= counts
    return fitness, collected


def evaluate_generation(pop: Population, cfg: EvoConfig, rng: np.random.Generator,
                        generation: int = 0) -> np.ndarray:
    """Score every member; also stores the result in ``pop.fitness``."""
    fitness, _ = _score(pop, cfg, rng, generation)
    pop.fitness = fitness
    return fitness


def roulette_select(fitness, rng: np.random.Generator) -> int:
    """Fitness-proportional draw; uniform when every fitness is zero."""
    fitness = np.asarray(fitness, dtype=float)
    if fitness.size == 0:
        raise ValueError("empty fitness vector")
    if np.any(fitness < 0) or not np.all(np.isfinite(fitness)):
        raise ValueError("fitness values must be finite and non-negative")
    cumulative = np.cumsum(fitness)
    total = cumulative[-1]
    if total == 0:
        return int(rng.integers(fitness.size))
    u = rng.random() * total
    return _wheel_index(cumulative, u)


def _wheel_index(cumulative: np.ndarray, u: float) -> int:
    idx = int(np.searchsorted(cumulative, u, side="right"))
    return min(idx, cumulative.size - 1)


def generation_record(generation: int, collected: np.ndarray, fitness: np.ndarray) -> GenerationRecord:
    ranked = -np.sort(-collected, axis=1)
    return GenerationRecord(
        generation=generation,
        group_food=float(collected.sum(axis=1).mean()),
        rank_means=tuple(float(v) for v in ranked.mean(axis=0)),
        mean_fitness=float(fitness.mean()),
    )


def run_evolution(cfg: EvoConfig, population: Population | None = None,
                  rng: np.random.Generator | None = None, start_generation: int = 0) -> EvolutionResult:
    """Generational loop: evaluate, record, roulette-select parents, mutate.

    A record is kept every ``cfg.record_every`` generations and for the last
    generation. Pass ``population``/``rng``/``start_generation`` to resume
    from a checkpoint.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if population is None:
        population = Population.random(cfg, rng)
    records = []
    last = cfg.generations - 1
    for gen in range(start_generation, cfg.generations):
        fitness, collected = _score(population, cfg, rng, gen)
        population.fitness = fitness
        if gen % cfg.record_every == 0 or gen == last:
            rec = generation_record(gen, collected, fitness)
            records.append(rec)
            log.debug("gen %d group food %.2f", gen, rec.group_food)
        if gen == last:
            break
        parents = [roulette_select(fitness, rng) for _ in range(cfg.pop_size)]
        population = Population([mutate(population.members[p], cfg.mutation, rng) for p in parents],
                                np.zeros(cfg.pop_size))
    return EvolutionResult(records, population)


def save_population(path, population: Population, rng: np.random.Generator, generation: int) -> None:
    lengths = np.array([len(g) for g in population.members], dtype=np.int64)
    sites = np.concatenate(population.members) if population.members else np.zeros(0, np.uint8)
    write_checkpoint(path, "POPL", {"generation": generation, "rng": rng.bit_generator.state},
                     {"lengths": lengths, "sites": sites, "fitness": population.fitness})


def load_population(path) -> tuple[Population, np.random.Generator, int]:
    meta, arrays = read_checkpoint(path, "POPL")
    bounds = np.concatenate([[0], np.cumsum(arrays["lengths"])])
    members = [arrays["sites"][a:b].copy() for a, b in zip(bounds[:-1], bounds[1:])]
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng"]
    return Population(members, arrays["fitness"]), rng, int(meta["generation"])
