"""Experiment configuration, replicate orchestration and CSV export."""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .brain import MutationConfig
from .evolution import EvoConfig, SelectionMode, run_evolution
from .qlearning import ControllerMode, TrainConfig, run_training
from .rewards import RewardScheme
from .stats import bonferroni_significant, despotic_flatness, ks_2samp, mean_ci95, rank_sort

log = logging.getLogger(__name__)

OUTPUT_ENV = "FORAGE_LAB_OUTPUT"
GA = "ga"
QL = "ql"

PROFILES = {
    "ga-desk": {"generations": 2_000, "replicates": 10},
    "ql-desk": {"epochs": 2_000, "replicates": 10},
    "paper": {"generations": 50_000, "epochs": 10_000, "replicates": 40},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str = GA
    mode: str = "group"
    scheme: str = "mean"
    replicates: int = 40
    seed: int = 0
    out: str = ""
    # GA
    generations: int = 50_000
    pop_size: int = 100
    episode_steps: int = 256
    record_every: int = 100
    point_rate: float = 0.005
    duplication_rate: float = 0.05
    deletion_rate: float = 0.02
    min_len: int = 1_000
    max_len: int = 20_000
    # Q-learning
    epochs: int = 10_000
    steps_per_epoch: int = 50
    alpha: float = 0.8
    gamma: float = 0.9
    epsilon0: float = 1.0
    epsilon_decay: float = 0.999
    replay_sample: int = 2_000
    buffer_capacity: int = 50_000
    prune_age: int = 2_000
    reward_timing: str = "step"
    alias_agents: bool = False

    @property
    def scheme_enum(self) -> RewardScheme:
        return RewardScheme.parse(self.scheme)

    @property
    def condition(self) -> str:
        return f"{self.pipeline}-{self.mode}-{self.scheme}"

    @property
    def time_column(self) -> str:
        return "generation" if self.pipeline == GA else "epoch"

    def replicate_seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.replicates)]

    def evo_config(self, seed: int) -> EvoConfig:
        return EvoConfig(
            pop_size=self.pop_size, generations=self.generations, episode_steps=self.episode_steps,
            mode=SelectionMode.parse(self.mode), scheme=self.scheme_enum, seed=seed,
            record_every=self.record_every,
            mutation=MutationConfig(point_rate=self.point_rate, duplication_rate=self.duplication_rate,
                                    deletion_rate=self.deletion_rate, min_len=self.min_len,
                                    max_len=self.max_len),
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            alpha=self.alpha, gamma=self.gamma, epsilon0=self.epsilon0,
            epsilon_decay=self.epsilon_decay, epochs=self.epochs,
            steps_per_epoch=self.steps_per_epoch, replay_sample=self.replay_sample,
            buffer_capacity=self.buffer_capacity, prune_age=self.prune_age,
            mode=ControllerMode.parse(self.mode), scheme=self.scheme_enum, seed=seed,
            reward_timing=self.reward_timing, alias_agents=self.alias_agents,
        )

    def validate(self) -> None:
        if self.pipeline not in (GA, QL):
            raise ConfigError(f"pipeline must be '{GA}' or '{QL}', got {self.pipeline!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.record_every < 1:
            raise ConfigError("record_every must be at least 1")
        try:
            self.scheme_enum
            if self.pipeline == GA:
                self.evo_config(self.seed)
            else:
                self.train_config(self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)]


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_KEY_ALIASES = {"pipeline_mode": "mode", "controller": "mode", "selection": "mode",
                "base_seed": "seed", "output": "out"}


def _coerce(name: str, raw: str):
    kind = type(getattr(ExperimentConfig(), name))
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw.replace("_", ""))
    if kind is float:
        return float(raw)
    return raw.strip()


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = _KEY_ALIASES.get(key.lower(), key.lower())
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def resolve_config(pipeline: str | None = None, path=None, profile: str | None = None,
                   overrides: dict | None = None) -> ExperimentConfig:
    """Defaults < profile < config file < explicit overrides."""
    values: dict = {}
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        values.update(PROFILES[profile])
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), str(path)))
    if pipeline is not None:
        if values.get("pipeline", pipeline) != pipeline:
            raise ConfigError(f"config declares pipeline {values['pipeline']!r}, command expects {pipeline!r}")
        values["pipeline"] = pipeline
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    pipe = values.get("pipeline", GA)
    try:
        if "mode" in values:
            parse_mode = SelectionMode.parse if pipe == GA else ControllerMode.parse
            values["mode"] = parse_mode(values["mode"]).value
        elif pipe == QL:
            values["mode"] = ControllerMode.CENTRALIZED.value
        if "scheme" in values:
            values["scheme"] = RewardScheme.parse(values["scheme"]).value
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


@dataclass
class ReplicateResult:
    curve: list    # (time, group food)
    ranks: list    # final per-agent food, rank-sorted


def run_replicate(cfg: ExperimentConfig, replicate: int) -> ReplicateResult:
    seed = cfg.seed + replicate
    if cfg.pipeline == GA:
        result = run_evolution(cfg.evo_config(seed))
        curve = [(r.generation, r.group_food) for r in result.records]
        ranks = list(result.records[-1].rank_means) if result.records else [0.0] * 4
    else:
        result = run_training(cfg.train_config(seed))
        last = cfg.epochs - 1
        curve = [(r.epoch, float(sum(r.food))) for r in result.records
                 if r.epoch % cfg.record_every == 0 or r.epoch == last]
        ranks = [float(v) for v in rank_sort(result.final_food)]
    return ReplicateResult(curve, ranks)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else f"{x:.10g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _ci(values) -> tuple[float, float]:
    if len(values) < 2:
        return float(np.mean(values)), float("nan")
    return mean_ci95(values)


def summarize(cfg: ExperimentConfig, results: list[ReplicateResult]) -> list:
    ranks = np.array([r.ranks for r in results], dtype=float)
    group = ranks.sum(axis=1)
    flat = [despotic_flatness(row) for row in ranks]
    row = [cfg.condition, cfg.pipeline, cfg.mode, cfg.scheme, len(results), *_ci(group)]
    for k in range(4):
        row.extend(_ci(ranks[:, k]))
    row.extend(_ci(flat))
    return row


SUMMARY_HEADER = ["condition", "pipeline", "mode", "scheme", "replicates",
                  "group_food_mean", "group_food_ci95",
                  *[f"rank{k}_{s}" for k in range(1, 5) for s in ("mean", "ci95")],
                  "flatness_mean", "flatness_ci95"]


def _run_one(args):
    cfg, rep = args
    return run_replicate(cfg, rep)


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> Path:
    """Run every replicate and write manifest.txt, curves.csv, ranks.csv, summary.csv.

    Files are written only after all replicates finish, so the worker count
    never changes their content.
    """
    cfg.validate()
    out = Path(out_dir or cfg.out or default_output_dir(cfg))
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    started = time.time()
    tasks = [(cfg, r) for r in range(cfg.replicates)]
    if jobs > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    for r, res in enumerate(results):
        log.info("%s replicate %d: group food %.2f", cfg.condition, r, sum(res.ranks))

    curves = [(r, t, food) for r, res in enumerate(results) for t, food in res.curve]
    ranks = [(r, *res.ranks, sum(res.ranks), despotic_flatness(res.ranks))
             for r, res in enumerate(results)]
    files = {
        "curves.csv": _csv_text(["replicate", cfg.time_column, "group_food"], curves),
        "ranks.csv": _csv_text(["replicate", "rank1", "rank2", "rank3", "rank4", "group_food", "flatness"],
                               ranks),
        "summary.csv": _csv_text(SUMMARY_HEADER, [summarize(cfg, results)]),
    }
    for name, text in files.items():
        (out / name).write_text(text, newline="")
    manifest = [f"forage_lab_version = {__version__}", f"condition = {cfg.condition}"]
    manifest += [f"{k} = {v}" for k, v in cfg.items()]
    manifest.append("replicate_seeds = " + ",".join(str(s) for s in cfg.replicate_seeds()))
    manifest += [f"python = {platform.python_version()}", f"numpy = {np.__version__}",
                 f"jobs = {jobs}",
                 f"started = {time.strftime('%Y-%m-%dT%H:%M:%S', time.localtime(started))}",
                 f"elapsed_seconds = {time.time() - started:.1f}"]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n", newline="")
    return out


def default_output_dir(cfg: ExperimentConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ENV, "runs"))
    return root / f"{cfg.condition}-seed{cfg.seed}"


# -- comparison ------------------------------------------------------------

@dataclass
class RunData:
    path: Path
    manifest: dict
    ranks: np.ndarray  # (replicates, 4)

    @property
    def label(self) -> str:
        return self.manifest.get("condition", self.path.name)

    @property
    def pipeline(self) -> str:
        return self.manifest.get("pipeline", "?")

    @property
    def group_food(self) -> np.ndarray:
        return self.ranks.sum(axis=1)


def load_run(path) -> RunData:
    path = Path(path)
    manifest = {}
    for line in (path / "manifest.txt").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            manifest[k.strip()] = v.strip()
    with open(path / "ranks.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    ranks = np.array([[float(r[f"rank{k}"]) for k in range(1, 5)] for r in rows])
    return RunData(path, manifest, ranks)


def compare(run_dirs, out_dir, plots: bool = True) -> list:
    """Pairwise KS tests on final group food, Bonferroni over all pairs."""
    runs = [load_run(d) for d in run_dirs]
    if len(runs) < 2:
        raise ConfigError("compare needs at least two run directories")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    warnings = []
    if len({r.pipeline for r in runs}) > 1:
        msg = "runs from different pipelines compared: " + ", ".join(r.label for r in runs)
        log.warning(msg)
        warnings.append(msg)
    pairs = list(itertools.combinations(range(len(runs)), 2))
    m = len(pairs)
    rows = []
    for i, j in pairs:
        res = ks_2samp(runs[i].group_food, runs[j].group_food)
        rows.append((runs[i].label, runs[j].label, res.d, res.p, m,
                     "true" if bonferroni_significant(res.p, m) else "false"))
    text = _csv_text(["run_a", "run_b", "d", "p", "m", "significant"], rows)
    (out / "significance.csv").write_text(text, newline="")
    (out / "warnings.txt").write_text("".join(w + "\n" for w in warnings), newline="")
    if plots:
        from .plots import plot_group_food, plot_rank_curves
        plot_group_food(runs, out / "group_food.svg")
        plot_rank_curves(runs, out / "rank_curves.svg")
    return rows
