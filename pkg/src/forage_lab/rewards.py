"""Group reward schemes shared by the evolutionary and Q-learning pipelines."""
from __future__ import annotations

import enum

import numpy as np


class RewardScheme(enum.Enum):
    MEAN = "mean"
    MINIMUM = "minimum"
    MAXIMUM = "maximum"

    @classmethod
    def parse(cls, text: str) -> "RewardScheme":
        key = text.strip().lower()
        aliases = {"min": "minimum", "max": "maximum", "avg": "mean"}
        return cls(aliases.get(key, key))


def group_score(collected, scheme: RewardScheme) -> float:
    """Single scalar every group member receives under ``scheme``."""
    values = np.asarray(collected, dtype=float)
    if values.shape != (4,):
        raise ValueError(f"expected 4 per-agent values, got shape {values.shape}")
    if scheme is RewardScheme.MEAN:
        return float(values.sum() / 4.0)
    if scheme is RewardScheme.MINIMUM:
        return float(values.min())
    if scheme is RewardScheme.MAXIMUM:
        return float(values.max())
    raise ValueError(f"unknown reward scheme {scheme!r}")


def aggregate_rewards(collected, scheme: RewardScheme) -> np.ndarray:
    """Replace each agent's take with the group statistic.

    The result always has four identical entries: pooled-and-shared food for
    MEAN, the weakest member's take for MINIMUM, the strongest for MAXIMUM.
    """
    return np.full(4, group_score(collected, scheme))
