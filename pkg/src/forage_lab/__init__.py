"""Foraging-group experiments comparing MEAN, MINIMUM and MAXIMUM group rewards
under a genetic algorithm and under tabular Q-learning."""

__version__ = "0.1.0"

from .rewards import RewardScheme, aggregate_rewards

__all__ = ["RewardScheme", "aggregate_rewards", "__version__"]
