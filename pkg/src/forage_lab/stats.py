"""Rank curves, despotic flatness, confidence intervals and two-sample KS tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.96
KS_TERMS = 100


@dataclass(frozen=True)
class KsResult:
    d: float
    p: float


@dataclass(frozen=True)
class RankCurve:
    means: tuple        # rank 1 (best collector) first
    half_widths: tuple  # 95% CI half-widths, same order
    n: int


def rank_sort(per_agent) -> np.ndarray:
    """Per-agent values, highest first."""
    values = np.asarray(per_agent, dtype=float)
    return -np.sort(-values, kind="stable")


def despotic_flatness(ranked) -> float:
    """(top - bottom) / mean of a descending rank vector; 0 means perfectly equal."""
    values = np.asarray(ranked, dtype=float)
    if np.any(np.diff(values) > 0):
        raise ValueError("ranked values must be sorted in descending order")
    mean = values.mean()
    if mean == 0:
        if np.any(values != 0):
            raise ValueError("flatness undefined for zero-mean, non-zero ranks")
        return 0.0
    return float((values[0] - values[-1]) / mean)


def mean_ci95(samples) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width (sample sd, n - 1)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples for a confidence interval")
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(x.size))


def rank_curve(rank_rows) -> RankCurve:
    """Summarise rank-sorted rows (one per replicate) into per-rank mean and CI."""
    rows = np.asarray(rank_rows, dtype=float)
    stats = [mean_ci95(rows[:, k]) for k in range(rows.shape[1])]
    return RankCurve(tuple(m for m, _ in stats), tuple(h for _, h in stats), rows.shape[0])


def ks_statistic(a, b) -> float:
    """Largest gap between the two empirical CDFs over all sample points."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    points = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, points, side="right") / a.size
    cdf_b = np.searchsorted(b, points, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic P(K > lam) from the first 100 terms of the alternating series."""
    if lam <= 0:
        return 1.0
    k = np.arange(1, KS_TERMS + 1)
    terms = (-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam)
    return float(min(1.0, max(0.0, 2.0 * terms.sum())))


def ks_2samp(a, b, method: str = "asymptotic", rng: np.random.Generator | None = None,
             n_perm: int = 10_000) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test.

    ``method="permutation"`` replaces the asymptotic p-value by a Monte Carlo
    permutation estimate, which is preferable for samples smaller than 10.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    d = ks_statistic(a, b)
    if d == 0:
        return KsResult(0.0, 1.0)
    if method == "asymptotic":
        n, m = a.size, b.size
        return KsResult(d, kolmogorov_sf(d * math.sqrt(n * m / (n + m))))
    if method == "permutation":
        return KsResult(d, _permutation_p(a, b, d, rng or np.random.default_rng(0), n_perm))
    raise ValueError(f"unknown method {method!r}")


def _permutation_p(a, b, d, rng, n_perm):
    pooled = np.concatenate([a, b])
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(pooled)
        if ks_statistic(perm[:a.size], perm[a.size:]) >= d - 1e-12:
            hits += 1
    return (hits + 1) / (n_perm + 1)


def bonferroni_significant(p: float, m: int, alpha: float = 0.01) -> bool:
    if m < 1:
        raise ValueError("number of comparisons must be at least 1")
    return p < alpha / m
