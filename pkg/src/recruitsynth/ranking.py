"""Pointwise linear ranking of candidates and group-fairness metrics for rankings.

The metric functions work on rank arrays, either one pool (1-D) or a batch
of pools over the same candidates (2-D, one row per job). Ranks use
competition ranking: a candidate's rank is 1 plus the number of candidates
with a strictly higher score, so ties share a position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .domain import Curriculum, FitnessVector, JobOffer, fitness_matrix

DEFAULT_THRESHOLDS = (5, 10, 15, 20)
FIXED_WEIGHTS = (0.8, 0.5, 1.0)


@dataclass(frozen=True)
class RankingModel:
    """``score = weights . fitness + beta`` with ``beta ~ N(0, noise_sigma^2)``.

    Weights are ordered (education, experience, skills, working_hours).
    """

    weights: tuple[float, float, float, float]
    noise_sigma: float = 0.0

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 4:
            raise ValueError(f"expected 4 weights, got {len(w)}")
        object.__setattr__(self, "weights", w)
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    @classmethod
    def with_hours_weight(cls, wh: float, noise_sigma: float = 0.01) -> "RankingModel":
        return cls((*FIXED_WEIGHTS, wh), noise_sigma)


@dataclass(frozen=True)
class RankedPool:
    """Candidates of one job with their scores, ranks and protected flags."""

    ranks: np.ndarray
    protected: np.ndarray
    scores: np.ndarray | None = None

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        protected = np.asarray(self.protected, dtype=bool)
        if ranks.ndim != 1 or ranks.shape != protected.shape:
            raise ValueError("ranks and protected flags must be 1-D and of equal length")
        if len(ranks) and ranks.min() < 1:
            raise ValueError("ranks start at 1")
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "protected", protected)
        if self.scores is not None:
            object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))

    @classmethod
    def from_scores(cls, scores, protected) -> "RankedPool":
        scores = np.asarray(scores, dtype=float)
        return cls(competition_ranks(scores), protected, scores)

    def __len__(self):
        return len(self.ranks)


def competition_ranks(scores: np.ndarray) -> np.ndarray:
    """Descending competition ranks; works row-wise on 2-D input."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        return np.zeros(scores.shape, dtype=np.int64)
    return rankdata(-scores, method="min", axis=-1).astype(np.int64)


def score_candidate(model: RankingModel, v: FitnessVector | Sequence[float], rng: np.random.Generator) -> float:
    beta = model.noise_sigma * rng.standard_normal()
    return float(np.dot(model.weights, v)) + beta


def score_matrix(model: RankingModel, fitness: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Scores for a ``(..., 4)`` fitness array given standard-normal ``noise``."""
    return fitness @ np.asarray(model.weights) + model.noise_sigma * noise


def rank_candidates(model: RankingModel, job: JobOffer, pool: Sequence[Curriculum], rng: np.random.Generator) -> RankedPool:
    if not pool:
        raise ValueError("cannot rank an empty candidate pool")
    fit = fitness_matrix([job], pool)[0]
    scores = score_matrix(model, fit, rng.standard_normal(len(pool)))
    return RankedPool.from_scores(scores, [c.protected for c in pool])


# -- fairness metrics -----------------------------------------------------------


def dp_batch(ranks: np.ndarray, protected: np.ndarray, k: int) -> np.ndarray:
    """Demographic parity per row; NaN where a group is empty."""
    ranks = np.atleast_2d(ranks)
    protected = np.broadcast_to(np.asarray(protected, dtype=bool), ranks.shape)
    top = ranks <= k
    n_prot = protected.sum(axis=1)
    n_unprot = (~protected).sum(axis=1)
    top_prot = (top & protected).sum(axis=1)
    top_unprot = (top & ~protected).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        dp = 1 - (top_prot / n_prot - top_unprot / n_unprot)
    dp[(n_prot == 0) | (n_unprot == 0)] = np.nan
    return dp


def demographic_parity(pool: RankedPool, k: int = 20) -> float:
    """``1 - (P(top-k | protected) - P(top-k | unprotected))``, in ``[0, 2]``.

    Returns NaN when the pool holds only one group; callers skip such jobs.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return float(dp_batch(pool.ranks, pool.protected, k)[0])


def _check_thresholds(thresholds) -> list[int]:
    thresholds = [int(t) for t in thresholds]
    if not thresholds:
        raise ValueError("threshold list is empty")
    if min(thresholds) < 2:
        raise ValueError("thresholds must be >= 2 (log2 discount vanishes at 1)")
    return thresholds


def rnd_normaliser(n: int, n_prot: int, thresholds) -> float:
    """Largest discounted deviation over the two extreme orderings of the pool."""
    thresholds = _check_thresholds(thresholds)
    share = n_prot / n
    first = 0.0
    last = 0.0
    for i in thresholds:
        size = min(i, n)
        first += abs(min(size, n_prot) / size - share) / math.log2(i)
        last += abs(max(0, size - (n - n_prot)) / size - share) / math.log2(i)
    return max(first, last)


def rnd_batch(ranks: np.ndarray, protected: np.ndarray, thresholds) -> np.ndarray:
    """rND per row; rows share candidate count and protected count."""
    thresholds = _check_thresholds(thresholds)
    ranks = np.atleast_2d(ranks)
    protected = np.broadcast_to(np.asarray(protected, dtype=bool), ranks.shape)
    n = ranks.shape[1]
    n_prot = protected.sum(axis=1)
    if (n_prot != n_prot[0]).any():
        raise ValueError("rnd_batch expects the same protected count in every row")
    n_prot = int(n_prot[0])
    z = rnd_normaliser(n, n_prot, thresholds)
    if z == 0:
        return np.zeros(len(ranks))
    share = n_prot / n
    total = np.zeros(len(ranks))
    for i in thresholds:
        top = ranks <= i
        dev = np.abs((top & protected).sum(axis=1) / top.sum(axis=1) - share)
        total = total + dev / math.log2(i)
    return total / z


def rnd_metric(pool: RankedPool, thresholds=DEFAULT_THRESHOLDS) -> float:
    """Normalised discounted difference of the pool, in ``[0, 1]``; 0 means proportional.

    Returns 0 when the pool has no protected (or only protected) candidates.
    """
    thresholds = _check_thresholds(thresholds)
    if len(pool) < min(thresholds):
        raise ValueError(f"pool of {len(pool)} is smaller than the smallest threshold {min(thresholds)}")
    return float(rnd_batch(pool.ranks, pool.protected, thresholds)[0])
