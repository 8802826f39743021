"""Synthetic rating generator with planted low-rank structure.

Ratings come from bucketing a rank-r Gaussian factor product into the score
scale, then corrupting a fraction of pairs with uniformly random scores.
The clean pairs are predictable from the structure while the corrupted ones
are not, which is exactly the contrast a reliability measure must pick up,
so this generator backs the reliability acceptance checks and benchmarks.
"""

from __future__ import annotations

import numpy as np

from .data import RatingDataset
from .scores import ScoreSet


def make_synthetic_dataset(num_users: int = 500, num_items: int = 200,
                           num_scores: int = 5, rank: int = 3,
                           density: float = 0.12, noise: float = 0.3,
                           seed: int = 1234) -> RatingDataset:
    """Generate a planted-structure dataset.

    Args:
        num_users, num_items: matrix dimensions.
        num_scores: scale size; scores are the integers 1..num_scores.
        rank: latent dimension of the planted structure.
        density: probability that a pair is rated.
        noise: probability that a rated pair gets a random score instead of
            its structural one.
        seed: drives everything; equal arguments give the identical dataset.
    """
    if not 0 < density <= 1:
        raise ValueError(f"density must be in (0, 1], got {density}")
    if not 0 <= noise <= 1:
        raise ValueError(f"noise must be in [0, 1], got {noise}")
    gen = np.random.Generator(np.random.Philox(seed))
    A = gen.normal(size=(num_users, rank))
    B = gen.normal(size=(num_items, rank))
    raw = (A @ B.T) / np.sqrt(rank)

    # equal-mass buckets of the (approximately) standard normal margin
    quantiles = np.quantile(raw, np.linspace(0, 1, num_scores + 1)[1:-1])
    structural = np.searchsorted(quantiles, raw, side="right")

    rated = gen.random((num_users, num_items)) < density
    corrupt = gen.random((num_users, num_items)) < noise
    random_scores = gen.integers(0, num_scores, size=(num_users, num_items))
    score_idx = np.where(corrupt, random_scores, structural)

    users, items = np.nonzero(rated)
    score_set = ScoreSet(range(1, num_scores + 1))
    return RatingDataset(score_set,
                         [f"u{u}" for u in range(num_users)],
                         [f"i{i}" for i in range(num_items)],
                         users, items, score_idx[users, items])
