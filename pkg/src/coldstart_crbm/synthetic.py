"""Synthetic rating data with a planted user-group x feature preference."""

from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, RatingDataset


@dataclass(frozen=True)
class PlantedData:
    ratings: RatingDataset
    features: FeatureMatrix
    groups: np.ndarray  # group of each user
    interactions: np.ndarray  # (n_groups, K) logit weights
    like_prob: np.ndarray  # (n_users, n_items)


def planted_dataset(n_users=200, n_items=300, n_features=10, n_groups=4, strength=3.0,
                    density=0.2, feature_prob=0.3, seed=0):
    """Ratings whose like-probability is ``sigmoid(f_i . Q[g_u] + c)``.

    Each user belongs to one of ``n_groups`` groups; each group has its own
    weight on every item feature.  A user rates an item with probability
    ``density``; liked pairs get a rating of 4 or 5, others 1 to 3.  The
    intercept ``c`` centres the logits so both classes are common.
    """
    rng = np.random.default_rng(seed)
    groups = rng.integers(n_groups, size=n_users)
    F = (rng.random((n_items, n_features)) < feature_prob).astype(np.float64)
    Q = rng.choice([-strength, strength], size=(n_groups, n_features))
    logits = F @ Q.T  # (items, groups)
    logits = logits - logits.mean()
    like_prob = 1.0 / (1.0 + np.exp(-logits[:, groups].T))
    observed = rng.random((n_users, n_items)) < density
    liked = rng.random((n_users, n_items)) < like_prob
    u, i = np.nonzero(observed)
    rating = np.where(liked[u, i], rng.integers(4, 6, size=len(u)), rng.integers(1, 4, size=len(u)))
    users = tuple(f"u{k}" for k in range(n_users))
    items = tuple(f"i{k}" for k in range(n_items))
    labels = tuple(f"feature{k}" for k in range(n_features))
    return PlantedData(RatingDataset(users, items, u, i, rating),
                       FeatureMatrix(labels, items, F), groups, Q, like_prob)


def full_rating_dataset(like, features):
    """Every user rates every item: 5 where ``like`` is true, else 1.

    ``like`` is (n_users, n_items) boolean; ``features`` (n_items, K) binary.
    Useful for tiny models whose exact likelihood can be enumerated.
    """
    like = np.asarray(like, dtype=bool)
    M, T = like.shape
    u, i = np.nonzero(np.ones_like(like))
    rating = np.where(like[u, i], 5, 1)
    users = tuple(f"u{k}" for k in range(M))
    items = tuple(f"i{k}" for k in range(T))
    F = np.asarray(features, dtype=np.float64)
    labels = tuple(f"feature{k}" for k in range(F.shape[1]))
    return RatingDataset(users, items, u, i, rating), FeatureMatrix(labels, items, F)
