"""
MovieLens-100K, end to end
==========================

943 users, 1682 movies, 100,000 ratings.  333 movies are held out as new
items; the remaining ones train the model.  Movie features are the 19 genre
flags of ``u.item``.

Get the data first with ``python scripts/fetch_movielens.py``.  The same run
from the shell::

    coldstart-crbm prepare --ratings DATA/u.data --genres DATA/u.item --out run
    coldstart-crbm train --out run --task rating
    coldstart-crbm evaluate --out run --task rating
"""

import os
import time
from pathlib import Path

from coldstart_crbm.data import (parse_movielens_genres, parse_ratings, split_cold_start,
                                 to_task)
from coldstart_crbm.evaluation import evaluate
from coldstart_crbm.training import TrainConfig, train

root = Path(os.environ.get("COLDSTART_CRBM_DATA", "/root/data")) / "ml-100k"

ratings = parse_ratings(root / "u.data")
genres = parse_movielens_genres(root / "u.item", ratings.items)
print(ratings.n_users, "users,", ratings.n_items, "items,", len(ratings), "ratings")
print("features:", ", ".join(genres.labels))

split = split_cold_start(ratings, 333, seed=0)
print("train ratings", len(split.train), " test ratings", len(split.test))

# %%
# Three ways to read the same data.  A rating of 4 or 5 counts as "like".
#
# * rating: only observed pairs; missing pairs are left out of training
#   and testing.
# * explicit: every (user, new item) pair; liked = positive, everything
#   else (disliked or unrated) = negative.
# * implicit: every pair; rated at all = positive.

for task in ("rating", "explicit", "implicit"):
    _, test = to_task(split, task)
    print(f"{task:9s} test pairs {len(test):7d}  positives {test.n_positive}")

# %%
# Train with the defaults: 100 hidden units, learning rate 0.05, weight
# decay 0.001 on U, 50 epochs of CD-1.

started = time.perf_counter()
params, report = train(split, genres, "rating", TrainConfig())
print(f"trained in {time.perf_counter() - started:.1f}s; "
      f"recon error {report.epochs[0]['recon_error']:.4f} -> {report.epochs[-1]['recon_error']:.4f}")

# %%
# Held-out AUC.  The one-class tasks need their own model (trained with
# sampled negatives); pass ``task="explicit"`` to ``train`` for that.

result = evaluate(params, split, genres, "rating", roc_path="roc_rating.csv")
print(f"rating-prediction AUC {result.auc:.4f} over {result.n_pairs} pairs; ROC -> roc_rating.csv")
