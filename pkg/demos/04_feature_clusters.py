"""
What the feature weights learned
================================

Row k of U says how feature k (a genre here; actors work the same way)
pushes each hidden unit.  Features with similar rows affect users the same
way, so clustering the rows groups them.

This trains on MovieLens-100K with genre features, clusters the 19 genres
into 8 groups and prints the nearest members of each.
"""

import os
from pathlib import Path

import numpy as np

from coldstart_crbm.data import parse_movielens_genres, parse_ratings, split_cold_start
from coldstart_crbm.interpret import cluster_report, feature_embeddings, kmeans
from coldstart_crbm.training import TrainConfig, train

root = Path(os.environ.get("COLDSTART_CRBM_DATA", "/root/data")) / "ml-100k"
ratings = parse_ratings(root / "u.data")
genres = parse_movielens_genres(root / "u.item", ratings.items)
split = split_cold_start(ratings, 333, seed=0)
params, _ = train(split, genres, "rating", TrainConfig())

# %%
# One 100-dimensional vector per genre.

emb = feature_embeddings(params, genres)
norms = {e.label: np.linalg.norm(e.vector) for e in emb}
print("largest rows of U:", sorted(norms, key=norms.get, reverse=True)[:5])

# %%
# k-means with k = 8, best of 10 k-means++ restarts.

clusters = kmeans(emb, k=8, seed=0)
print("inertia by Lloyd iteration:", np.round(clusters.history, 4))
records, table = cluster_report(clusters, top_n=4)
print(table)

# %%
# Frequent genres collect the most gradient, so their rows are long and
# each tends to get a cluster to itself, while rare genres pile up near the
# origin.  Cosine distance ignores row length and groups by direction only.

print(cluster_report(kmeans(emb, k=8, seed=0, metric="cosine"), top_n=4)[1])
