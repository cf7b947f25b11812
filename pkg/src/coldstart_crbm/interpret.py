"""Group actors/genres by their learned feature-to-hidden weights."""

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureEmbedding:
    label: str
    vector: np.ndarray


def feature_embeddings(p, labels):
    """One embedding per feature: row ``k`` of U, its weights to every hidden unit.

    ``labels`` is a sequence of feature names or a FeatureMatrix.
    """
    labels = tuple(getattr(labels, "labels", labels))
    if len(labels) != p.U.shape[0]:
        raise ValueError(f"{len(labels)} labels for a U with {p.U.shape[0]} rows")
    return [FeatureEmbedding(lab, np.array(p.U[k])) for k, lab in enumerate(labels)]


@dataclass(frozen=True)
class Clustering:
    k: int
    labels: tuple
    points: np.ndarray
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: tuple  # inertia after each Lloyd iteration of the chosen run
    metric: str = "euclidean"

    def members(self, cluster):
        return np.flatnonzero(self.assignments == cluster)


def _inertia(X, C, assign):
    return float(((X - C[assign]) ** 2).sum())


def _kmeanspp(X, k, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # remaining points coincide with chosen centers
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(X, C, max_iter):
    history = []
    assign = None
    for _ in range(max_iter):
        new = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        C = C.copy()
        for j in range(len(C)):
            members = new == j
            if members.any():
                C[j] = X[members].mean(axis=0)
            else:
                # reseed from the point farthest from its own centroid
                far = int(((X - C[new]) ** 2).sum(axis=1).argmax())
                C[j] = X[far]
                new[far] = j
        history.append(_inertia(X, C, new))
        assign = new
    return C, assign, history


def kmeans(embeddings, k=8, seed=0, max_iter=300, restarts=10, metric="euclidean"):
    """Lloyd's k-means with k-means++ seeding, best of ``restarts`` runs.

    Points are put in a canonical (lexicographic) order before seeding, so
    the result does not depend on input order.  ``metric="cosine"`` clusters
    unit-normalized vectors.
    """
    labels = tuple(e.label for e in embeddings)
    X0 = np.array([e.vector for e in embeddings], dtype=np.float64)
    if X0.ndim != 2 or len(X0) == 0:
        raise ValueError("need at least one embedding")
    if not np.isfinite(X0).all():
        raise ValueError("embeddings must be finite")
    if metric == "cosine":
        norms = np.linalg.norm(X0, axis=1, keepdims=True)
        X0 = np.divide(X0, norms, out=np.zeros_like(X0), where=norms > 0)
    elif metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    n_distinct = len(np.unique(X0, axis=0))
    if not 1 <= k <= n_distinct:
        raise ValueError(f"k={k} must be between 1 and the number of distinct embeddings ({n_distinct})")

    order = np.lexsort(X0.T[::-1])
    X = X0[order]
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        C, assign, history = _lloyd(X, _kmeanspp(X, k, rng), max_iter)
        inertia = _inertia(X, C, assign)
        if best is None or inertia < best[0]:
            best = (inertia, C, assign, history)
    inertia, C, assign, history = best
    out = np.empty(len(X), dtype=np.int64)
    out[order] = assign
    return Clustering(k, labels, X0, out, C, inertia, tuple(history), metric)


def cluster_report(c, top_n=4):
    """Per cluster, the ``top_n`` labels closest to the centroid.

    Returns ``(records, text)``: JSON-ready dicts and a plain-text table.
    """
    records = []
    for j in range(c.k):
        members = c.members(j)
        d = ((c.points[members] - c.centroids[j]) ** 2).sum(axis=1)
        nearest = members[np.lexsort((members, d))][:top_n]
        records.append({"cluster_id": j, "size": int(len(members)),
                        "top_labels": [c.labels[i] for i in nearest]})
    width = max([len("Actors and Genres")] + [len(", ".join(r["top_labels"])) for r in records])
    rule = "+" + "-" * 14 + "+" + "-" * (width + 2) + "+"
    lines = [rule, f"| {'Topic Number':<12} | {'Actors and Genres':<{width}} |", rule]
    for r in records:
        lines.append(f"| {r['cluster_id'] + 1:<12} | {', '.join(r['top_labels']):<{width}} |")
        lines.append(rule)
    return records, "\n".join(lines) + "\n"


def write_cluster_report(c, top_n, json_path=None, text_path=None):
    records, text = cluster_report(c, top_n)
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(records, fh, indent=2)
            fh.write("\n")
    if text_path is not None:
        with open(text_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return records, text
