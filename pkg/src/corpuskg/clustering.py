"""Seeded k-means (Lloyd iterations, k-means++ init) and cluster representatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyCluster, InvalidK


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray          # (k, d)
    assignments: np.ndarray        # (n,) cluster index per point
    objective: float               # sum of squared distances to centroids
    objective_trace: list[float] = field(default_factory=list)
    n_iter: int = 0
    seed: int = 0


def sq_objective(points: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    diffs = points - centroids[assignments]
    return float(np.sum(diffs * diffs))


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = rng.integers(n)
    centroids[0] = points[first]
    closest_sq = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest_sq.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest_sq / total)
        centroids[i] = points[idx]
        d = np.sum((points - centroids[i]) ** 2, axis=1)
        closest_sq = np.minimum(closest_sq, d)
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = np.sum(points ** 2, axis=1)[:, None] - 2 * points @ centroids.T \
        + np.sum(centroids ** 2, axis=1)[None, :]
    return np.argmin(d2, axis=1)


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int, tol: float) -> tuple[np.ndarray, np.ndarray, list[float], int]:
    centroids = _kmeanspp_init(points, k, rng)
    trace: list[float] = []
    assignments = _assign(points, centroids)
    for it in range(1, max_iter + 1):
        # update step: centroid = mean of assigned points; empty clusters are
        # reseeded to the point currently farthest from its centroid
        new_centroids = np.empty_like(centroids)
        for c in range(k):
            mask = assignments == c
            if mask.any():
                new_centroids[c] = points[mask].mean(axis=0)
            else:
                dists = np.sum((points - centroids[assignments]) ** 2, axis=1)
                far = int(np.argmax(dists))
                new_centroids[c] = points[far]
                assignments[far] = c
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        assignments = _assign(points, centroids)
        # keep centroids consistent with the final assignment for the trace
        trace.append(sq_objective(points, _means(points, assignments, centroids, k), assignments))
        if shift < tol:
            break
    centroids = _means(points, assignments, centroids, k)
    return centroids, assignments, trace, it


def _means(points: np.ndarray, assignments: np.ndarray, fallback: np.ndarray, k: int) -> np.ndarray:
    out = fallback.copy()
    for c in range(k):
        mask = assignments == c
        if mask.any():
            out[c] = points[mask].mean(axis=0)
    return out


def kmeans(points: Sequence[Sequence[float]] | np.ndarray, k: int, seed: int = 0,
           max_iter: int = 100, tol: float = 1e-8, n_restarts: int = 1) -> ClusterModel:
    """Cluster points into k groups minimizing the within-cluster sum of
    squared distances. Deterministic given the seed; the best of n_restarts
    independent k-means++ starts is returned."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if k <= 0 or k > n:
        raise InvalidK(f"k={k} invalid for {n} points")
    if not np.all(np.isfinite(pts)):
        raise InvalidK("points must be finite")
    max_iter = max(1, max_iter)

    best: ClusterModel | None = None
    for r in range(n_restarts):
        rng = np.random.default_rng(seed + r)
        centroids, assignments, trace, n_iter = _lloyd(pts, k, rng, max_iter, tol)
        obj = sq_objective(pts, centroids, assignments)
        if best is None or obj < best.objective - 1e-12:
            best = ClusterModel(k=k, centroids=centroids, assignments=assignments,
                                objective=obj, objective_trace=trace, n_iter=n_iter,
                                seed=seed + r)
    assert best is not None
    return best


def representative(labels: Sequence[str], vectors: Sequence[Sequence[float]] | np.ndarray) -> str:
    """Label whose vector is nearest the member mean; ties broken
    lexicographically by label."""
    if len(labels) == 0:
        raise EmptyCluster("cannot pick a representative of an empty cluster")
    vecs = np.asarray(vectors, dtype=float)
    if vecs.ndim == 1:
        vecs = vecs[:, None]
    centroid = vecs.mean(axis=0)
    dists = np.linalg.norm(vecs - centroid, axis=1)
    best = min(range(len(labels)), key=lambda i: (dists[i], labels[i]))
    return labels[best]
