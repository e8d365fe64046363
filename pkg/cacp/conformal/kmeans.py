# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`kmeans`
====================================================

Lloyd's algorithm with k-means++ seeding, used to partition calibration covariates.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

try:
    from typing import Sequence, Union
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

CENTROID_TOLERANCE = 1e-6
MAX_ITERATIONS = 100


@dataclass(frozen=True)
class KMeansModel:
    """Fitted centroids and the cluster label of every training point."""

    centroids: np.ndarray
    labels: np.ndarray
    n_iter: int

    @property
    def n_clusters(self) -> int:
        """Number of centroids."""
        return self.centroids.shape[0]

    def predict(self, point) -> int:
        """Index of the nearest centroid; ties go to the lowest index."""
        point = np.asarray(getattr(point, "components", point), dtype=float)
        distances = ((self.centroids - point) ** 2).sum(axis=1)
        return int(np.argmin(distances))

    def cluster_size(self, label: int) -> int:
        """Number of training points in cluster ``label``."""
        return int(np.count_nonzero(self.labels == label))


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    distances = (
        (points**2).sum(axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + (centroids**2).sum(axis=1)[None, :]
    )
    return np.maximum(distances, 0.0)


def _kmeans_plusplus(
    points: np.ndarray, n_clusters: int, rng: np.random.Generator
) -> np.ndarray:
    n_points = points.shape[0]
    centroids = np.empty((n_clusters, points.shape[1]))
    centroids[0] = points[rng.integers(n_points)]
    for i in range(1, n_clusters):
        nearest = _squared_distances(points, centroids[:i]).min(axis=1)
        total = nearest.sum()
        if total > 0.0:
            index = rng.choice(n_points, p=nearest / total)
        else:
            # Every point already sits on a centroid.
            index = rng.integers(n_points)
        centroids[i] = points[index]
    return centroids


def _as_matrix(points: Union[np.ndarray, Sequence]) -> np.ndarray:
    if len(points) and hasattr(points[0], "components"):
        points = [point.components for point in points]
    matrix = np.asarray(points, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    return matrix


def fit_kmeans(
    points: Union[np.ndarray, Sequence],
    K: int,
    seed: int = 0,
    *,
    tol: float = CENTROID_TOLERANCE,
    max_iter: int = MAX_ITERATIONS,
) -> KMeansModel:
    """
    Partition ``points`` into ``K`` clusters.

    Converges when no centroid moves more than ``tol`` or after ``max_iter``
    iterations. A cluster that empties is re-seeded from the point farthest from
    its assigned centroid. Deterministic for a given ``seed``.

    :param points: array of shape ``(n, d)`` or a sequence of `CovariateVector`
    :param int K: number of clusters
    :param int seed: seed of the k-means++ initialization
    :raises ValueError: "too few points" when ``n < K``
    """
    if K < 1:
        raise ValueError("K must be positive")
    matrix = _as_matrix(points)
    n_points = matrix.shape[0]
    if n_points < K:
        raise ValueError("too few points")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(matrix, K, rng)
    iteration = 0
    for iteration in range(1, max_iter + 1):
        distances = _squared_distances(matrix, centroids)
        labels = np.argmin(distances, axis=1)
        own = distances[np.arange(n_points), labels]
        updated = centroids.copy()
        for j in range(K):
            members = labels == j
            if members.any():
                updated[j] = matrix[members].mean(axis=0)
            else:
                farthest = int(np.argmax(own))
                logger.debug("re-seeding empty cluster %d from point %d", j, farthest)
                updated[j] = matrix[farthest]
                own[farthest] = -1.0
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if shift < tol:
            break
    labels = np.argmin(_squared_distances(matrix, centroids), axis=1)
    centroids.setflags(write=False)
    labels.setflags(write=False)
    return KMeansModel(centroids, labels, iteration)
