"""K-means analysis of the learned relation map."""

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from strl.config import KMEANS_RESTARTS, KMEANS_TOL
from strl.utils.errors import ValidationError


@dataclass
class ClusterResult:
    """Per-cell cluster labels and distances to the assigned centroid, both (h, w)."""

    labels: np.ndarray
    distances: np.ndarray
    centers: np.ndarray
    inertia: float


def cluster_relation_map(relation_map, n_clusters, seed=0, n_init=KMEANS_RESTARTS, max_iter=300):
    """
    Group the d-vectors of a relation map into ``n_clusters`` classes.

    Args:
        relation_map: Array (d, h, w) or (1, d, h, w)
        n_clusters: Number of clusters, 2 <= c <= h*w
        seed: Seed of the k-means++ initialisation
        n_init: Number of restarts
        max_iter: Lloyd iterations per restart

    Returns:
        ClusterResult
    """
    values = np.asarray(relation_map, dtype=np.float64)
    if values.ndim == 4 and values.shape[0] == 1:
        values = values[0]
    if values.ndim != 3:
        raise ValidationError(f"relation map must be (d, h, w), got {values.shape}")

    d, h, w = values.shape
    if not 2 <= n_clusters <= h * w:
        raise ValidationError(f"cluster count must be between 2 and {h * w}, got {n_clusters}")

    # One row per cell, raster order
    points = values.reshape(d, h * w).T
    kmeans = KMeans(n_clusters=n_clusters, init='k-means++', n_init=n_init, max_iter=max_iter,
                    tol=KMEANS_TOL, random_state=seed, algorithm='lloyd')
    labels = kmeans.fit_predict(points)
    distances = np.linalg.norm(points - kmeans.cluster_centers_[labels], axis=1)

    return ClusterResult(labels.reshape(h, w).astype(np.int64), distances.reshape(h, w),
                         kmeans.cluster_centers_, float(kmeans.inertia_))
