"""K-nearest-neighbor conditional quantiles.

A lazy learner: fitting stores the data verbatim; prediction takes the
empirical quantile of the responses attached to the K Euclidean-nearest
training points.  Distance ties are broken toward the smallest training
index, which makes predictions deterministic and permutation-testable.
"""

from dataclasses import dataclass

import numpy as np

from .core import check_tau, empirical_quantile
from .data import Dataset


@dataclass(frozen=True)
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    tau: float
    k: int


def knn_fit(data: Dataset, tau: float, k: int) -> KnnModel:
    tau = check_tau(tau)
    k = int(k)
    if not 1 <= k <= data.n:
        raise ValueError(f"K must lie in [1, {data.n}], got {k}")
    return KnnModel(data.x, data.y, tau, k)


def neighbor_values(model: KnnModel, x_star) -> np.ndarray:
    """Responses of the K nearest training points (stable tie-break)."""
    x_star = np.asarray(x_star, dtype=float).ravel()
    if not np.all(np.isfinite(x_star)):
        raise ValueError("query point must be finite")
    d2 = ((model.x - x_star) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")[: model.k]
    return model.y[order]


def knn_predict(model: KnnModel, x_star) -> float:
    return empirical_quantile(neighbor_values(model, x_star), model.tau)


def knn_predict_batch(model: KnnModel, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.array([knn_predict(model, p) for p in points])
