"""Confidence intervals for quantile predictions: Gaussian-posterior,
neighborhood Chernoff bounds, and bootstrap refitting.

The Gaussian interval converts the level to the exact two-sided normal
factor, so the familiar 1.96 multiplier corresponds to level 0.95.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import check_tau, empirical_quantile
from .data import Dataset


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError("interval bounds out of order")
        check_tau(self.level)

    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def bayesian_ci(mean: float, variance: float, level: float = 0.9) -> Interval:
    """mean +/- z * sqrt(variance) with z the exact two-sided normal factor."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    z = ndtri(0.5 + check_tau(level) / 2.0)
    half = z * math.sqrt(variance)
    return Interval(mean - half, mean + half, level)


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), 0*log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    q = check_tau(q)
    out = 0.0
    if p > 0:
        out += p * math.log(p / q)
    if p < 1:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def knn_chernoff_ci(neighbor_values, tau: float, eta: float) -> Interval:
    """Distribution-free interval for the neighborhood quantile.

    U is the smallest neighbor value whose empirical CDF both reaches tau
    and is far enough from it in Bernoulli KL (K * KL >= log(2/eta)); L is
    symmetric from below.  Sides with no qualifying value fall back to the
    sample extremes, which keeps the interval conservative.
    """
    tau = check_tau(tau)
    eta = check_tau(eta)
    y = np.sort(np.asarray(neighbor_values, dtype=float).ravel())
    k = y.size
    if k < 2:
        raise ValueError("need at least 2 neighbor values")
    thresh = math.log(2.0 / eta)
    fhat = np.arange(1, k + 1) / k

    upper = y[-1]
    for i in range(k):
        if fhat[i] >= tau and k * bernoulli_kl(fhat[i], tau) >= thresh:
            upper = y[i]
            break
    lower = y[0]
    for i in range(k - 1, -1, -1):
        if fhat[i] <= tau and k * bernoulli_kl(fhat[i], tau) >= thresh:
            lower = y[i]
            break
    return Interval(float(lower), float(upper), 1.0 - eta)


def bootstrap_ci(
    model_factory,
    data: Dataset,
    tau: float,
    points,
    n_boot: int = 100,
    level: float = 0.9,
    rng: np.random.Generator = None,
) -> list:
    """Pointwise empirical intervals over refits on resampled datasets.

    Hyperparameters are whatever the factory bakes in (held fixed across
    resamples).  More than 10% failed refits aborts; occasional failures
    are skipped.
    """
    tau = check_tau(tau)
    level = check_tau(level)
    if n_boot < 20:
        raise ValueError("need at least 20 bootstrap refits")
    rng = np.random.default_rng(rng)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    preds, failures = [], 0
    for _ in range(n_boot):
        idx = rng.integers(0, data.n, data.n)
        sub = Dataset(data.x[idx], data.y[idx], data.domain, require_distinct=False)
        try:
            fitted = model_factory().fit(sub, tau)
            preds.append(np.asarray(fitted.predict(points), dtype=float))
        except Exception:
            failures += 1
            if failures > 0.1 * n_boot:
                raise RuntimeError(
                    f"{failures} of {n_boot} bootstrap refits failed"
                )
    preds = np.vstack(preds)
    lo_level = (1.0 - level) / 2.0
    hi_level = (1.0 + level) / 2.0
    out = []
    for j in range(points.shape[0]):
        col = preds[:, j]
        out.append(
            Interval(
                empirical_quantile(col, lo_level),
                empirical_quantile(col, hi_level),
                level,
            )
        )
    return out
