"""Quantile kriging: GP smoothing of pointwise quantile estimates from a
replicated design, with bootstrap-estimated heteroscedastic noise.

Per base point the tau order statistic of its replicates is the local
quantile observation; its sampling variance is approximated by the variance
of the order statistic across bootstrap resamples of the replicates.  A
zero-mean Matern-5/2 GP is then fitted to the local quantiles by maximizing
the Gaussian marginal likelihood (multi-start gradient ascent over variance
and lengthscales), treating the bootstrap variances as fixed observation
noise.
"""

from dataclasses import dataclass

import numpy as np

from .core import check_tau, empirical_quantile
from .data import ReplicatedDataset
from .gp import GpPosterior, Matern52, gp_posterior, log_marginal_likelihood


@dataclass(frozen=True)
class QkModel:
    bases: np.ndarray
    local_q: np.ndarray
    noise_diag: np.ndarray
    kernel: Matern52
    tau: float


def local_quantiles(data: ReplicatedDataset, tau: float) -> np.ndarray:
    """Per-base order-statistic quantile over the replicates."""
    tau = check_tau(tau)
    return np.array([empirical_quantile(row, tau) for row in data.replicates])


def bootstrap_variance(
    replicates, tau: float, n_boot: int = 200, rng: np.random.Generator = None
) -> float:
    """Variance of the replicate quantile across bootstrap resamples."""
    tau = check_tau(tau)
    y = np.asarray(replicates, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("bootstrap variance needs at least 2 replicates")
    rng = np.random.default_rng(rng)
    idx = rng.integers(0, y.size, size=(n_boot, y.size))
    qs = np.array([empirical_quantile(y[row], tau) for row in idx])
    return float(np.var(qs, ddof=1))


def qk_fit(
    data: ReplicatedDataset,
    tau: float,
    n_boot: int = 200,
    rng: np.random.Generator = None,
    n_start: int = None,
    fixed_kernel: Matern52 = None,
) -> QkModel:
    """Estimate local quantiles and noise, then maximize the marginal
    likelihood over (variance, lengthscales).  With ``fixed_kernel`` the
    likelihood search is skipped."""
    from .tuning import multistart_ml

    tau = check_tau(tau)
    if data.n_bases < 2:
        raise ValueError("need at least 2 base points")
    rng = np.random.default_rng(rng)
    q = local_quantiles(data, tau)
    noise = np.array(
        [bootstrap_variance(row, tau, n_boot, rng) for row in data.replicates]
    )
    if fixed_kernel is not None:
        return QkModel(data.bases, q, noise, fixed_kernel, tau)

    span = data.domain[:, 1] - data.domain[:, 0]
    qvar = max(float(np.var(q)), 1e-8)
    bounds = np.vstack(
        [
            [1e-3 * qvar, 1e3 * qvar],
            np.column_stack([1e-2 * span, 10.0 * span]),
        ]
    )

    def loglik(vec):
        return log_marginal_likelihood(Matern52.from_vector(vec), data.bases, q, noise)

    result = multistart_ml(loglik, bounds, rng, n_start=n_start)
    return QkModel(data.bases, q, noise, Matern52.from_vector(result.best_point), tau)


def qk_predict(model: QkModel, points) -> GpPosterior:
    """GP posterior of the quantile surface at the query points."""
    return gp_posterior(
        model.kernel, model.bases, model.local_q, model.noise_diag, points
    )
