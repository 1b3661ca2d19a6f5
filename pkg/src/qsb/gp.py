"""Shared Gaussian-process machinery.

Matern-5/2 kernel with per-dimension lengthscales, Cholesky-based posterior
with heteroscedastic noise, and the marginal likelihood with its analytic
gradient over (variance, lengthscales).  The prior mean is zero throughout.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

_SQRT5 = math.sqrt(5.0)

# Relative jitter escalation applied to the Cholesky of kernel + noise
# matrices before giving up.
_JITTERS = (0.0, 1e-10, 1e-8, 1e-6)


class GpNumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class Matern52:
    """k(x,x') = rho2 * (1 + sqrt5*r + 5r^2/3) * exp(-sqrt5*r) with
    r the lengthscale-weighted Euclidean distance."""

    rho2: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if not (self.rho2 > 0 and np.all(ls > 0)):
            raise ValueError("variance and lengthscales must be positive")
        object.__setattr__(self, "rho2", float(self.rho2))
        object.__setattr__(self, "lengthscales", ls)

    @property
    def n_hyper(self) -> int:
        return 1 + self.lengthscales.size

    def hyper_vector(self) -> np.ndarray:
        """(rho2, theta_1, ..., theta_d) as one array."""
        return np.concatenate([[self.rho2], self.lengthscales])

    @staticmethod
    def from_vector(v) -> "Matern52":
        v = np.asarray(v, dtype=float)
        return Matern52(v[0], v[1:])


def _scaled_sq_dists(kernel: Matern52, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    r2 = np.zeros((a.shape[0], b.shape[0]))
    for k, th in enumerate(kernel.lengthscales):
        r2 += ((a[:, k, None] - b[None, :, k]) / th) ** 2
    return r2


def _matern_from_r(kernel: Matern52, r: np.ndarray) -> np.ndarray:
    return kernel.rho2 * (1.0 + _SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-_SQRT5 * r)


def kernel_eval(kernel: Matern52, x, xp) -> float:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xp = np.atleast_2d(np.asarray(xp, dtype=float))
    r = np.sqrt(_scaled_sq_dists(kernel, x, xp))
    return float(_matern_from_r(kernel, r)[0, 0])


def cross(kernel: Matern52, a, b) -> np.ndarray:
    """Kernel matrix between row sets a (m x d) and b (n x d)."""
    return _matern_from_r(kernel, np.sqrt(_scaled_sq_dists(kernel, a, b)))


def gram(kernel: Matern52, x) -> np.ndarray:
    return cross(kernel, x, x)


def gram_with_grads(kernel: Matern52, x) -> tuple:
    """Gram matrix plus its derivatives w.r.t. (rho2, theta_1, ..., theta_d).

    d k / d theta_j = (5/3) * rho2 * (1 + sqrt5 r) * exp(-sqrt5 r)
                      * delta_j^2 / theta_j^3,
    which stays finite at r = 0.
    """
    x = np.atleast_2d(x)
    r2 = _scaled_sq_dists(kernel, x, x)
    r = np.sqrt(r2)
    e = np.exp(-_SQRT5 * r)
    K = kernel.rho2 * (1.0 + _SQRT5 * r + 5.0 * r2 / 3.0) * e
    common = (5.0 / 3.0) * kernel.rho2 * (1.0 + _SQRT5 * r) * e
    grads = [K / kernel.rho2]
    for j, th in enumerate(kernel.lengthscales):
        dj2 = (x[:, j, None] - x[None, :, j]) ** 2
        grads.append(common * dj2 / th**3)
    return K, grads


def chol_with_jitter(a: np.ndarray, context: str = "matrix"):
    """Lower Cholesky factor with escalating relative jitter."""
    scale = float(np.mean(np.diag(a)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    for jit in _JITTERS:
        try:
            L = cholesky(a + jit * scale * np.eye(a.shape[0]), lower=True)
            return L, jit * scale
        except np.linalg.LinAlgError:
            continue
    raise GpNumericalError(
        f"{context} not positive definite even with jitter {_JITTERS[-1]:g} * mean diagonal"
    )


@dataclass(frozen=True)
class GpPosterior:
    """Predictive mean and (clamped nonnegative) variance at query points."""

    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray = None


def gp_posterior(
    kernel: Matern52,
    x: np.ndarray,
    obs: np.ndarray,
    noise_diag,
    x_star,
    full_cov: bool = False,
) -> GpPosterior:
    """Zero-mean GP posterior with per-point observation noise."""
    x = np.atleast_2d(x)
    x_star = np.atleast_2d(x_star)
    obs = np.asarray(obs, dtype=float).ravel()
    noise = np.asarray(noise_diag, dtype=float).ravel()
    if noise.size == 1:
        noise = np.full(obs.size, noise[0])
    if np.any(noise < 0):
        raise ValueError("noise variances must be nonnegative")
    K = gram(kernel, x)
    L, _ = chol_with_jitter(K + np.diag(noise), "kernel + noise matrix")
    alpha = cho_solve((L, True), obs)
    Ks = cross(kernel, x_star, x)
    mean = Ks @ alpha
    v = solve_triangular(L, Ks.T, lower=True)
    if full_cov:
        covar = cross(kernel, x_star, x_star) - v.T @ v
        var = np.maximum(np.diag(covar), 0.0)
        return GpPosterior(mean, var, covar)
    var = kernel.rho2 - (v * v).sum(axis=0)
    return GpPosterior(mean, np.maximum(var, 0.0))


def log_marginal_likelihood(
    kernel: Matern52, x: np.ndarray, obs: np.ndarray, noise_diag
) -> tuple:
    """Gaussian log marginal likelihood and its gradient over
    (rho2, theta_1, ..., theta_d)."""
    x = np.atleast_2d(x)
    obs = np.asarray(obs, dtype=float).ravel()
    noise = np.asarray(noise_diag, dtype=float).ravel()
    if noise.size == 1:
        noise = np.full(obs.size, noise[0])
    n = obs.size
    K, grads = gram_with_grads(kernel, x)
    L, _ = chol_with_jitter(K + np.diag(noise), "kernel + noise matrix")
    alpha = cho_solve((L, True), obs)
    lml = (
        -0.5 * float(obs @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    Ainv = cho_solve((L, True), np.eye(n))
    M = np.outer(alpha, alpha) - Ainv
    grad = np.array([0.5 * float(np.sum(M * dK)) for dK in grads])
    return lml, grad
