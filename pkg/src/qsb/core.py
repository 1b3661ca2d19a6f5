"""Losses, empirical quantiles and evaluation metrics shared by all metamodels.

Conventions used throughout the package:

* Quantile levels ``tau`` live in the open interval (0, 1).
* The sample quantile is always the ``ceil(n*tau)``-th order statistic,
  never an interpolated value, so every estimator shares one definition.
* ``ceil(n*tau)`` is computed with a small guard (``CEIL_GUARD``) against
  floating-point fuzz: ``320 * 0.9`` must select the 288th order statistic
  even when the product rounds a hair above 288.
"""

import math

import numpy as np

CEIL_GUARD = 1e-9


class DegenerateTruthError(ValueError):
    """Raised when the constant model already matches the truth exactly,
    making the normalized error undefined."""


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return tau


def pinball_loss(tau: float, xi):
    """Asymmetric check loss (tau - 1{xi<0}) * xi.

    Accepts a scalar or array residual; nonnegative, zero iff xi == 0.
    """
    tau = check_tau(tau)
    xi = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(xi)):
        raise ValueError("pinball_loss requires finite residuals")
    out = np.where(xi < 0, (tau - 1.0) * xi, tau * xi)
    return float(out) if out.ndim == 0 else out


def smoothed_pinball(tau: float, eta: float, xi):
    """Huberized pinball loss, continuously differentiable in xi.

    Replaces |xi| by xi^2/(2*eta) inside [-eta, eta] and by |xi| - eta/2
    outside, then weights by tau (xi >= 0) or 1 - tau (xi < 0).  Converges
    pointwise to :func:`pinball_loss` as eta -> 0, with
    ``|smoothed - exact| <= eta/2 * max(tau, 1-tau)``.
    """
    tau = check_tau(tau)
    if not eta > 0:
        raise ValueError(f"smoothing width eta must be positive, got {eta}")
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    h = np.where(a <= eta, xi * xi / (2.0 * eta), a - eta / 2.0)
    out = np.where(xi < 0, 1.0 - tau, tau) * h
    return float(out) if out.ndim == 0 else out


def smoothed_pinball_grad(tau: float, eta: float, xi):
    """Derivative of :func:`smoothed_pinball` with respect to xi."""
    tau = check_tau(tau)
    if not eta > 0:
        raise ValueError(f"smoothing width eta must be positive, got {eta}")
    xi = np.asarray(xi, dtype=float)
    hp = np.clip(xi / eta, -1.0, 1.0)
    out = np.where(xi < 0, 1.0 - tau, tau) * hp
    return float(out) if out.ndim == 0 else out


def order_index(n: int, tau: float) -> int:
    """1-based index of the tau order statistic: ceil(n*tau), guarded."""
    k = int(math.ceil(n * tau - CEIL_GUARD))
    return min(max(k, 1), n)


def empirical_quantile(sample, tau: float) -> float:
    """The ceil(n*tau)-th smallest element of the sample."""
    tau = check_tau(tau)
    y = np.asarray(sample, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empirical_quantile of an empty sample")
    if not np.all(np.isfinite(y)):
        raise ValueError("empirical_quantile requires finite values")
    k = order_index(y.size, tau)
    return float(np.partition(y, k - 1)[k - 1])


def e_l2(q_hat, q_true) -> float:
    """Sum of squared prediction errors over a test grid."""
    q_hat = np.asarray(q_hat, dtype=float).ravel()
    q_true = np.asarray(q_true, dtype=float).ravel()
    if q_hat.size != q_true.size:
        raise ValueError(
            f"length mismatch: {q_hat.size} predictions vs {q_true.size} truths"
        )
    if q_hat.size == 0:
        raise ValueError("e_l2 of empty vectors")
    d = q_hat - q_true
    return float(d @ d)


def e_cq(q_hat, q_true, constant_quantile: float) -> float:
    """L2 error normalized by the constant model's error, in percent.

    100 means "as good as predicting the training-sample quantile
    everywhere"; below 100 beats it.
    """
    q_true = np.asarray(q_true, dtype=float).ravel()
    num = e_l2(q_hat, q_true)
    den = e_l2(np.full(q_true.size, float(constant_quantile)), q_true)
    if den == 0.0:
        raise DegenerateTruthError(
            "constant model reproduces the truth exactly; normalized error undefined"
        )
    return 100.0 * math.sqrt(num / den)


def rank_methods(errors: dict) -> dict:
    """Rank methods by error, 1 = best; ties broken by method id order."""
    if len(errors) < 2:
        raise ValueError("ranking needs at least two methods")
    ordered = sorted(errors, key=lambda m: (errors[m], str(m)))
    return {m: r for r, m in enumerate(ordered, start=1)}
