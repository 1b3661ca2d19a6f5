"""Variational-EM Gaussian-process quantile regression.

The response is modeled as the latent quantile surface plus asymmetric
Laplace noise.  A scale-mixture representation introduces per-point latent
exponentials w_i and a global scale sigma; the factorized variational
posterior is Gaussian over the latent surface, generalized-inverse-Gaussian
over each w_i, and (by restriction) inverse-gamma IG(a, b) over sigma, with
(a, b) chosen by numerically maximizing the corresponding piece of the
evidence lower bound.  Kernel hyperparameters are re-optimized each M-step
by multi-start gradient ascent in log-space on

    L(theta) = 0.5 * ( mu' Sigma^{-1} mu - log|D^{-1} + K| ),

holding the noise-precision diagonal D (and the linear term it induces)
fixed.  Writing A = K + D^{-1} and v = D y - ((1-2*tau)/2) E[1/sigma] 1,
the identities mu = K z with z = v - A^{-1} K v, Sigma = K - K A^{-1} K
give the numerically stable forms used throughout; in particular the
predictive variance reduces to k** - K* A^{-1} K*'.

Distribution conventions (validated by quadrature in the test suite):
IG(a, b) has density prop. to s^{-a-1} exp(-b/s), so E[1/s] = a/b and
E[1/s^2] = a(a+1)/b^2; GIG(p, alpha, beta) has density prop. to
w^{p-1} exp(-(alpha*w + beta/w)/2), so at p = 1/2, E[1/w] = sqrt(alpha/beta).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import gammaln, polygamma, psi

from .core import check_tau, empirical_quantile, pinball_loss
from .data import Dataset
from .gp import GpPosterior, Matern52, chol_with_jitter, cross, gram, gram_with_grads

logger = logging.getLogger(__name__)

_PRIOR_A = 1e-6  # inverse-gamma prior on sigma
_PRIOR_B = 1e-6
_BETA_FLOOR = 1e-12


def laplace_loglik(y, q, tau: float, sigma: float) -> float:
    """Asymmetric Laplace log likelihood of responses y around quantiles q."""
    tau = check_tau(tau)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    y = np.asarray(y, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    return float(
        y.size * math.log(tau * (1.0 - tau) / sigma)
        - np.sum(pinball_loss(tau, y - q)) / sigma
    )


def gig_alpha(tau: float) -> float:
    """Shared first GIG parameter of the w_i posteriors."""
    tau = check_tau(tau)
    return (1.0 - 2.0 * tau) ** 2 / (2.0 * tau * (1.0 - tau)) + 2.0


@dataclass(frozen=True)
class VbState:
    """Variational posterior after one E-step.

    mu/sigma_mat describe the Gaussian over the latent surface (consistent
    with `kernel` and the frozen precision diagonal d_diag); e_inv_w are the
    GIG means E[1/w_i]; (a, b) the restricted IG over sigma.  v and z cache
    the linear algebra that reproduces mu = K z.
    """

    mu: np.ndarray
    sigma_mat: np.ndarray
    e_inv_w: np.ndarray
    a: float
    b: float
    d_diag: np.ndarray = None
    v: np.ndarray = None
    z: np.ndarray = None

    @property
    def e_inv_sigma(self) -> float:
        return self.a / self.b

    @property
    def e_inv_sigma2(self) -> float:
        return self.a * (self.a + 1.0) / self.b**2


def _j_value_grad(log_ab, gamma, delta, n):
    """The (a, b) objective in log-space, with analytic gradient."""
    a, b = math.exp(log_ab[0]), math.exp(log_ab[1])
    g0 = gamma + _PRIOR_B
    val = (
        (a - n - _PRIOR_A) * (math.log(b) - psi(a))
        + (b - g0) * (a / b)
        - delta * a * (a + 1.0) / b**2
        - a * math.log(b)
        + gammaln(a)
    )
    da = -(a - n - _PRIOR_A) * polygamma(1, a) + 1.0 - g0 / b - delta * (2.0 * a + 1.0) / b**2
    db = -(n + _PRIOR_A) / b + g0 * a / b**2 + 2.0 * delta * a * (a + 1.0) / b**3
    return val, np.array([da * a, db * b])


def _b_star(a, gamma, delta, n):
    """Positive root of dJ/db = 0 at fixed a (profile optimum)."""
    g0 = gamma + _PRIOR_B
    disc = g0 * g0 * a * a + 8.0 * delta * (n + _PRIOR_A) * a * (a + 1.0)
    return (g0 * a + math.sqrt(max(disc, 0.0))) / (2.0 * (n + _PRIOR_A))


def optimize_ab(gamma: float, delta: float, n: int, current=None) -> tuple:
    """Maximize J(a, b) by quasi-Newton in (log a, log b) from several
    deterministic starts; tolerance 1e-8."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    starts = []
    for a0 in (n + 1.0, max(n / 2.0, 1.0), 2.0 * n + 1.0, 2.0):
        starts.append((a0, max(_b_star(a0, gamma, delta, n), 1e-12)))
    if current is not None:
        starts.append(current)

    def neg_j(u):
        val, grad = _j_value_grad(u, gamma, delta, n)
        return -val, -grad

    best, best_val = None, -np.inf
    for a0, b0 in starts:
        res = minimize(
            neg_j,
            np.log([max(a0, 1e-8), max(b0, 1e-12)]),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 200, "gtol": 1e-8, "ftol": 1e-12},
        )
        if np.all(np.isfinite(res.x)) and -res.fun > best_val:
            best_val = -res.fun
            best = res.x
    if best is None:
        raise RuntimeError("maximization of the (a, b) objective failed")
    return float(math.exp(best[0])), float(math.exp(best[1]))


def _posterior_solves(kernel: Matern52, x, d_diag, v):
    """Shared linear algebra: returns (K, L_A, z, mu, diag_Sigma, V)."""
    K = gram(kernel, x)
    A = K + np.diag(1.0 / d_diag)
    L, _ = chol_with_jitter(A, "kernel + inverse-precision matrix")
    Kv = K @ v
    u = cho_solve((L, True), Kv)
    z = v - u
    mu = K @ z
    V = solve_triangular(L, K, lower=True)
    return K, L, z, mu, V


def e_step(state: VbState, data: Dataset, tau: float, kernel: Matern52) -> VbState:
    """One coordinate sweep of the variational posterior at fixed kernel.

    Order: precision diagonal from the incoming (sigma, w) statistics; then
    the Gaussian (mu, Sigma); then the GIG parameters and E[1/w]; then the
    restricted IG (a, b) by maximizing J.
    """
    tau = check_tau(tau)
    y = data.y
    n = y.size
    d_diag = (
        (tau * (1.0 - tau) / 2.0) * state.e_inv_sigma2 * np.maximum(state.e_inv_w, 1e-300)
    )
    v = d_diag * y - ((1.0 - 2.0 * tau) / 2.0) * state.e_inv_sigma * np.ones(n)
    K, L, z, mu, V = _posterior_solves(kernel, data.x, d_diag, v)
    Sigma = K - V.T @ V
    Sigma = 0.5 * (Sigma + Sigma.T)
    s_ii = np.maximum(np.diag(Sigma), 0.0)

    sq = (y - mu) ** 2 + s_ii
    beta = (tau * (1.0 - tau) / 2.0) * state.e_inv_sigma2 * sq
    if np.any(beta < _BETA_FLOOR):
        logger.warning("flooring %d beta values at %g", int(np.sum(beta < _BETA_FLOOR)), _BETA_FLOOR)
        beta = np.maximum(beta, _BETA_FLOOR)
    e_inv_w = np.sqrt(gig_alpha(tau) / beta)

    gamma = -((1.0 - 2.0 * tau) / 2.0) * float(np.sum(y - mu))
    delta = (tau * (1.0 - tau) / 4.0) * float(np.sum(e_inv_w * sq))
    a, b = optimize_ab(gamma, delta, n, current=(state.a, state.b))
    return VbState(mu, Sigma, e_inv_w, a, b, d_diag=d_diag, v=v, z=z)


def lower_bound_and_grad(kernel: Matern52, x, d_diag, v):
    """L(theta) = 0.5 (v' Sigma v - log|K + D^{-1}|-ish form) and gradient
    over (rho2, lengthscales); D and v are held fixed."""
    K, dKs = gram_with_grads(kernel, x)
    A = K + np.diag(1.0 / d_diag)
    L, _ = chol_with_jitter(A, "kernel + inverse-precision matrix")
    Kv = K @ v
    u = cho_solve((L, True), Kv)
    z = v - u
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    val = 0.5 * (float(v @ Kv) - float(Kv @ u) - logdet)
    Ainv = cho_solve((L, True), np.eye(len(v)))
    grad = np.array(
        [0.5 * (float(z @ dK @ z) - float(np.sum(Ainv * dK))) for dK in dKs]
    )
    return val, grad


def lower_bound(kernel: Matern52, x, d_diag, v) -> float:
    K = gram(kernel, x)
    A = K + np.diag(1.0 / d_diag)
    L, _ = chol_with_jitter(A, "kernel + inverse-precision matrix")
    Kv = K @ v
    u = cho_solve((L, True), Kv)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return 0.5 * (float(v @ Kv) - float(Kv @ u) - logdet)


def _kernel_bounds(data: Dataset) -> np.ndarray:
    span = data.domain[:, 1] - data.domain[:, 0]
    yvar = max(float(np.var(data.y)), 1e-8)
    return np.vstack(
        [
            [1e-3 * yvar, 1e3 * yvar],
            np.column_stack([1e-2 * span, 10.0 * span]),
        ]
    )


def m_step(
    data: Dataset,
    state: VbState,
    kernel: Matern52,
    n_starts: int = 5,
    rng: np.random.Generator = None,
    bounds: np.ndarray = None,
) -> Matern52:
    """Maximize the lower bound over kernel hyperparameters; the incumbent
    kernel is always among the starts, so the bound never degrades."""
    from .tuning import multistart_ml

    rng = np.random.default_rng(rng)
    if bounds is None:
        bounds = _kernel_bounds(data)

    def loglik(vec):
        return lower_bound_and_grad(
            Matern52.from_vector(vec), data.x, state.d_diag, state.v
        )

    result = multistart_ml(
        loglik,
        bounds,
        rng,
        n_start=max(0, int(n_starts)),
        extra_starts=[kernel.hyper_vector()],
    )
    return Matern52.from_vector(result.best_point)


@dataclass(frozen=True)
class VbModel:
    x: np.ndarray
    tau: float
    kernel: Matern52
    state: VbState
    chol_a: np.ndarray
    elbo_trace: tuple


def _init_state(data: Dataset, tau: float) -> VbState:
    n = data.n
    q0 = empirical_quantile(data.y, tau)
    risk0 = max(float(np.mean(pinball_loss(tau, data.y - q0))), 1e-12)
    return VbState(
        mu=np.full(n, q0),
        sigma_mat=np.zeros((n, n)),
        e_inv_w=np.ones(n),
        a=2.0,
        b=2.0 * risk0,
    )


def vb_fit(
    data: Dataset,
    tau: float,
    n_it: int = 50,
    n_starts: int = None,
    m_step_starts: int = 5,
    rng: np.random.Generator = None,
    fixed_kernel: Matern52 = None,
) -> VbModel:
    """Alternate E and M steps ``n_it`` times from each EM start (different
    initial kernels on a space-filling grid, the first being the default
    lengthscale = range/4, variance = var(y)); the best final lower bound
    wins.  The kernel search in later M-steps warm-starts from the
    incumbent with a single fresh start.  With ``fixed_kernel`` the M-step
    is skipped entirely and a single E-only run is performed."""
    tau = check_tau(tau)
    if data.n < 2:
        raise ValueError("need at least 2 observations")
    rng = np.random.default_rng(rng)
    bounds = _kernel_bounds(data)
    if n_starts is None:
        n_starts = 20 * (data.d + 1)

    if fixed_kernel is not None:
        kernels0 = [fixed_kernel]
    else:
        default_kernel = Matern52(
            max(float(np.var(data.y)), 1e-8),
            0.25 * (data.domain[:, 1] - data.domain[:, 0]),
        )
        kernels0 = [default_kernel]
        if n_starts > 1:
            from .designs import maximin_lhs

            log_b = np.log(bounds)
            lhs = maximin_lhs(
                max(n_starts - 1, 2), bounds.shape[0], log_b, rng, n_restarts=3, n_swaps=200
            ).points[: n_starts - 1]
            kernels0 += [Matern52.from_vector(np.exp(p)) for p in lhs]

    best = None
    for kernel in kernels0:
        state = _init_state(data, tau)
        trace = []
        for t in range(n_it):
            state = e_step(state, data, tau, kernel)
            if fixed_kernel is None:
                kernel = m_step(
                    data,
                    state,
                    kernel,
                    n_starts=(m_step_starts if t == 0 else 1),
                    rng=rng,
                    bounds=bounds,
                )
            trace.append(lower_bound(kernel, data.x, state.d_diag, state.v))
        # refresh the Gaussian at the final kernel so mu = K z holds exactly
        K, L, z, mu, V = _posterior_solves(kernel, data.x, state.d_diag, state.v)
        Sigma = K - V.T @ V
        state = VbState(
            mu,
            0.5 * (Sigma + Sigma.T),
            state.e_inv_w,
            state.a,
            state.b,
            d_diag=state.d_diag,
            v=state.v,
            z=z,
        )
        model = VbModel(data.x, tau, kernel, state, L, tuple(trace))
        if best is None or model.elbo_trace[-1] > best.elbo_trace[-1]:
            best = model
    return best


def vb_predict(model: VbModel, points) -> GpPosterior:
    """Gaussian predictive: mean K* K^{-1} mu (= K* z), variance
    k** - K* (K + D^{-1})^{-1} K*'."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    Ks = cross(model.kernel, pts, model.x)
    mean = Ks @ model.state.z
    w = solve_triangular(model.chol_a, Ks.T, lower=True)
    var = model.kernel.rho2 - (w * w).sum(axis=0)
    return GpPosterior(mean, np.maximum(var, 0.0))
