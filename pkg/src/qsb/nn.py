"""One-hidden-layer quantile network trained on an annealed smoothed pinball.

The network is ``b2 + w2 . sigmoid(W1 z + b1)`` on standardized inputs
``z = (x - mean) / scale``.  Training minimizes

    mean_i l_tau^eta(y_i - f(x_i)) + lambda * (||W1||^2 + ||w2||^2)

sequentially over a strictly decreasing smoothing schedule, warm-starting
each stage from the previous optimum (L-BFGS-B per stage).  Biases are not
penalized; leaving the output bias free preserves the quantile property of
the pinball minimizer.  Several random restarts are run and the winner is
the one with the lowest final *unsmoothed* regularized risk.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .core import check_tau, empirical_quantile, pinball_loss, smoothed_pinball, smoothed_pinball_grad
from .data import Dataset

DEFAULT_SCHEDULE = tuple(0.5**k for k in (1, 2, 5, 10, 15, 20, 25, 30, 35))


def check_schedule(schedule) -> tuple:
    sched = tuple(float(e) for e in schedule)
    if not sched or any(e <= 0 for e in sched):
        raise ValueError("schedule must contain positive smoothing widths")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly decreasing")
    return sched


@dataclass(frozen=True)
class MlpQuantileNet:
    w1: np.ndarray  # (j1, d) input weights
    b1: np.ndarray  # (j1,) hidden biases
    w2: np.ndarray  # (j1,) output weights
    b2: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    tau: float
    risk_trace: tuple = field(default=())  # unsmoothed risk after each stage


def _standardize(net: MlpQuantileNet, x: np.ndarray) -> np.ndarray:
    return (x - net.x_mean) / net.x_scale


def nn_forward(net: MlpQuantileNet, points) -> np.ndarray:
    """Network output at each row of points (raw, unstandardized inputs)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    z = _standardize(net, x)
    return net.b2 + expit(z @ net.w1.T + net.b1) @ net.w2


def _pack(w1, b1, w2, b2):
    return np.concatenate([w1.ravel(), b1, w2, [b2]])


def _unpack(params, j1, d):
    w1 = params[: j1 * d].reshape(j1, d)
    b1 = params[j1 * d : j1 * d + j1]
    w2 = params[j1 * d + j1 : j1 * d + 2 * j1]
    b2 = params[-1]
    return w1, b1, w2, b2


def _objective(params, z, y, tau, eta, lam, j1, d):
    """Smoothed regularized risk and its gradient (backprop)."""
    w1, b1, w2, b2 = _unpack(params, j1, d)
    n = y.size
    act = expit(z @ w1.T + b1)
    f = act @ w2 + b2
    resid = y - f
    value = float(
        np.mean(smoothed_pinball(tau, eta, resid))
        + lam * ((w1 * w1).sum() + (w2 * w2).sum())
    )
    g_f = -smoothed_pinball_grad(tau, eta, resid) / n
    g_b2 = g_f.sum()
    g_w2 = act.T @ g_f + 2.0 * lam * w2
    g_act = np.outer(g_f, w2)
    g_z = g_act * act * (1.0 - act)
    g_w1 = g_z.T @ z + 2.0 * lam * w1
    g_b1 = g_z.sum(axis=0)
    return value, _pack(g_w1, g_b1, g_w2, g_b2)


def _exact_risk(params, z, y, tau, lam, j1, d):
    w1, b1, w2, b2 = _unpack(params, j1, d)
    f = expit(z @ w1.T + b1) @ w2 + b2
    return float(
        np.mean(pinball_loss(tau, y - f)) + lam * ((w1 * w1).sum() + (w2 * w2).sum())
    )


def _init_params(j1, d, y, tau, rng):
    w1 = rng.uniform(-0.5, 0.5, (j1, d)) / np.sqrt(d)
    b1 = np.zeros(j1)
    w2 = rng.uniform(-0.5, 0.5, j1) / np.sqrt(j1)
    b2 = empirical_quantile(y, tau)
    return _pack(w1, b1, w2, b2)


def nn_train(
    data: Dataset,
    tau: float,
    lam: float,
    j1: int,
    schedule=DEFAULT_SCHEDULE,
    n_multistart: int = 5,
    rng: np.random.Generator = None,
    max_iter: int = 500,
    gtol: float = 1e-6,
) -> MlpQuantileNet:
    tau = check_tau(tau)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    j1 = int(j1)
    if j1 < 1:
        raise ValueError("need at least one hidden unit")
    schedule = check_schedule(schedule)
    rng = np.random.default_rng(rng)

    x_mean = data.x.mean(axis=0)
    x_scale = data.x.std(axis=0)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    z = (data.x - x_mean) / x_scale
    y = data.y
    d = data.d

    best_params, best_risk, best_trace = None, np.inf, ()
    starts_left = int(n_multistart)
    while starts_left > 0:
        starts_left -= 1
        params = _init_params(j1, d, y, tau, rng)
        trace = []
        diverged = False
        for eta in schedule:
            res = minimize(
                _objective,
                params,
                args=(z, y, tau, eta, lam, j1, d),
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": max_iter, "gtol": gtol},
            )
            if not np.all(np.isfinite(res.x)):
                diverged = True
                break
            params = res.x
            trace.append(_exact_risk(params, z, y, tau, lam, j1, d))
        if diverged:
            continue  # fresh initialization next loop, budget already spent
        risk = trace[-1]
        if risk < best_risk:
            best_params, best_risk, best_trace = params, risk, tuple(trace)
    if best_params is None:
        raise RuntimeError("all restarts diverged to non-finite parameters")
    w1, b1, w2, b2 = _unpack(best_params, j1, d)
    return MlpQuantileNet(w1, b1, w2, float(b2), x_mean, x_scale, tau, best_trace)
