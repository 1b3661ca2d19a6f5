"""Kernel quantile regression: box+equality-constrained QP in the dual
coefficients plus a residual-quantile intercept.

The dual problem

    min_a  0.5 * a' K a - a' y
    s.t.   (tau-1)/(lambda*n) <= a_i <= tau/(lambda*n),  sum(a) = 0

is handed to cvxopt's interior-point QP solver.  Because the equality
constraint kills any constant shift of y on the feasible set, y is centered
before the solve: the optimal coefficients are then exactly invariant to
adding a constant to all responses, and only the intercept shifts.  The
intercept is the tau order statistic of the residuals y_i - (K a)_i.
"""

from dataclasses import dataclass

import numpy as np

from .core import check_tau, empirical_quantile
from .data import Dataset
from .gp import Matern52, cross, gram

_FEAS_TOL = 1e-8


class QpSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class RkhsModel:
    x: np.ndarray
    alpha: np.ndarray
    b: float
    kernel: Matern52
    lam: float
    tau: float


def _solve_box_qp(K: np.ndarray, y: np.ndarray, lo: float, hi: float) -> np.ndarray:
    import cvxopt

    n = y.size
    cvxopt.solvers.options["show_progress"] = False
    P = cvxopt.matrix(K)
    q = cvxopt.matrix(-y)
    G = cvxopt.matrix(np.vstack([np.eye(n), -np.eye(n)]))
    h = cvxopt.matrix(np.concatenate([np.full(n, hi), np.full(n, -lo)]))
    A = cvxopt.matrix(np.ones((1, n)))
    b = cvxopt.matrix(np.zeros(1))
    sol = cvxopt.solvers.qp(P, q, G, h, A, b)
    if sol["status"] != "optimal":
        raise QpSolverError(
            f"QP solver finished with status {sol['status']!r} "
            f"after {sol['iterations']} iterations"
        )
    return np.asarray(sol["x"]).ravel()


def rkhs_fit(data: Dataset, tau: float, lam: float, kernel: Matern52) -> RkhsModel:
    tau = check_tau(tau)
    if not lam > 0:
        raise ValueError("regularization lambda must be positive")
    n = data.n
    K = gram(kernel, data.x)
    K = K + (1e-10 * float(np.mean(np.diag(K)))) * np.eye(n)
    K = 0.5 * (K + K.T)
    lo = (tau - 1.0) / (lam * n)
    hi = tau / (lam * n)
    y_center = float(data.y.mean())
    alpha = _solve_box_qp(K, data.y - y_center, lo, hi)

    if abs(alpha.sum()) > _FEAS_TOL or alpha.max() > hi + _FEAS_TOL or alpha.min() < lo - _FEAS_TOL:
        raise QpSolverError(
            f"solution violates constraints beyond {_FEAS_TOL}: "
            f"sum={alpha.sum():.2e}, box=[{alpha.min():.6g}, {alpha.max():.6g}]"
        )
    b = empirical_quantile(data.y - K @ alpha, tau)
    return RkhsModel(data.x, alpha, float(b), kernel, float(lam), tau)


def rkhs_predict(model: RkhsModel, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return cross(model.kernel, points, model.x) @ model.alpha + model.b


def regularized_risk(
    x: np.ndarray, y: np.ndarray, alpha: np.ndarray, b: float,
    tau: float, lam: float, kernel: Matern52,
) -> float:
    """Primal objective: mean pinball of the residuals plus
    (lambda/2) * alpha' K alpha."""
    from .core import pinball_loss

    K = gram(kernel, x)
    resid = y - (K @ alpha + b)
    return float(np.mean(pinball_loss(tau, resid)) + 0.5 * lam * alpha @ K @ alpha)
