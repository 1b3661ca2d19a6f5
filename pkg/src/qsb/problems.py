"""Four analytic stochastic test problems with samplers and quantile oracles.

Each problem produces ``Y_x = mean(x) + scale(x) * noise`` for an asymmetric
noise variable (problem 3 uses ``mean(x) - scale(x) * noise**2``), so the
conditional quantile has a closed or semi-closed form:

* problems 1, 2: two-slope normal noise ``xi = c_neg*eta`` for ``eta <= 0``,
  ``c_pos*eta`` otherwise, with ``eta ~ N(0,1)``;
* problem 3: the square of a two-slope normal, entering with a minus sign;
* problem 4: log-normal(0, 1) noise on a strictly positive scale.

Notes on signal-to-noise ratios
-------------------------------
:func:`snr_estimate` computes ``Var_X(E[Y|X]) / E_X(Var[Y|X])`` with X
uniform on the domain.  Commonly quoted SNR figures for these problems
instead treat the noise term as mean-centered, i.e. take the signal to be
the variance of the deterministic mean part alone; since the noise variables
here have nonzero mean, the two conventions differ (markedly for problem 2,
whose mean part is identically zero).  Pass ``convention="mean-part"`` to
reproduce the centered figure.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .core import check_tau

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family plus its slope constants (unused for lognormal)."""

    family: str  # "two-slope-normal" | "two-slope-normal-squared" | "lognormal"
    c_neg: float = 1.0
    c_pos: float = 1.0

    def __post_init__(self):
        if self.family not in (
            "two-slope-normal",
            "two-slope-normal-squared",
            "lognormal",
        ):
            raise ValueError(f"unknown noise family {self.family!r}")
        if not (self.c_neg > 0 and self.c_pos > 0):
            raise ValueError("slope constants must be positive")

    def draw(self, size, rng: np.random.Generator) -> np.ndarray:
        eta = rng.standard_normal(size)
        if self.family == "lognormal":
            return np.exp(eta)
        xi = np.where(eta <= 0, self.c_neg * eta, self.c_pos * eta)
        if self.family == "two-slope-normal-squared":
            return xi * xi
        return xi

    def quantile(self, tau: float) -> float:
        """Exact tau-quantile of the noise variable."""
        tau = check_tau(tau)
        if self.family == "lognormal":
            return float(np.exp(ndtri(tau)))
        if self.family == "two-slope-normal":
            z = ndtri(tau)
            return float((self.c_neg if tau <= 0.5 else self.c_pos) * z)
        return _two_slope_squared_quantile(tau, self.c_neg, self.c_pos)

    def mean_var(self) -> tuple:
        """(mean, variance) of the noise variable."""
        cn, cp = self.c_neg, self.c_pos
        if self.family == "lognormal":
            return math.exp(0.5), (math.e - 1.0) * math.e
        m1 = (cp - cn) / _SQRT_2PI
        m2 = (cn**2 + cp**2) / 2.0
        if self.family == "two-slope-normal":
            return m1, m2 - m1**2
        m4 = 3.0 * (cn**4 + cp**4) / 2.0
        return m2, m4 - m2**2


def _two_slope_squared_cdf(t, c_neg: float, c_pos: float):
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    s = np.sqrt(t)
    return ndtr(s / c_pos) - ndtr(-s / c_neg)


def _two_slope_squared_quantile(
    p: float, c_neg: float, c_pos: float, tol: float = 1e-10
) -> float:
    """Invert F(t) = Phi(sqrt(t)/c_pos) - Phi(-sqrt(t)/c_neg) by bisection."""
    if p <= 0.0:
        return 0.0
    hi = 1.0
    for _ in range(200):
        if _two_slope_squared_cdf(hi, c_neg, c_pos) >= p:
            break
        hi *= 4.0
    else:
        raise RuntimeError(f"no upper bracket found for p={p}, hi={hi}")
    lo = 0.0
    for _ in range(200):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if _two_slope_squared_cdf(mid, c_neg, c_pos) >= p:
            hi = mid
        else:
            lo = mid
    raise RuntimeError(
        f"quantile inversion did not converge: bracket [{lo}, {hi}] for p={p}"
    )


@dataclass(frozen=True)
class TestProblem:
    """Analytic stochastic test problem with a true-quantile oracle."""

    id: int
    dim: int
    domain: np.ndarray
    mean_part: Callable
    scale_part: Callable
    noise: NoiseSpec
    noise_sign: float = 1.0  # -1 when the noise term enters subtracted

    def check_inside(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"points must be {self.dim}-dimensional")
        dom = self.domain
        eps = 1e-12 * np.maximum(1.0, np.abs(dom).max(axis=1))
        if np.any(x < dom[:, 0] - eps) or np.any(x > dom[:, 1] + eps):
            raise ValueError("point outside the problem domain")
        return x


def _griewank_2d(x: np.ndarray) -> np.ndarray:
    return (
        (x[:, 0] ** 2 + x[:, 1] ** 2) / 4000.0
        - np.cos(x[:, 0]) * np.cos(x[:, 1] / math.sqrt(2.0))
        + 1.0
    )


def _michalewicz_1d(x: np.ndarray) -> np.ndarray:
    t = x[:, 0]
    return -2.0 * np.sin(t) * np.sin(t**2 / math.pi) ** 30


_ACKLEY_A = 10.0
_ACKLEY_B = 2e-4
_ACKLEY_C = 0.9 * math.pi


def _ackley_9d(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x**2, axis=1))
    mc = np.mean(np.cos(_ACKLEY_C * x), axis=1)
    return _ACKLEY_A * np.exp(-_ACKLEY_B * rms) - np.exp(mc) + _ACKLEY_A + math.e


_DOMAINS = {
    1: [(-1.0, 1.0)],
    2: [(-5.0, 5.0), (-3.0, 3.0)],
    3: [(0.0, 4.0)],
    4: [
        (-1.0, -0.7),
        (0.0, 1.0),
        (-0.7, -0.3),
        (0.5, 1.0),
        (-1.0, -0.5),
        (-3.0, -2.6),
        (-0.1, 0.0),
        (0.0, 0.1),
        (0.0, 0.8),
    ],
}


def make_test_case(problem_id: int) -> TestProblem:
    """Build one of the four analytic test problems."""
    if problem_id == 1:
        return TestProblem(
            id=1,
            dim=1,
            domain=np.asarray(_DOMAINS[1]),
            mean_part=lambda x: 5.0 * np.sin(8.0 * x[:, 0]),
            scale_part=lambda x: 0.2 + 3.0 * x[:, 0] ** 3,
            noise=NoiseSpec("two-slope-normal", 1.0, 7.0),
        )
    if problem_id == 2:
        return TestProblem(
            id=2,
            dim=2,
            domain=np.asarray(_DOMAINS[2]),
            mean_part=lambda x: np.zeros(x.shape[0]),
            scale_part=_griewank_2d,
            noise=NoiseSpec("two-slope-normal", 1.0, 5.0),
        )
    if problem_id == 3:
        return TestProblem(
            id=3,
            dim=1,
            domain=np.asarray(_DOMAINS[3]),
            mean_part=_michalewicz_1d,
            scale_part=lambda x: 0.1
            * np.cos(math.pi * x[:, 0] / 10.0) ** 3
            / np.abs(-np.sin(x[:, 0]) * np.sin(x[:, 0] ** 2 / math.pi) ** 30 + 2.0),
            noise=NoiseSpec("two-slope-normal-squared", 3.0, 6.0),
            noise_sign=-1.0,
        )
    if problem_id == 4:
        return TestProblem(
            id=4,
            dim=9,
            domain=np.asarray(_DOMAINS[4]),
            mean_part=lambda x: 30.0 * _ackley_9d(x),
            scale_part=lambda x: 3.0 * _ackley_9d(np.roll(x, -1, axis=1)),
            noise=NoiseSpec("lognormal"),
        )
    if problem_id == 5:
        raise ValueError(
            "test case 5 (external crop simulator) is not supported here"
        )
    raise ValueError(f"unknown test case id {problem_id}")


def sample_responses(
    problem: TestProblem, x: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One response draw per row of x."""
    x = problem.check_inside(x)
    draws = problem.noise.draw(x.shape[0], rng)
    return problem.mean_part(x) + problem.noise_sign * problem.scale_part(x) * draws


def sample_response(problem: TestProblem, x, rng: np.random.Generator) -> float:
    return float(sample_responses(problem, np.atleast_2d(x), rng)[0])


def true_quantile(problem: TestProblem, x, tau: float) -> np.ndarray:
    """Conditional tau-quantile at each row of x.

    For a monotone noise term ``m + s*xi`` the quantile is
    ``m + s*q_xi(tau)`` when ``s >= 0`` and ``m + s*q_xi(1-tau)`` when
    ``s < 0`` (the sign flips the level).  The subtracted squared noise of
    problem 3 is decreasing in ``xi**2``, hence uses level ``1-tau``.
    """
    tau = check_tau(tau)
    x = problem.check_inside(x)
    m = problem.mean_part(x)
    s = problem.noise_sign * problem.scale_part(x)
    q_pos = problem.noise.quantile(tau)
    q_neg = problem.noise.quantile(1.0 - tau)
    return m + np.where(s >= 0, s * q_pos, s * q_neg)


@dataclass(frozen=True)
class SnrEstimate:
    value: float
    standard_error: float
    convention: str


def snr_estimate(
    problem: TestProblem,
    mc_budget: int = 100_000,
    rng: np.random.Generator = None,
    convention: str = "mean-response",
) -> SnrEstimate:
    """Monte-Carlo Var_X(E[Y|X]) / E_X(Var[Y|X]) with X uniform on the domain.

    ``convention="mean-response"`` uses the exact conditional mean E[Y|X];
    ``"mean-part"`` replaces it by the deterministic mean part (the
    centered-noise convention, see the module notes).  The standard error
    comes from 20 batch means.
    """
    if mc_budget < 10_000:
        raise ValueError("mc_budget must be at least 10^4")
    if convention not in ("mean-response", "mean-part"):
        raise ValueError(f"unknown convention {convention!r}")
    rng = np.random.default_rng(rng)
    dom = problem.domain
    x = rng.uniform(dom[:, 0], dom[:, 1], size=(mc_budget, problem.dim))
    m = problem.mean_part(x)
    s = problem.scale_part(x)
    nm, nv = problem.noise.mean_var()
    cond_mean = m + problem.noise_sign * s * nm if convention == "mean-response" else m
    cond_var = s * s * nv

    n_batch = 20
    per = mc_budget // n_batch
    vals = np.empty(n_batch)
    for b in range(n_batch):
        sl = slice(b * per, (b + 1) * per)
        vals[b] = np.var(cond_mean[sl]) / np.mean(cond_var[sl])
    return SnrEstimate(
        value=float(np.var(cond_mean) / np.mean(cond_var)),
        standard_error=float(np.std(vals, ddof=1) / math.sqrt(n_batch)),
        convention=convention,
    )


# Qualitative problem characteristics used by the report groupings: SNR
# regime, heteroscedasticity, distribution-shape variation, and the density
# level near each target quantile ("pdf class").
SNR_CLASS = {1: "small", 2: "small", 3: "small", 4: "large"}
HETEROSCEDASTICITY = {1: "very strong", 2: "very strong", 3: "very strong", 4: "strong"}
SHAPE_VARIATION = {1: "very strong", 2: "weak", 3: "weak", 4: "weak"}
PDF_CLASS = {
    1: {0.1: "variable", 0.5: "variable", 0.9: "variable"},
    2: {0.1: "small", 0.5: "large", 0.9: "very small"},
    3: {0.1: "globally very small", 0.5: "small", 0.9: "very large"},
    4: {0.1: "large", 0.5: "small", 0.9: "very small"},
}


def pdf_class(problem_id: int, tau: float) -> str:
    classes = PDF_CLASS[problem_id]
    key = min(classes, key=lambda t: abs(t - tau))
    if abs(key - tau) > 1e-9:
        raise ValueError(f"no pdf class recorded for tau={tau}")
    return classes[key]


def problem_summary() -> list:
    """One row per problem for the ``problems list`` CLI subcommand."""
    rows = []
    for pid in (1, 2, 3, 4):
        p = make_test_case(pid)
        rows.append(
            {
                "id": pid,
                "dim": p.dim,
                "domain": [tuple(b) for b in p.domain.tolist()],
                "snr_class": SNR_CLASS[pid],
                "heteroscedasticity": HETEROSCEDASTICITY[pid],
                "shape_variation": SHAPE_VARIATION[pid],
                "pdf_class": {str(t): PDF_CLASS[pid][t] for t in (0.1, 0.5, 0.9)},
            }
        )
    return rows
