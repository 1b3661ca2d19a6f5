"""Experimental designs: 1d grids, maximin Latin hypercubes, replicated designs.

Maximin optimization follows a best-of-restarts scheme: each restart draws a
fresh Latin hypercube (one point per stratum, uniform within the stratum) and
improves it by random coordinate swaps between two rows, which preserve the
Latin marginal property; a swap is kept when it increases the minimal pairwise
Euclidean distance (measured in unit-cube coordinates so dimensions weigh
equally).
"""

from dataclasses import dataclass

import numpy as np

from .data import Dataset, ReplicatedDataset, _check_domain
from .problems import TestProblem, sample_responses


@dataclass(frozen=True)
class Design:
    points: np.ndarray  # n x d, inside the domain
    domain: np.ndarray
    kind: str  # "grid" | "lhs-maximin" | "replicated"
    n_bases: int = 0  # replicated kind only
    n_reps: int = 0

    @property
    def bases(self) -> np.ndarray:
        if self.kind != "replicated":
            raise ValueError("only replicated designs have base points")
        return self.points[:: self.n_reps]


def uniform_grid(n: int, domain_1d) -> Design:
    """n equally spaced points including both endpoints (1d only)."""
    dom = _check_domain(np.atleast_2d(domain_1d))
    if dom.shape[0] != 1:
        raise ValueError("uniform_grid is defined for 1d domains only")
    if n < 2:
        raise ValueError("grid needs at least 2 points")
    pts = np.linspace(dom[0, 0], dom[0, 1], n).reshape(-1, 1)
    return Design(pts, dom, "grid")


def _lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Raw Latin hypercube in [0,1]^d: one point per stratum per coordinate."""
    u = rng.uniform(size=(n, d))
    strata = np.empty((n, d), dtype=float)
    for j in range(d):
        strata[:, j] = rng.permutation(n)
    return (strata + u) / n


def _sq_dist_matrix(pts: np.ndarray) -> np.ndarray:
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    return d2


def _swap_optimize(pts: np.ndarray, rng: np.random.Generator, n_swaps: int) -> float:
    """In-place maximin improvement by random coordinate swaps.

    Tracks the global minimal pairwise distance and its attaining pair;
    a swap not touching that pair cannot improve the criterion, so the
    O(n^2) rescan only runs when the pair is touched.
    """
    n, d = pts.shape
    d2 = _sq_dist_matrix(pts)
    gi, gj = np.unravel_index(int(d2.argmin()), d2.shape)
    gm = d2[gi, gj]
    for _ in range(n_swaps):
        i, j = rng.integers(0, n, 2)
        if i == j:
            continue
        dim = int(rng.integers(0, d))
        pts[i, dim], pts[j, dim] = pts[j, dim], pts[i, dim]
        di = ((pts - pts[i]) ** 2).sum(1)
        dj = ((pts - pts[j]) ** 2).sum(1)
        di[i] = dj[j] = np.inf
        old_di, old_dj = d2[i].copy(), d2[j].copy()
        d2[i], d2[:, i] = di, di
        d2[j], d2[:, j] = dj, dj
        if i in (gi, gj) or j in (gi, gj):
            k = int(d2.argmin())
            ni, nj = np.unravel_index(k, d2.shape)
            new_min = d2[ni, nj]
        else:
            ni, nj = gi, gj
            new_min = gm
            if di.min() < new_min:
                ni, nj, new_min = i, int(di.argmin()), di.min()
            if dj.min() < new_min:
                ni, nj, new_min = j, int(dj.argmin()), dj.min()
        if new_min > gm:
            gm, gi, gj = new_min, ni, nj
        else:
            pts[i, dim], pts[j, dim] = pts[j, dim], pts[i, dim]
            d2[i], d2[:, i] = old_di, old_di
            d2[j], d2[:, j] = old_dj, old_dj
    return gm


def maximin_lhs(
    n: int,
    d: int,
    domain,
    rng: np.random.Generator,
    n_restarts: int = 50,
    n_swaps: int = 1000,
) -> Design:
    """Latin hypercube optimized for the maximin distance criterion."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 points and d >= 1 dimensions")
    dom = _check_domain(domain)
    if dom.shape[0] != d:
        raise ValueError("domain does not match dimension d")
    rng = np.random.default_rng(rng)
    best_pts, best_score = None, -np.inf
    for _ in range(max(1, n_restarts)):
        pts = _lhs_unit(n, d, rng)
        score = _swap_optimize(pts, rng, n_swaps)
        if score > best_score:
            best_pts, best_score = pts, score
    scaled = dom[:, 0] + best_pts * (dom[:, 1] - dom[:, 0])
    return Design(scaled, dom, "lhs-maximin")


def replicated_design(
    n_bases: int,
    n_reps: int,
    domain,
    rng: np.random.Generator,
    n_restarts: int = 50,
    n_swaps: int = 1000,
) -> Design:
    """n' base points (grid in 1d, maximin LHS otherwise), each listed r times."""
    dom = _check_domain(domain)
    if n_reps < 2:
        raise ValueError("replicated designs need at least 2 replicates")
    if dom.shape[0] == 1:
        base = uniform_grid(n_bases, dom)
    else:
        base = maximin_lhs(n_bases, dom.shape[0], dom, rng, n_restarts, n_swaps)
    pts = np.repeat(base.points, n_reps, axis=0)
    return Design(pts, dom, "replicated", n_bases=n_bases, n_reps=n_reps)


@dataclass(frozen=True)
class SizeSpec:
    n: int
    qk_bases: int
    qk_reps: int


_STANDARD_SIZES = {
    1: [(40, 5, 8), (80, 10, 8), (160, 10, 16), (320, 16, 20)],
    2: [(100, 10, 10), (200, 20, 10), (400, 25, 16), (800, 40, 20)],
    9: [(250, 25, 10), (500, 50, 10), (1000, 100, 10), (2000, 100, 20)],
}


def standard_sizes(d: int) -> list:
    """The four benchmark sample sizes for dimension d, with the matched
    (bases, replicates) splits used by quantile kriging."""
    if d not in _STANDARD_SIZES:
        raise ValueError(f"no standard sizes for dimension {d} (use 1, 2 or 9)")
    return [SizeSpec(*row) for row in _STANDARD_SIZES[d]]


def sample_dataset(problem: TestProblem, design: Design, rng: np.random.Generator):
    """Draw one response per design row (grouped per base for replicated kind)."""
    if design.kind == "replicated":
        y = sample_responses(problem, design.points, rng)
        reps = y.reshape(design.n_bases, design.n_reps)
        return ReplicatedDataset(design.bases, reps, problem.domain)
    y = sample_responses(problem, design.points, rng)
    return Dataset(design.points, y, problem.domain)
