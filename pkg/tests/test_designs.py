import numpy as np
import pytest

from qsb.data import ReplicatedDataset
from qsb.designs import (
    _lhs_unit,
    maximin_lhs,
    replicated_design,
    sample_dataset,
    standard_sizes,
    uniform_grid,
)
from qsb.problems import make_test_case


def _min_dist(pts):
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    return np.sqrt(d2.min())


class TestGrid:
    def test_two_points_are_endpoints(self):
        np.testing.assert_array_equal(
            uniform_grid(2, [(-1, 1)]).points.ravel(), [-1, 1]
        )

    def test_equal_spacing(self):
        np.testing.assert_allclose(
            uniform_grid(3, [(0, 4)]).points.ravel(), [0, 2, 4]
        )
        pts = uniform_grid(5, [(0, 1)]).points.ravel()
        np.testing.assert_allclose(np.diff(pts), 0.25)

    def test_rejects_multidim(self):
        with pytest.raises(ValueError):
            uniform_grid(4, [(0, 1), (0, 1)])

    def test_rejects_tiny_n(self):
        with pytest.raises(ValueError):
            uniform_grid(1, [(0, 1)])


class TestLhs:
    def test_stratification_marginals(self, rng):
        for n, d in [(2, 1), (7, 3), (20, 2)]:
            des = maximin_lhs(n, d, [(0, 1)] * d, rng, n_restarts=3, n_swaps=50)
            strata = np.floor(des.points * n).astype(int)
            strata = np.clip(strata, 0, n - 1)
            for j in range(d):
                assert sorted(strata[:, j]) == list(range(n))

    def test_marginals_survive_optimization(self, rng):
        des = maximin_lhs(15, 2, [(-2, 2), (0, 10)], rng, n_restarts=5, n_swaps=500)
        for j, (lo, hi) in enumerate([(-2, 2), (0, 10)]):
            u = (des.points[:, j] - lo) / (hi - lo)
            strata = np.clip(np.floor(u * 15).astype(int), 0, 14)
            assert sorted(strata) == list(range(15))

    def test_optimized_at_least_as_spread_as_raw(self):
        n, d = 12, 2
        seed = 99
        raw = _lhs_unit(n, d, np.random.default_rng(seed))
        des = maximin_lhs(
            n, d, [(0, 1)] * d, np.random.default_rng(seed), n_restarts=4, n_swaps=300
        )
        assert _min_dist(des.points) >= _min_dist(raw) - 1e-12


class TestStandardSizes:
    def test_1d_table(self):
        specs = standard_sizes(1)
        assert [s.n for s in specs] == [40, 80, 160, 320]
        assert (specs[3].qk_bases, specs[3].qk_reps) == (16, 20)

    def test_2d_table(self):
        specs = standard_sizes(2)
        assert [s.n for s in specs] == [100, 200, 400, 800]
        assert (specs[2].qk_bases, specs[2].qk_reps) == (25, 16)

    def test_9d_table(self):
        specs = standard_sizes(9)
        assert [s.n for s in specs] == [250, 500, 1000, 2000]
        assert (specs[0].qk_bases, specs[0].qk_reps) == (25, 10)

    def test_other_dims_rejected(self):
        with pytest.raises(ValueError):
            standard_sizes(3)


class TestSampling:
    def test_grid_dataset_size(self, rng):
        p = make_test_case(1)
        ds = sample_dataset(p, uniform_grid(40, p.domain), rng)
        assert ds.n == 40

    def test_replicated_grouping(self, rng):
        p = make_test_case(1)
        des = replicated_design(5, 8, p.domain, rng)
        assert des.points.shape == (40, 1)
        ds = sample_dataset(p, des, rng)
        assert isinstance(ds, ReplicatedDataset)
        assert ds.replicates.shape == (5, 8)
        assert len(np.unique(ds.bases, axis=0)) == 5

    def test_replicated_multiplicity(self, rng):
        p = make_test_case(2)
        des = replicated_design(6, 4, p.domain, rng, n_restarts=2, n_swaps=50)
        vals, counts = np.unique(des.points, axis=0, return_counts=True)
        assert len(vals) == 6
        assert np.all(counts == 4)

    def test_seeded_determinism(self):
        p = make_test_case(2)
        out = []
        for _ in range(2):
            rng = np.random.default_rng(123)
            des = maximin_lhs(20, 2, p.domain, rng, n_restarts=2, n_swaps=50)
            ds = sample_dataset(p, des, rng)
            out.append((des.points.copy(), ds.y.copy()))
        np.testing.assert_array_equal(out[0][0], out[1][0])
        np.testing.assert_array_equal(out[0][1], out[1][1])
