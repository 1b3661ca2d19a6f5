import numpy as np
import pytest

from qsb.core import empirical_quantile
from qsb.data import Dataset
from qsb.knn import knn_fit, knn_predict, knn_predict_batch, neighbor_values


def _dataset(x, y, lo=-10, hi=10):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 1 and x.shape[1] > 1:
        x = x.T
    return Dataset(x, y, [(lo, hi)] * x.shape[1], require_distinct=False)


def _brute_quantile(x, y, k, x_star, tau):
    # independent route: python sort on (distance, index) pairs
    pairs = sorted(
        (float(np.sum((xi - x_star) ** 2)), i) for i, xi in enumerate(x)
    )
    vals = sorted(y[i] for _, i in pairs[:k])
    kth = int(np.ceil(len(vals) * tau - 1e-9))
    return vals[max(kth, 1) - 1]


class TestFit:
    def test_k_bounds(self, rng):
        ds = _dataset(np.arange(10.0), rng.normal(size=10))
        knn_fit(ds, 0.5, 10)
        with pytest.raises(ValueError):
            knn_fit(ds, 0.5, 11)
        with pytest.raises(ValueError):
            knn_fit(ds, 0.5, 0)

    def test_k1_returns_own_response(self, rng):
        ds = _dataset(np.arange(10.0), rng.normal(size=10))
        m = knn_fit(ds, 0.7, 1)
        for i in range(10):
            assert knn_predict(m, ds.x[i]) == ds.y[i]


class TestPredict:
    def test_k_equals_n_is_unconditional(self, rng):
        y = rng.normal(size=25)
        ds = _dataset(np.arange(25.0), y)
        m = knn_fit(ds, 0.9, 25)
        want = empirical_quantile(y, 0.9)
        for xq in (-3.0, 0.0, 11.2, 99.0):
            assert knn_predict(m, [xq]) == want

    def test_worked_example(self):
        # neighbors of 0.1 among {0,1,2} are {0,1}; ceil(2*0.9)=2nd smallest
        ds = _dataset([0.0, 1.0, 2.0], [10.0, 20.0, 30.0])
        m = knn_fit(ds, 0.9, 2)
        assert knn_predict(m, [0.1]) == 20.0

    def test_distance_tie_prefers_low_index(self):
        ds = _dataset([-1.0, 1.0, 5.0], [100.0, 200.0, 300.0])
        m = knn_fit(ds, 0.5, 1)
        # x*=0 is equidistant from -1 and 1; index 0 wins
        assert knn_predict(m, [0.0]) == 100.0

    def test_matches_exhaustive_scan(self, rng):
        for _ in range(100):
            n = int(rng.integers(5, 201))
            d = int(rng.integers(1, 6))
            x = rng.uniform(-5, 5, (n, d))
            y = rng.normal(size=n)
            tau = float(rng.uniform(0.05, 0.95))
            k = int(rng.integers(1, n + 1))
            ds = Dataset(x, y, [(-5, 5)] * d, require_distinct=False)
            m = knn_fit(ds, tau, k)
            xq = rng.uniform(-5, 5, d)
            assert knn_predict(m, xq) == _brute_quantile(x, y, k, xq, tau)


class TestProperties:
    def test_monotone_in_tau(self, rng):
        x = rng.uniform(-2, 2, (60, 2))
        y = rng.normal(size=60)
        ds = Dataset(x, y, [(-2, 2)] * 2)
        taus = np.arange(0.05, 0.96, 0.05)
        for _ in range(10):
            xq = rng.uniform(-2, 2, 2)
            k = int(rng.integers(1, 61))
            preds = [
                knn_predict(knn_fit(ds, t, k), xq) for t in taus
            ]
            assert np.all(np.diff(preds) >= 0)

    def test_invariant_under_row_permutation(self, rng):
        x = rng.uniform(-1, 1, (40, 3))
        y = rng.normal(size=40)
        perm = rng.permutation(40)
        a = knn_fit(Dataset(x, y, [(-1, 1)] * 3), 0.3, 7)
        b = knn_fit(Dataset(x[perm], y[perm], [(-1, 1)] * 3), 0.3, 7)
        for _ in range(10):
            xq = rng.uniform(-1, 1, 3)
            assert knn_predict(a, xq) == knn_predict(b, xq)

    def test_piecewise_constant(self, rng):
        # two queries with the same neighbor set give the same prediction
        x = np.array([[0.0], [1.0], [10.0]])
        ds = Dataset(x, np.array([1.0, 2.0, 9.0]), [(-20, 20)])
        m = knn_fit(ds, 0.5, 2)
        assert knn_predict(m, [0.4]) == knn_predict(m, [0.6])

    def test_batch_matches_scalar(self, rng):
        x = rng.uniform(-1, 1, (30, 2))
        ds = Dataset(x, rng.normal(size=30), [(-1, 1)] * 2)
        m = knn_fit(ds, 0.4, 5)
        qs = rng.uniform(-1, 1, (8, 2))
        np.testing.assert_array_equal(
            knn_predict_batch(m, qs), [knn_predict(m, q) for q in qs]
        )

    def test_neighbor_values_length(self, rng):
        x = rng.uniform(-1, 1, (30, 2))
        ds = Dataset(x, rng.normal(size=30), [(-1, 1)] * 2)
        m = knn_fit(ds, 0.4, 12)
        assert neighbor_values(m, [0.0, 0.0]).shape == (12,)
