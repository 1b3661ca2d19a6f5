import io

import numpy as np
import pytest

from qsb.data import (
    Dataset,
    ReplicatedDataset,
    read_dataset_csv,
    read_replicated_csv,
    write_dataset_csv,
    write_replicated_csv,
)


@pytest.fixture
def small():
    x = np.array([[0.0, 0.0], [0.5, 1.0], [1.0, -1.0]])
    y = np.array([1.0, 2.0, 3.0])
    return Dataset(x, y, [(0, 1), (-1, 1)])


def test_basic_shape_accessors(small):
    assert small.n == 3
    assert small.d == 2


def test_rejects_nonfinite():
    with pytest.raises(ValueError):
        Dataset([[0.0], [np.nan]], [1.0, 2.0], [(0, 1)])
    with pytest.raises(ValueError):
        Dataset([[0.0], [0.5]], [1.0, np.inf], [(0, 1)])


def test_rejects_out_of_domain():
    with pytest.raises(ValueError):
        Dataset([[2.0]], [1.0], [(0, 1)])


def test_rejects_duplicate_rows():
    with pytest.raises(ValueError):
        Dataset([[0.5], [0.5]], [1.0, 2.0], [(0, 1)])
    # replicated-style data may opt out
    Dataset([[0.5], [0.5]], [1.0, 2.0], [(0, 1)], require_distinct=False)


def test_rejects_length_mismatch():
    with pytest.raises(ValueError):
        Dataset([[0.1], [0.2]], [1.0], [(0, 1)])


def test_csv_roundtrip(small):
    buf = io.StringIO()
    write_dataset_csv(buf, small)
    back = read_dataset_csv(io.StringIO(buf.getvalue()), domain=small.domain)
    np.testing.assert_array_equal(back.x, small.x)
    np.testing.assert_array_equal(back.y, small.y)


def test_csv_rejects_nan_entries():
    text = "x1,y\n0.5,nan\n"
    with pytest.raises(ValueError):
        read_dataset_csv(io.StringIO(text))


def test_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        read_dataset_csv(io.StringIO("a,b\n1,2\n"))


def test_replicated_invariants():
    with pytest.raises(ValueError):  # r >= 2
        ReplicatedDataset([[0.0], [1.0]], [[1.0], [2.0]])
    with pytest.raises(ValueError):  # distinct bases
        ReplicatedDataset([[0.0], [0.0]], [[1.0, 2.0], [3.0, 4.0]])


def test_replicated_flatten_and_roundtrip():
    rep = ReplicatedDataset(
        [[0.0], [1.0]], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], [(0, 1)]
    )
    flat = rep.flatten()
    assert flat.n == 6
    np.testing.assert_array_equal(flat.y, [1, 2, 3, 4, 5, 6])

    buf = io.StringIO()
    write_replicated_csv(buf, rep)
    back = read_replicated_csv(io.StringIO(buf.getvalue()), domain=rep.domain)
    np.testing.assert_array_equal(back.bases, rep.bases)
    np.testing.assert_array_equal(back.replicates, rep.replicates)
