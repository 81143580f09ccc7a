"""Both kernel backends must agree bit for bit, so the import-time choice
never changes results."""

import numpy as np
import pytest

from logcomm import _pykernels, kernels


def random_csr(rng, n_rows, n_cols, density=0.3):
    mask = rng.random((n_rows, n_cols)) < density
    dense = np.where(mask, rng.random((n_rows, n_cols)), 0.0)
    indptr = [0]
    indices = []
    data = []
    for i in range(n_rows):
        cols = np.flatnonzero(dense[i])
        indices.extend(cols)
        data.extend(dense[i, cols])
        indptr.append(len(indices))
    return (
        np.asarray(indptr, np.int64),
        np.asarray(indices, np.int64),
        np.asarray(data, np.float64),
        dense,
    )


def test_py_matvec_matches_dense():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 30))
        indptr, indices, data, dense = random_csr(rng, n, n)
        x = rng.standard_normal(n)
        got = _pykernels.csr_matvec(indptr, indices, data, x)
        assert np.allclose(got, dense @ x, atol=1e-14)


def test_py_matvec_empty_rows():
    indptr = np.asarray([0, 0, 1, 1], np.int64)
    indices = np.asarray([2], np.int64)
    data = np.asarray([0.5], np.float64)
    x = np.asarray([1.0, 2.0, 4.0])
    got = _pykernels.csr_matvec(indptr, indices, data, x)
    assert np.array_equal(got, [0.0, 2.0, 0.0])


def test_py_count_pair_keys():
    # postings: object 0 -> rows {0,1,2}, object 1 -> rows {1,2}
    postings = np.asarray([0, 1, 2, 1, 2], np.int64)
    starts = np.asarray([0, 3, 5], np.int64)
    keys, counts = _pykernels.count_pair_keys(postings, starts, n=3)
    # pairs: (0,1) (0,2) (1,2) from object 0 and (1,2) again from object 1
    assert keys.tolist() == [1, 2, 5]
    assert counts.tolist() == [1, 1, 2]


def test_py_count_pair_keys_empty():
    keys, counts = _pykernels.count_pair_keys(
        np.asarray([0], np.int64), np.asarray([0, 1], np.int64), 5
    )
    assert len(keys) == 0 and len(counts) == 0


native = pytest.mark.skipif(not kernels.HAVE_NATIVE, reason="compiled kernels not built")


@native
def test_native_matvec_bitwise_equal():
    from logcomm import _ckernels

    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 60))
        indptr, indices, data, _ = random_csr(rng, n, n, density=0.4)
        x = rng.standard_normal(n)
        a = _ckernels.csr_matvec(indptr, indices, data, x)
        b = _pykernels.csr_matvec(indptr, indices, data, x)
        assert np.array_equal(a, b), "backends disagree bitwise"


@native
def test_native_count_pair_keys_equal():
    from logcomm import _ckernels

    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        n_objects = int(rng.integers(1, 15))
        postings = []
        starts = [0]
        for _ in range(n_objects):
            d = int(rng.integers(0, min(n, 8) + 1))
            rows = np.sort(rng.choice(n, size=d, replace=False))
            postings.extend(rows)
            starts.append(len(postings))
        postings = np.asarray(postings, np.int64)
        starts = np.asarray(starts, np.int64)
        ka, ca = _ckernels.count_pair_keys(postings, starts, n)
        kb, cb = _pykernels.count_pair_keys(postings, starts, n)
        assert np.array_equal(ka, kb)
        assert np.array_equal(ca, cb)
