# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: CSR matvec and posting-list pair counting."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def csr_matvec(indptr, indices, data, x, row_ids=None):
    """y = A @ x for a CSR matrix given by (indptr, indices, data)."""
    cdef cnp.int64_t[::1] ip = indptr
    cdef cnp.int64_t[::1] idx = indices
    cdef double[::1] dat = data
    cdef double[::1] xv = x
    cdef Py_ssize_t n_rows = ip.shape[0] - 1
    out = np.empty(n_rows, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double acc
    with nogil:
        for i in range(n_rows):
            acc = 0.0
            for j in range(ip[i], ip[i + 1]):
                acc = acc + dat[j] * xv[idx[j]]
            ov[i] = acc
    return out


def count_pair_keys(postings, starts, n):
    """Count co-occurrences of row pairs across posting lists.

    Same contract as the numpy fallback: emits ``p * n + q`` for every
    unordered in-list pair (p < q), returns (unique keys ascending, counts).
    """
    cdef cnp.int64_t[::1] post = postings
    cdef cnp.int64_t[::1] st = starts
    cdef Py_ssize_t n_obj = st.shape[0] - 1
    cdef cnp.int64_t nn = n
    cdef Py_ssize_t o, a, b, d
    cdef cnp.int64_t total = 0
    for o in range(n_obj):
        d = st[o + 1] - st[o]
        total += (d * (d - 1)) // 2
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)

    keys = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = keys
    cdef Py_ssize_t pos = 0
    with nogil:
        for o in range(n_obj):
            for a in range(st[o], st[o + 1]):
                for b in range(a + 1, st[o + 1]):
                    kv[pos] = post[a] * nn + post[b]
                    pos += 1
    keys.sort()

    uniq = np.empty(total, dtype=np.int64)
    counts = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[::1] uv = uniq
    cdef cnp.int64_t[::1] cv = counts
    cdef Py_ssize_t m = 0
    cdef cnp.int64_t cur
    with nogil:
        cur = kv[0]
        uv[0] = cur
        cv[0] = 1
        for a in range(1, total):
            if kv[a] == cur:
                cv[m] += 1
            else:
                m += 1
                cur = kv[a]
                uv[m] = cur
                cv[m] = 1
        m += 1
    return uniq[:m], counts[:m]
