"""Numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or disabled.  Accumulation
order matches the compiled loops exactly (``np.bincount`` adds sequentially),
so both backends produce bit-identical floats.
"""

from __future__ import annotations

import numpy as np


def csr_matvec(indptr, indices, data, x, row_ids=None):
    """y = A @ x for a CSR matrix given by (indptr, indices, data).

    ``row_ids`` is the optional precomputed row index of every stored entry;
    it is derived from ``indptr`` when absent.
    """
    n_rows = len(indptr) - 1
    if row_ids is None:
        row_ids = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(indptr))
    return np.bincount(row_ids, weights=data * x[indices], minlength=n_rows)


def count_pair_keys(postings, starts, n):
    """Count co-occurrences of row pairs across posting lists.

    ``postings[starts[o]:starts[o+1]]`` holds the ascending row indices of the
    o-th object's sessions.  Every unordered pair (p < q) inside one list is
    emitted as the key ``p * n + q``; returns (unique keys ascending, counts).
    """
    sizes = np.diff(starts)
    total = int(np.sum(sizes * (sizes - 1) // 2))
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    keys = np.empty(total, np.int64)
    pos = 0
    for o in range(len(sizes)):
        d = int(sizes[o])
        if d < 2:
            continue
        rows = postings[starts[o] : starts[o + 1]]
        iu, ju = np.triu_indices(d, k=1)
        m = len(iu)
        keys[pos : pos + m] = rows[iu] * n + rows[ju]
        pos += m
    return np.unique(keys, return_counts=True)
