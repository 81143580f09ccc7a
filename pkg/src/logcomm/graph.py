"""Sparse directed session-overlap graph.

Edge weight from session p to session q is the fraction of p's distinct
objects also requested in q: ``|O_p & O_q| / |O_p|``.  The overlap count is
symmetric, so the transposed matrix shares the sparsity pattern and only the
normalising set size changes; one index structure therefore carries both
directions as two data arrays.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .ingest import Session

__all__ = ["SessionGraph", "GraphStats", "build_similarity", "graph_stats"]

# Upper bound on pairs emitted per counting chunk (keeps temporaries bounded).
_CHUNK_PAIRS = 1 << 22

_HISTOGRAM_BINS = 10


class SessionGraph:
    """CSR-style adjacency over sessions, rows ordered by session_id.

    ``w_row[k]`` is the weight of the stored edge (row -> indices[k]) in the
    forward matrix; ``w_col[k]`` is the weight of the same slot in the
    transposed matrix (equal to the mirrored edge's forward weight).
    Self-loops are never stored.
    """

    __slots__ = ("n", "session_ids", "set_sizes", "indptr", "indices", "w_row", "w_col", "_row_ids")

    def __init__(self, n, session_ids, set_sizes, indptr, indices, w_row, w_col):
        self.n = int(n)
        self.session_ids = np.ascontiguousarray(session_ids, dtype=np.int64)
        self.set_sizes = None if set_sizes is None else np.ascontiguousarray(set_sizes, np.int64)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.w_row = np.ascontiguousarray(w_row, dtype=np.float64)
        self.w_col = np.ascontiguousarray(w_col, dtype=np.float64)
        self._row_ids = None

    @property
    def n_edges(self) -> int:
        return int(len(self.indices))

    @property
    def row_ids(self):
        if self._row_ids is None:
            self._row_ids = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        return self._row_ids

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward matvec S @ x."""
        return kernels.csr_matvec(self.indptr, self.indices, self.w_row, x, self.row_ids)

    def apply_t(self, x: np.ndarray) -> np.ndarray:
        """Transposed matvec S.T @ x."""
        return kernels.csr_matvec(self.indptr, self.indices, self.w_col, x, self.row_ids)

    def row_index(self, session_id: int) -> int:
        pos = int(np.searchsorted(self.session_ids, session_id))
        if pos >= self.n or self.session_ids[pos] != session_id:
            raise KeyError(f"unknown session_id {session_id}")
        return pos

    def weight(self, session_p: int, session_q: int) -> float:
        """Stored weight of edge p -> q, or 0.0 when absent."""
        p = self.row_index(session_p)
        q = self.row_index(session_q)
        lo, hi = self.indptr[p], self.indptr[p + 1]
        pos = lo + np.searchsorted(self.indices[lo:hi], q)
        if pos < hi and self.indices[pos] == q:
            return float(self.w_row[pos])
        return 0.0

    def edge_arrays(self):
        """(src session_id, dst session_id, weight) arrays in row-major order."""
        src = self.session_ids[self.row_ids]
        dst = self.session_ids[self.indices]
        return src, dst, self.w_row.copy()

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)


@dataclass(frozen=True)
class GraphStats:
    n_nodes: int
    n_edges: int
    weight_histogram: tuple[int, ...]  # counts over 10 equal bins covering (0, 1]
    n_components: int  # weakly connected, isolated nodes included as singletons
    n_isolated: int


def _postings(sessions: Sequence[Session], popular_fraction: float):
    """Inverted index object -> ascending row indices, as flat arrays."""
    n = len(sessions)
    index: dict[str, list[int]] = {}
    for row, session in enumerate(sessions):
        for obj in sorted(session.object_set):
            index.setdefault(obj, []).append(row)
    postings: list[int] = []
    starts = [0]
    for obj in sorted(index):
        rows = index[obj]
        if len(rows) / n > popular_fraction:
            continue
        postings.extend(rows)
        starts.append(len(postings))
    return np.asarray(postings, dtype=np.int64), np.asarray(starts, dtype=np.int64)


def _count_chunks(postings, starts, n, threads, chunk_pairs):
    """Split objects into chunks of bounded pair output and count each."""
    sizes = np.diff(starts)
    pair_counts = sizes * (sizes - 1) // 2
    bounds = [0]
    acc = 0
    for o, c in enumerate(pair_counts):
        if acc + int(c) > chunk_pairs and acc > 0:
            bounds.append(o)
            acc = 0
        acc += int(c)
    bounds.append(len(sizes))

    tasks = []
    for lo, hi in zip(bounds, bounds[1:]):
        if lo == hi:
            continue
        sub_starts = (starts[lo : hi + 1] - starts[lo]).copy()
        sub_post = postings[starts[lo] : starts[hi]]
        tasks.append((sub_post, sub_starts))

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: kernels.count_pair_keys(t[0], t[1], n), tasks))
    else:
        results = [kernels.count_pair_keys(post, st, n) for post, st in tasks]

    if not results:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if len(results) == 1:
        return results[0]
    keys = np.concatenate([r[0] for r in results])
    counts = np.concatenate([r[1] for r in results])
    uniq, inverse = np.unique(keys, return_inverse=True)
    merged = np.bincount(inverse, weights=counts.astype(np.float64), minlength=len(uniq))
    return uniq, merged.astype(np.int64)


def build_similarity(
    sessions: Sequence[Session],
    popular_fraction: float = 1.0,
    threads: int = 1,
    chunk_pairs: int = _CHUNK_PAIRS,
) -> SessionGraph:
    """Build the overlap graph from sessions via an inverted object index.

    Objects present in more than ``popular_fraction`` of all sessions are
    dropped before counting (1.0 disables the cutoff).  Chunked counting is
    merged in a fixed order, so results do not depend on ``threads``.
    """
    if not (0.0 < popular_fraction <= 1.0):
        raise ValueError(f"popular_fraction must be in (0, 1], got {popular_fraction}")
    sessions = sorted(sessions, key=lambda s: s.session_id)
    empty = [s.session_id for s in sessions if not s.object_set]
    if empty:
        raise ValueError(f"sessions with empty object sets cannot be graphed: {empty}")
    ids = np.asarray([s.session_id for s in sessions], dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise ValueError("duplicate session_ids")
    n = len(sessions)
    sizes = np.asarray([len(s.object_set) for s in sessions], dtype=np.int64)

    postings, starts = _postings(sessions, popular_fraction)
    keys, counts = _count_chunks(postings, starts, n, threads, chunk_pairs)

    p = keys // n
    q = keys % n
    rows = np.concatenate([p, q])
    cols = np.concatenate([q, p])
    overlap = np.concatenate([counts, counts]).astype(np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, overlap = rows[order], cols[order], overlap[order]

    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    w_row = overlap / sizes[rows]
    w_col = overlap / sizes[cols]
    return SessionGraph(n, ids, sizes, indptr, cols, w_row, w_col)


def graph_stats(graph: SessionGraph) -> GraphStats:
    """Deterministic summary: sizes, weight histogram, weak components."""
    degrees = graph.out_degrees()
    n_isolated = int(np.count_nonzero(degrees == 0))

    # weights lie in (0, 1]; bin b covers (b/10, (b+1)/10]
    bins = np.zeros(_HISTOGRAM_BINS, dtype=np.int64)
    if graph.n_edges:
        idx = np.ceil(graph.w_row * _HISTOGRAM_BINS).astype(np.int64) - 1
        np.clip(idx, 0, _HISTOGRAM_BINS - 1, out=idx)
        bins += np.bincount(idx, minlength=_HISTOGRAM_BINS)

    parent = list(range(graph.n))

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    rows = graph.row_ids
    for k in range(graph.n_edges):
        r, c = find(int(rows[k])), find(int(graph.indices[k]))
        if r != c:
            parent[max(r, c)] = min(r, c)
    n_components = sum(1 for i in range(graph.n) if find(i) == i)

    return GraphStats(
        n_nodes=graph.n,
        n_edges=graph.n_edges,
        weight_histogram=tuple(int(b) for b in bins),
        n_components=n_components,
        n_isolated=n_isolated,
    )


def from_edges(session_ids: Iterable[int], src, dst, weights) -> SessionGraph:
    """Rebuild a graph from an edge list over known session ids.

    The support must be symmetric (every edge's mirror present); weights are
    taken as stored, so a round trip through the edge-list file reproduces the
    original matrices bit for bit.
    """
    ids = np.asarray(sorted(session_ids), dtype=np.int64)
    n = len(ids)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)

    rows = np.searchsorted(ids, src)
    cols = np.searchsorted(ids, dst)
    valid_rows = (rows < n) & (ids[np.minimum(rows, n - 1)] == src) if n else np.zeros(0, bool)
    valid_cols = (cols < n) & (ids[np.minimum(cols, n - 1)] == dst) if n else np.zeros(0, bool)
    if len(src) and not (valid_rows.all() and valid_cols.all()):
        bad = src[~valid_rows] if not valid_rows.all() else dst[~valid_cols]
        raise ValueError(f"edge references unknown session_id {int(bad[0])}")
    if np.any(rows == cols):
        raise ValueError("self-loops are not allowed")

    order = np.lexsort((cols, rows))
    rows, cols, w_row = rows[order], cols[order], weights[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])

    key = rows * n + cols
    mirror = cols * n + rows
    pos = np.searchsorted(key, mirror)
    if len(key) and (np.any(pos >= len(key)) or np.any(key[np.minimum(pos, len(key) - 1)] != mirror)):
        raise ValueError("edge list support is not symmetric")
    w_col = w_row[pos] if len(key) else w_row.copy()
    return SessionGraph(n, ids, None, indptr, cols, w_row, w_col)
