"""Shared test utilities: independent oracles and random input builders.

The oracles here deliberately avoid the library's own code paths: dense
matrices are filled by the textbook pairwise formula, eigenstructure comes
from numpy's dense solver, and the linkage oracle rescans all cross-pairs at
every step.
"""

from __future__ import annotations

import numpy as np

from logcomm.ingest import AccessRecord, Session


def make_session(session_id, user_id, objects, start=0):
    """Session with one request per listed object (duplicates allowed)."""
    requests = [(start + i, obj) for i, obj in enumerate(objects)]
    return Session.from_requests(session_id, user_id, requests)


def random_sessions(rng, n_sessions, n_objects, max_objects_per_session=6):
    """Random sessions over a small object universe; object sets non-empty."""
    sessions = []
    for sid in range(n_sessions):
        size = int(rng.integers(1, max_objects_per_session + 1))
        chosen = rng.choice(n_objects, size=min(size, n_objects), replace=False)
        sessions.append(make_session(sid, f"u{sid}", [f"o{j}" for j in sorted(chosen)]))
    return sessions


def random_records(rng, n_users=5, n_records=40, t_max=20_000, n_objects=10):
    records = []
    for _ in range(n_records):
        records.append(
            AccessRecord(
                timestamp=int(rng.integers(0, t_max)),
                user_id=f"u{int(rng.integers(n_users))}",
                object_id=f"o{int(rng.integers(n_objects))}",
            )
        )
    return records


def dense_similarity(sessions):
    """Brute-force pairwise overlap matrix: the O(n^2) oracle."""
    n = len(sessions)
    ordered = sorted(sessions, key=lambda s: s.session_id)
    S = np.zeros((n, n))
    for i, a in enumerate(ordered):
        for j, b in enumerate(ordered):
            if i == j:
                continue
            shared = len(a.object_set & b.object_set)
            if shared:
                S[i, j] = shared / len(a.object_set)
    return S


def graph_to_dense(graph):
    S = np.zeros((graph.n, graph.n))
    rows = graph.row_ids
    for k in range(graph.n_edges):
        S[rows[k], graph.indices[k]] = graph.w_row[k]
    return S


def graph_to_dense_t(graph):
    St = np.zeros((graph.n, graph.n))
    rows = graph.row_ids
    for k in range(graph.n_edges):
        St[rows[k], graph.indices[k]] = graph.w_col[k]
    return St


def eigh_desc(M):
    """Dense symmetric eigendecomposition, eigenvalues descending."""
    evals, evecs = np.linalg.eigh(M)
    order = np.argsort(evals)[::-1]
    return evals[order], evecs[:, order]


def subspace_sin(v, basis):
    """Sine of the angle between v and span(basis columns)."""
    if basis.ndim == 1:
        basis = basis[:, None]
    q, _ = np.linalg.qr(basis)
    residual = v - q @ (q.T @ v)
    return float(np.linalg.norm(residual))


def oracle_subspace_check(M, eigenvalues, vectors, value_tol, angle_tol, band):
    """Check returned eigenpairs against the dense solver.

    Each returned eigenvalue must match the dense one of the same rank within
    ``value_tol``; each vector must lie (within ``angle_tol``) in the span of
    dense eigenvectors whose eigenvalues sit within ``band`` of it, which
    handles sign flips and near-degenerate rotations alike.
    """
    dense_vals, dense_vecs = eigh_desc(M)
    for rank, (lam, vec) in enumerate(zip(eigenvalues, vectors)):
        assert abs(lam - dense_vals[rank]) <= value_tol, (
            f"eigenvalue {rank}: {lam} vs dense {dense_vals[rank]}"
        )
        mask = np.abs(dense_vals - lam) <= band
        assert mask.any()
        angle = subspace_sin(vec, dense_vecs[:, mask])
        assert angle <= angle_tol, f"eigenvector {rank}: subspace angle {angle}"


def brute_force_complete_linkage(D):
    """Independent linkage oracle: keeps raw leaf sets and rescans every
    cross-pair distance at each step.  Ties pick the smallest active (i, j)."""
    D = np.asarray(D, dtype=float)
    k = D.shape[0]
    clusters = [[i] for i in range(k)]
    heights = []
    while len(clusters) > 1:
        best = None
        best_d = np.inf
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                d = max(D[a, b] for a in clusters[i] for b in clusters[j])
                if d < best_d:
                    best_d = d
                    best = (i, j)
        i, j = best
        heights.append(best_d)
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    return heights


def pearson(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / np.sqrt((xc @ xc) * (yc @ yc)))
