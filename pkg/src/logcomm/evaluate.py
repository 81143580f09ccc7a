"""Community evaluation: session rankings, rank-correlation distances,
member/non-member splits, and signed tf-idf scores for objects and categories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ingest import Session
from .spectral import Community, CommunitySpectrum

__all__ = [
    "DistanceMatrix",
    "MembershipSplit",
    "ObjectScores",
    "average_ranks_desc",
    "rank_sessions",
    "spearman",
    "distance_matrix",
    "split_membership",
    "idf",
    "score_objects",
]


def average_ranks_desc(weights: np.ndarray) -> np.ndarray:
    """Rank positions for descending weights, 1 = highest; ties share the
    average of the positions they cover."""
    w = np.asarray(weights, dtype=np.float64)
    n = len(w)
    order = np.argsort(-w, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[order[stop]] == w[order[start]]:
            stop += 1
        # positions start+1 .. stop average to (start + stop + 1) / 2
        ranks[order[start:stop]] = (start + stop + 1) / 2.0
        start = stop
    return ranks


def rank_sessions(community: Community) -> np.ndarray:
    """Per-session rank inside one community (1 = highest authority weight)."""
    return average_ranks_desc(community.authority)


def spearman(rank_a: np.ndarray, rank_b: np.ndarray) -> float:
    """Rank correlation 1 - 6*sum(r^2)/(N(N^2-1)) over per-session rank
    differences r.  Exact on tie-free rankings; with average ranks for ties it
    is the usual approximation."""
    ra = np.asarray(rank_a, dtype=np.float64)
    rb = np.asarray(rank_b, dtype=np.float64)
    if ra.shape != rb.shape or ra.ndim != 1:
        raise ValueError("rankings must be 1-d and of equal length")
    n = len(ra)
    if n < 2:
        raise ValueError("spearman is undefined for fewer than 2 sessions")
    diff = ra - rb
    return 1.0 - 6.0 * float(diff @ diff) / (n * (n * n - 1.0))


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric community-to-community distances d = 1 - spearman."""

    values: np.ndarray = field(repr=False)
    labels: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.labels)


def distance_matrix(spectrum: CommunitySpectrum) -> DistanceMatrix:
    k = len(spectrum)
    if k < 2:
        raise ValueError("need at least 2 communities for a distance matrix")
    ranks = [rank_sessions(c) for c in spectrum.communities]
    values = np.zeros((k, k), dtype=np.float64)
    for a in range(k):
        for b in range(a + 1, k):
            d = 1.0 - spearman(ranks[a], ranks[b])
            values[a, b] = d
            values[b, a] = d
    return DistanceMatrix(values=values, labels=tuple(c.index for c in spectrum.communities))


@dataclass(frozen=True)
class MembershipSplit:
    """Top-n sessions (members), bottom-n (non-members), and the rest."""

    members: tuple[int, ...]
    non_members: tuple[int, ...]
    indifferent: tuple[int, ...]
    n: int


def resolve_split_size(n, total: int) -> int:
    """Turn a split request (count or the token ``half``) into a count."""
    if isinstance(n, str):
        if n != "half":
            raise ValueError(f"split size must be an integer or 'half', got {n!r}")
        return total // 2
    size = int(n)
    if size < 0:
        raise ValueError(f"split size must be non-negative, got {size}")
    return size


def split_membership(weights, session_ids, n) -> MembershipSplit:
    """Split sessions of one community by rank into members / non-members /
    indifferent.  ``n`` is a count or ``"half"``.  Ties at either boundary are
    broken by ascending session_id."""
    w = np.asarray(weights, dtype=np.float64)
    sids = np.asarray(session_ids, dtype=np.int64)
    if w.shape != sids.shape:
        raise ValueError("weights and session_ids must align")
    total = len(w)
    size = resolve_split_size(n, total)
    if 2 * size > total:
        raise ValueError(f"split size {size} too large: 2n exceeds {total} sessions")
    order = np.lexsort((sids, -w))
    ranked = sids[order]
    members = tuple(int(s) for s in ranked[:size])
    non_members = tuple(int(s) for s in ranked[total - size :]) if size else ()
    indifferent = tuple(int(s) for s in ranked[size : total - size])
    return MembershipSplit(members=members, non_members=non_members, indifferent=indifferent, n=size)


def idf(object_id: str, sessions: Sequence[Session]) -> float:
    """ln(total sessions / sessions containing the object)."""
    n_o = sum(1 for s in sessions if object_id in s.object_set)
    if n_o == 0:
        raise ValueError(f"object {object_id!r} was never accessed")
    return math.log(len(sessions) / n_o)


@dataclass(frozen=True)
class ObjectScores:
    """Signed per-object scores for one community, with optional category
    rollups (sum of member tf*idf minus non-member tf*idf)."""

    object_scores: Mapping[str, float]
    category_scores: Mapping[str, float] | None

    def top_objects(self, count: int) -> list[tuple[str, float]]:
        items = sorted(self.object_scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return items[:count]

    def bottom_objects(self, count: int) -> list[tuple[str, float]]:
        items = sorted(self.object_scores.items(), key=lambda kv: (kv[1], kv[0]))
        return items[:count]

    def best_categories(self, count: int) -> list[tuple[str, float]]:
        if self.category_scores is None:
            return []
        items = sorted(self.category_scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return items[:count]

    def worst_categories(self, count: int) -> list[tuple[str, float]]:
        if self.category_scores is None:
            return []
        items = sorted(self.category_scores.items(), key=lambda kv: (kv[1], kv[0]))
        return items[:count]


def score_objects(
    split: MembershipSplit,
    sessions: Sequence[Session],
    catalog: Mapping[str, frozenset[str]] | None = None,
) -> ObjectScores:
    """Score objects positively for member accesses, negatively for
    non-member accesses, each weighted by within-session count times idf.

    idf counts over all supplied sessions, not only the split.  With a
    catalog, each category accumulates the scores of its objects.
    """
    by_id = {s.session_id: s for s in sessions}
    n_total = len(sessions)
    doc_freq: dict[str, int] = {}
    for s in sessions:
        for obj in s.object_set:
            doc_freq[obj] = doc_freq.get(obj, 0) + 1

    scores: dict[str, float] = {}
    for sign, group in ((1.0, split.members), (-1.0, split.non_members)):
        for sid in group:
            session = by_id[sid]
            for obj, tf in session.object_counts.items():
                weight = sign * tf * math.log(n_total / doc_freq[obj])
                scores[obj] = scores.get(obj, 0.0) + weight
    scores = {obj: scores[obj] for obj in sorted(scores)}

    category_scores: dict[str, float] | None = None
    if catalog is not None:
        category_scores = {}
        for obj, score in scores.items():
            for category in sorted(catalog.get(obj, ())):
                category_scores[category] = category_scores.get(category, 0.0) + score
        category_scores = {c: category_scores[c] for c in sorted(category_scores)}

    return ObjectScores(object_scores=scores, category_scores=category_scores)
