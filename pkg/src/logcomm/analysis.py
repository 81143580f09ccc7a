"""Hierarchical clustering of communities and 2-d stress-minimising projection
of their distance matrix, for the reporting figures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Merge",
    "Dendrogram",
    "SammonConfig",
    "Embedding2D",
    "complete_linkage",
    "merge_heights",
    "sammon",
]

_ZERO_DISTANCE_FILL = 1e-9


def _as_square(D) -> np.ndarray:
    values = D.values if hasattr(D, "values") else D
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.array_equal(values, values.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(values) != 0.0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(values < 0.0):
        raise ValueError("distances must be non-negative")
    return values


@dataclass(frozen=True)
class Merge:
    cluster_a: tuple[int, ...]
    cluster_b: tuple[int, ...]
    height: float


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[Merge, ...]

    def heights(self) -> list[float]:
        return [m.height for m in self.merges]

    def to_tree(self) -> dict:
        """Nested merge tree; leaves carry height 0."""
        nodes: dict[tuple[int, ...], dict] = {}

        def leaf(i: int) -> dict:
            return {"members": [i], "height": 0.0}

        for merge in self.merges:
            a = nodes.pop(merge.cluster_a, None) or leaf(merge.cluster_a[0])
            b = nodes.pop(merge.cluster_b, None) or leaf(merge.cluster_b[0])
            members = tuple(sorted(merge.cluster_a + merge.cluster_b))
            nodes[members] = {
                "members": list(members),
                "height": merge.height,
                "children": [a, b],
            }
        if len(nodes) != 1:
            raise ValueError("merge list does not form a single tree")
        return next(iter(nodes.values()))

    def cophenetic(self, i: int, j: int) -> float:
        """Height of the first merge uniting leaves i and j."""
        for merge in self.merges:
            ab = set(merge.cluster_a), set(merge.cluster_b)
            if (i in ab[0] and j in ab[1]) or (i in ab[1] and j in ab[0]):
                return merge.height
        raise KeyError(f"leaves {i} and {j} are never merged")


def complete_linkage(D) -> Dendrogram:
    """Agglomerate communities bottom-up, always merging the closest pair,
    with inter-cluster distance the longest distance across the two clusters.

    Ties pick the lexicographically smallest active pair (i, j); the merged
    cluster takes slot i.  k communities yield exactly k-1 merges with
    non-decreasing heights.
    """
    values = _as_square(D)
    k = values.shape[0]
    if k < 2:
        raise ValueError("need at least 2 communities to cluster")
    clusters: list[tuple[int, ...]] = [(i,) for i in range(k)]
    dist = values.copy()
    merges: list[Merge] = []

    while len(clusters) > 1:
        m = len(clusters)
        best = (0, 1)
        best_d = np.inf
        for i in range(m):
            for j in range(i + 1, m):
                if dist[i, j] < best_d:
                    best_d = dist[i, j]
                    best = (i, j)
        i, j = best
        merges.append(Merge(cluster_a=clusters[i], cluster_b=clusters[j], height=float(best_d)))
        merged = tuple(sorted(clusters[i] + clusters[j]))
        # farthest-pair rule: new distance is the max of the two old ones
        new_row = np.maximum(dist[i], dist[j])
        dist[i, :] = new_row
        dist[:, i] = new_row
        dist[i, i] = 0.0
        keep = [c for c in range(m) if c != j]
        dist = dist[np.ix_(keep, keep)]
        clusters[i] = merged
        del clusters[j]

    return Dendrogram(merges=tuple(merges))


def merge_heights(dendrogram: Dendrogram) -> list[float]:
    """Inter-cluster distance consumed by each merge, in merge order."""
    return dendrogram.heights()


@dataclass(frozen=True)
class SammonConfig:
    max_iterations: int = 500
    step: float = 0.3  # scales the diagonally-preconditioned descent step
    stress_threshold: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be positive, got {self.max_iterations}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not self.stress_threshold > 0:
            raise ValueError(f"stress_threshold must be positive, got {self.stress_threshold}")


@dataclass(frozen=True)
class Embedding2D:
    points: np.ndarray = field(repr=False)
    stress: float
    iterations: int
    stress_history: tuple[float, ...] = field(repr=False, default=())

    @property
    def mean_pairwise_distance(self) -> float:
        """Spread diagnostic over the embedded points."""
        k = len(self.points)
        if k < 2:
            return 0.0
        deltas = self.points[:, None, :] - self.points[None, :, :]
        d = np.sqrt((deltas**2).sum(axis=2))
        iu = np.triu_indices(k, 1)
        return float(d[iu].mean())


def _pair_distances(y: np.ndarray) -> np.ndarray:
    deltas = y[:, None, :] - y[None, :, :]
    return np.sqrt((deltas**2).sum(axis=2))


def _stress(delta: np.ndarray, d: np.ndarray, scale: float) -> float:
    iu = np.triu_indices(delta.shape[0], 1)
    diff = delta[iu] - d[iu]
    return float(np.sum(diff * diff / delta[iu]) / scale)


def sammon(D, config: SammonConfig = SammonConfig()) -> Embedding2D:
    """Project a distance matrix to the plane by minimising Sammon stress.

    Steepest descent scaled by the magnitude of the diagonal second
    derivative, with step halving whenever a step would raise the stress;
    accepted steps therefore never increase it.  Initial positions are drawn
    uniformly from [-1, 1]^2 with the configured seed.  Off-diagonal zero
    input distances are perturbed to 1e-9 (with a warning) since the stress
    divides by them.
    """
    delta = _as_square(D).copy()
    k = delta.shape[0]
    if k < 3:
        raise ValueError("need at least 3 communities to project")

    off = ~np.eye(k, dtype=bool)
    zeros = off & (delta == 0.0)
    if zeros.any():
        warnings.warn(
            f"{int(zeros.sum()) // 2} zero off-diagonal distances perturbed to {_ZERO_DISTANCE_FILL}",
            stacklevel=2,
        )
        delta[zeros] = _ZERO_DISTANCE_FILL
    if np.any(delta[off] <= 0.0):
        raise ValueError("off-diagonal distances must be positive")

    scale = float(delta[np.triu_indices(k, 1)].sum())
    rng = np.random.default_rng(config.seed)
    y = rng.uniform(-1.0, 1.0, size=(k, 2))

    eps = 1e-12
    delta_safe = delta + np.eye(k)  # diagonal never used; avoids 0/0
    d = _pair_distances(y)
    stress = _stress(delta, d, scale)
    history = [stress]
    iterations = 0

    for _ in range(config.max_iterations):
        d_safe = np.maximum(d, eps) + np.eye(k)
        # gradient and diagonal curvature of the stress at y
        coeff = (delta_safe - d_safe) / (delta_safe * d_safe)
        np.fill_diagonal(coeff, 0.0)
        diff = y[:, None, :] - y[None, :, :]
        grad = (-2.0 / scale) * (coeff[:, :, None] * diff).sum(axis=1)
        inv = 1.0 / (delta_safe * d_safe)
        np.fill_diagonal(inv, 0.0)
        curv_pair = inv[:, :, None] * (
            (delta_safe - d_safe)[:, :, None]
            - (diff**2 / d_safe[:, :, None]) * (1.0 + (delta_safe - d_safe)[:, :, None] / d_safe[:, :, None])
        )
        curv = (-2.0 / scale) * curv_pair.sum(axis=1)

        step = config.step * grad / np.maximum(np.abs(curv), eps)
        accepted = False
        for _halving in range(25):
            y_new = y - step
            d_new = _pair_distances(y_new)
            stress_new = _stress(delta, d_new, scale)
            if stress_new <= stress:
                accepted = True
                break
            step = step / 2.0
        if not accepted:
            break
        improvement = stress - stress_new
        y, d, stress = y_new, d_new, stress_new
        iterations += 1
        history.append(stress)
        if improvement < config.stress_threshold:
            break

    return Embedding2D(
        points=y, stress=stress, iterations=iterations, stress_history=tuple(history)
    )
