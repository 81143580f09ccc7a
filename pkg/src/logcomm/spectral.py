"""Top-k community eigenstructure of the session graph.

Communities are eigenvectors of the authority operator S.T @ S, found by
power iteration: each converged direction is locked, and later iterates are
re-orthogonalised against all locked directions every step.  The paired hub
vector is S @ a, normalised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .graph import SessionGraph

__all__ = [
    "PowerIterConfig",
    "Community",
    "CommunitySpectrum",
    "ConvergenceError",
    "AuthorityOperator",
    "authority_operator",
    "top_k_eigenpairs",
    "find_communities",
]


@dataclass(frozen=True)
class PowerIterConfig:
    k: int = 10
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be positive, got {self.max_iterations}")


class ConvergenceError(RuntimeError):
    """Power iteration hit the iteration cap before meeting the residual bound."""

    def __init__(self, pair_index: int, residual: float, max_iterations: int):
        super().__init__(
            f"eigenpair {pair_index} did not converge within {max_iterations} iterations "
            f"(last residual {residual:.3e})"
        )
        self.pair_index = pair_index
        self.residual = residual


class LinearOperator(Protocol):
    n: int

    def matvec(self, x: np.ndarray) -> np.ndarray: ...


class AuthorityOperator:
    """Applies v -> S.T @ (S @ v) in two sparse passes, never forming S.T @ S."""

    def __init__(self, graph: SessionGraph):
        if graph.n == 0:
            raise ValueError("graph is empty")
        self.graph = graph
        self.n = graph.n

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.graph.apply_t(self.graph.apply(x))


def authority_operator(graph: SessionGraph) -> AuthorityOperator:
    return AuthorityOperator(graph)


@dataclass(frozen=True)
class Community:
    """One eigenpair: authority scores over sessions and the paired hub scores."""

    index: int
    eigenvalue: float
    authority: np.ndarray = field(repr=False)
    hub: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CommunitySpectrum:
    communities: tuple[Community, ...]
    n: int
    session_ids: np.ndarray = field(repr=False)
    config: PowerIterConfig = PowerIterConfig()

    def __len__(self) -> int:
        return len(self.communities)


def _project_out(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for u in basis:
        v = v - (u @ v) * u
    return v


def top_k_eigenpairs(
    operator: LinearOperator, k: int, config: PowerIterConfig
) -> list[tuple[float, np.ndarray]]:
    """Leading eigenpairs of a symmetric PSD operator, descending eigenvalue.

    Convergence for a pair means ``||Mv - lam*v|| <= tolerance * max(lam_max, 1)``
    with lam the Rayleigh quotient and lam_max the largest eigenvalue found so
    far.  Raises :class:`ConvergenceError` naming the failing pair otherwise.
    Deterministic for a fixed (operator, config).
    """
    n = operator.n
    if k > n:
        raise ValueError(f"k={k} exceeds operator size n={n}")
    rng = np.random.default_rng(config.seed)
    found: list[tuple[float, np.ndarray]] = []
    basis: list[np.ndarray] = []
    lam_max = 0.0

    for pair_index in range(k):
        v = rng.standard_normal(n)
        v = _project_out(_project_out(v, basis), basis)
        norm = np.linalg.norm(v)
        while norm < 1e-12:  # astronomically unlikely; redraw deterministically
            v = _project_out(rng.standard_normal(n), basis)
            norm = np.linalg.norm(v)
        v /= norm

        residual = np.inf
        converged = False
        for _ in range(config.max_iterations):
            w = operator.matvec(v)
            w = _project_out(w, basis)
            lam = float(v @ w)
            residual = float(np.linalg.norm(w - lam * v))
            if residual <= config.tolerance * max(lam_max, lam, 1.0):
                converged = True
                break
            norm = float(np.linalg.norm(w))
            if norm == 0.0:
                lam = 0.0
                converged = True
                break
            v = w / norm
        if not converged:
            raise ConvergenceError(pair_index, residual, config.max_iterations)

        lam = max(lam, 0.0)  # PSD; tiny negatives are rounding
        lam_max = max(lam_max, lam)
        found.append((lam, v))
        basis.append(v)

    order = np.argsort([-lam for lam, _ in found], kind="stable")
    return [found[i] for i in order]


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    if len(v) == 0:
        return v
    peak = int(np.argmax(np.abs(v)))
    return -v if v[peak] < 0 else v


def find_communities(
    graph: SessionGraph, config: PowerIterConfig = PowerIterConfig(), split_poles: bool = False
) -> CommunitySpectrum:
    """Extract the community spectrum of a session graph.

    Authority vectors are sign-normalised so the largest-magnitude entry is
    positive; the hub vector is ``S @ a`` renormalised (zero when the image
    vanishes, which only happens at eigenvalue 0).  With ``split_poles`` each
    non-principal eigenvector contributes two communities, one per sign pole.
    """
    op = AuthorityOperator(graph)
    if config.k > graph.n:
        raise ValueError(f"k={config.k} exceeds session count n={graph.n}")
    pairs = top_k_eigenpairs(op, config.k, config)

    def make_community(index: int, eigenvalue: float, a: np.ndarray) -> Community:
        image = graph.apply(a)
        norm = float(np.linalg.norm(image))
        hub = image / norm if norm > 0.0 else np.zeros_like(image)
        return Community(index=index, eigenvalue=eigenvalue, authority=a, hub=hub)

    communities: list[Community] = []
    for rank, (lam, vec) in enumerate(pairs):
        a = _sign_normalize(vec)
        communities.append(make_community(len(communities), lam, a))
        if split_poles and rank > 0:
            communities.append(make_community(len(communities), lam, -a))

    return CommunitySpectrum(
        communities=tuple(communities),
        n=graph.n,
        session_ids=graph.session_ids.copy(),
        config=config,
    )
