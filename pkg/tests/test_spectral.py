import numpy as np
import pytest

from helpers import (
    eigh_desc,
    graph_to_dense,
    make_session,
    oracle_subspace_check,
    random_sessions,
    subspace_sin,
)
from logcomm.graph import SessionGraph, build_similarity
from logcomm.ingest import sessionize
from logcomm.spectral import (
    AuthorityOperator,
    ConvergenceError,
    PowerIterConfig,
    authority_operator,
    find_communities,
    top_k_eigenpairs,
)
from logcomm.synth import PlantedConfig, generate_planted_log


def graph_from_dense(S):
    """SessionGraph over an arbitrary dense matrix (test scaffolding).

    The stored pattern is the union of the supports of S and S.T so both
    directions fit one index structure; missing mirrors become explicit zeros.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    support = (S != 0) | (S.T != 0)
    np.fill_diagonal(support, False)
    rows, cols = np.nonzero(support)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return SessionGraph(
        n, np.arange(n), None, indptr, cols, S[rows, cols], S[cols, rows]
    )


class DenseOperator:
    """Duck-typed operator for the eigensolver, backed by a dense matrix."""

    def __init__(self, M):
        self.M = np.asarray(M, dtype=float)
        self.n = self.M.shape[0]

    def matvec(self, x):
        return self.M @ x


class TestAuthorityOperator:
    def test_two_by_two_example(self):
        op = authority_operator(graph_from_dense([[0.0, 1.0], [0.0, 0.0]]))
        # S.T S = [[0,0],[0,1]]
        assert np.allclose(op.matvec(np.array([1.0, 1.0])), [0.0, 1.0])

    def test_zero_graph_is_zero_map(self):
        g = build_similarity([make_session(0, "u0", "a"), make_session(1, "u1", "b")])
        op = authority_operator(g)
        assert np.array_equal(op.matvec(np.array([1.0, -2.0])), [0.0, 0.0])

    def test_matches_dense_product(self):
        rng = np.random.default_rng(5)
        sessions = random_sessions(rng, 10, 5)
        g = build_similarity(sessions)
        S = graph_to_dense(g)
        op = authority_operator(g)
        for _ in range(5):
            x = rng.standard_normal(10)
            assert np.allclose(op.matvec(x), S.T @ (S @ x), atol=1e-12)

    def test_empty_graph_rejected(self):
        with pytest.raises(ValueError):
            authority_operator(build_similarity([]))


class TestTopKEigenpairs:
    def test_diagonal(self):
        pairs = top_k_eigenpairs(DenseOperator(np.diag([4.0, 1.0])), 2, PowerIterConfig(k=2))
        values = [lam for lam, _ in pairs]
        assert np.allclose(values, [4.0, 1.0], atol=1e-9)
        assert abs(abs(pairs[0][1][0]) - 1.0) < 1e-6
        assert abs(abs(pairs[1][1][1]) - 1.0) < 1e-6

    def test_block_diagonal_masses(self):
        heavy = np.array([[4.0, 1.0], [1.0, 1.0]])  # eigenvalues ~4.30, ~0.70
        light = np.array([[2.0, 0.5], [0.5, 1.0]])  # eigenvalues ~2.21, ~0.79
        M = np.block([[heavy, np.zeros((2, 2))], [np.zeros((2, 2)), light]])
        pairs = top_k_eigenpairs(DenseOperator(M), 2, PowerIterConfig(k=2))
        (lam0, v0), (lam1, v1) = pairs
        dense_vals, _ = eigh_desc(M)
        assert np.allclose([lam0, lam1], dense_vals[:2], atol=1e-9)
        assert np.linalg.norm(v0[2:]) < 1e-6  # principal lives on the heavy block
        assert np.linalg.norm(v1[:2]) < 1e-6  # runner-up on the light block

    def test_repeated_top_eigenvalue_spans_eigenspace(self):
        M = np.diag([3.0, 3.0, 1.0])
        pairs = top_k_eigenpairs(DenseOperator(M), 2, PowerIterConfig(k=2))
        lams = np.array([lam for lam, _ in pairs])
        V = np.stack([v for _, v in pairs], axis=1)
        assert np.allclose(lams, [3.0, 3.0], atol=1e-9)
        # the pair spans an invariant subspace: M V = V (V^T M V)
        residual = M @ V - V @ (V.T @ M @ V)
        assert np.linalg.norm(residual) < 1e-8
        # and that subspace is the e1/e2 plane
        basis = np.eye(3)[:, :2]
        for i in range(2):
            assert subspace_sin(V[:, i], basis) < 1e-6

    def test_orthonormal_output(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((12, 12))
        M = A @ A.T
        pairs = top_k_eigenpairs(DenseOperator(M), 5, PowerIterConfig(k=5))
        V = np.stack([v for _, v in pairs], axis=1)
        assert np.allclose(V.T @ V, np.eye(5), atol=1e-6)

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValueError):
            top_k_eigenpairs(DenseOperator(np.eye(2)), 3, PowerIterConfig(k=3))

    def test_nonconvergence_reports_pair_and_residual(self):
        M = np.diag([1.0, 0.999])
        config = PowerIterConfig(k=2, tolerance=1e-14, max_iterations=5)
        with pytest.raises(ConvergenceError) as err:
            top_k_eigenpairs(DenseOperator(M), 2, config)
        assert err.value.pair_index == 0
        assert err.value.residual > 0

    def test_rank_deficient_pads_with_null_vectors(self):
        M = np.zeros((4, 4))
        M[0, 0] = 2.0
        pairs = top_k_eigenpairs(DenseOperator(M), 3, PowerIterConfig(k=3))
        assert np.allclose([lam for lam, _ in pairs], [2.0, 0.0, 0.0], atol=1e-9)
        V = np.stack([v for _, v in pairs], axis=1)
        assert np.allclose(V.T @ V, np.eye(3), atol=1e-6)


class TestFindCommunities:
    def test_identical_sessions_share_weight(self):
        g = build_similarity([make_session(0, "u0", "ab"), make_session(1, "u1", "ab")])
        spectrum = find_communities(g, PowerIterConfig(k=1))
        a = spectrum.communities[0].authority
        assert a[0] == pytest.approx(a[1], abs=1e-10)
        assert a[0] > 0

    def test_sign_convention(self):
        rng = np.random.default_rng(13)
        g = build_similarity(random_sessions(rng, 15, 6))
        spectrum = find_communities(g, PowerIterConfig(k=4))
        for c in spectrum.communities:
            peak = np.argmax(np.abs(c.authority))
            assert c.authority[peak] > 0

    def test_isolated_session_zero_everywhere(self):
        sessions = [
            make_session(0, "u0", "ab"),
            make_session(1, "u1", "ab"),
            make_session(2, "u2", "zz"),
        ]
        spectrum = find_communities(build_similarity(sessions), PowerIterConfig(k=2))
        for c in spectrum.communities:
            assert abs(c.authority[2]) < 1e-12
            assert abs(c.hub[2]) < 1e-12

    def test_planted_blocks_recovered(self):
        records, truth = generate_planted_log(
            PlantedConfig(groups=3, sessions_per_group=12, cross_group_noise=0.0, seed=3)
        )
        sessions = sessionize(records)
        g = build_similarity(sessions)
        spectrum = find_communities(g, PowerIterConfig(k=3))
        groups_hit = set()
        for c in spectrum.communities:
            top = np.argsort(-c.authority, kind="stable")[:12]
            top_groups = {truth[sessions[i].user_id] for i in top}
            assert len(top_groups) == 1
            groups_hit |= top_groups
        assert groups_hit == {0, 1, 2}
        # cross-checked against the dense solver
        S = graph_to_dense(g)
        oracle_subspace_check(
            S.T @ S,
            [c.eigenvalue for c in spectrum.communities],
            [c.authority for c in spectrum.communities],
            value_tol=1e-8,
            angle_tol=1e-6,
            band=1e-5 * max(spectrum.communities[0].eigenvalue, 1.0),
        )

    def test_hub_is_normalised_image(self):
        rng = np.random.default_rng(21)
        g = build_similarity(random_sessions(rng, 20, 7))
        spectrum = find_communities(g, PowerIterConfig(k=3))
        S = graph_to_dense(g)
        for c in spectrum.communities:
            image = S @ c.authority
            assert np.allclose(c.hub, image / np.linalg.norm(image), atol=1e-9)
            assert np.linalg.norm(c.hub) == pytest.approx(1.0, abs=1e-9)

    def test_mutual_reinforcement_fixed_point(self):
        rng = np.random.default_rng(22)
        g = build_similarity(random_sessions(rng, 25, 8))
        config = PowerIterConfig(k=3)
        spectrum = find_communities(g, config)
        S = graph_to_dense(g)
        lam_max = spectrum.communities[0].eigenvalue
        for c in spectrum.communities:
            if c.eigenvalue <= 1e-12:
                continue
            a_back = S.T @ c.hub
            scale = np.linalg.norm(a_back)
            assert np.linalg.norm(a_back - scale * c.authority) <= 10 * config.tolerance * max(lam_max, 1.0)
            h_back = S @ c.authority
            assert np.linalg.norm(h_back - np.linalg.norm(h_back) * c.hub) <= 1e-9

    def test_weight_scaling_scales_eigenvalues(self):
        rng = np.random.default_rng(23)
        sessions = random_sessions(rng, 20, 6)
        g1 = build_similarity(sessions)
        g2 = build_similarity(sessions)
        c = 2.5
        g2.w_row = g2.w_row * c
        g2.w_col = g2.w_col * c
        s1 = find_communities(g1, PowerIterConfig(k=3))
        s2 = find_communities(g2, PowerIterConfig(k=3))
        for a, b in zip(s1.communities, s2.communities):
            assert b.eigenvalue == pytest.approx(c * c * a.eigenvalue, rel=1e-8)
            assert np.array_equal(
                np.argsort(-a.authority, kind="stable"), np.argsort(-b.authority, kind="stable")
            )

    def test_bit_identical_reruns(self):
        rng = np.random.default_rng(24)
        sessions = random_sessions(rng, 30, 8)
        g = build_similarity(sessions)
        s1 = find_communities(g, PowerIterConfig(k=4, seed=9))
        s2 = find_communities(g, PowerIterConfig(k=4, seed=9))
        for a, b in zip(s1.communities, s2.communities):
            assert a.eigenvalue == b.eigenvalue
            assert np.array_equal(a.authority, b.authority)
            assert np.array_equal(a.hub, b.hub)

    def test_eigenvalues_non_increasing_and_orthogonal(self):
        rng = np.random.default_rng(25)
        g = build_similarity(random_sessions(rng, 30, 6))
        spectrum = find_communities(g, PowerIterConfig(k=5))
        values = [c.eigenvalue for c in spectrum.communities]
        assert all(x >= y for x, y in zip(values, values[1:]))
        V = np.stack([c.authority for c in spectrum.communities], axis=1)
        off = V.T @ V - np.eye(5)
        assert np.max(np.abs(off)) < 1e-6

    def test_split_poles_doubles_non_principal(self):
        rng = np.random.default_rng(26)
        g = build_similarity(random_sessions(rng, 15, 5))
        plain = find_communities(g, PowerIterConfig(k=3))
        split = find_communities(g, PowerIterConfig(k=3), split_poles=True)
        assert len(split) == 2 * len(plain) - 1
        assert np.array_equal(split.communities[1].authority, -split.communities[2].authority)

    def test_k_exceeding_sessions_rejected(self):
        g = build_similarity([make_session(0, "u0", "a"), make_session(1, "u1", "a")])
        with pytest.raises(ValueError):
            find_communities(g, PowerIterConfig(k=3))


def test_oracle_equivalence_small_graphs():
    rng = np.random.default_rng(31)
    for _ in range(10):
        n = int(rng.integers(2, 21))
        sessions = random_sessions(rng, n, max(3, int(rng.integers(3, 15))))
        g = build_similarity(sessions)
        k = min(n, 6)
        spectrum = find_communities(g, PowerIterConfig(k=k, tolerance=1e-12))
        S = graph_to_dense(g)
        lam_max = max(spectrum.communities[0].eigenvalue, 1.0)
        oracle_subspace_check(
            S.T @ S,
            [c.eigenvalue for c in spectrum.communities],
            [c.authority for c in spectrum.communities],
            value_tol=1e-8,
            angle_tol=1e-6,
            band=1e-5 * lam_max,
        )
