import numpy as np
import pytest

from spectralinit import (AnchoredLaplacianSolver, DimensionError,
                          DisconnectedGraph, LinearOperator, NoConvergence,
                          SparseSymMatrix, laplacian_pinv_apply,
                          smallest_eigenpairs, spectral_norm, svd_small)


def c4_laplacian():
    rows = [0, 1, 2, 3, 0, 1, 2, 0]
    cols = [0, 1, 2, 3, 1, 2, 3, 3]
    vals = [2.0] * 4 + [-1.0] * 4
    return SparseSymMatrix.from_entries(4, rows, cols, vals)


def k3_laplacian():
    return SparseSymMatrix.from_entries(
        3, [0, 1, 2, 0, 0, 1], [0, 1, 2, 1, 2, 2],
        [2.0, 2.0, 2.0, -1.0, -1.0, -1.0])


def random_sparse_sym(n, rng, density=0.3):
    A = rng.standard_normal((n, n))
    A = (A + A.T) / 2
    mask = rng.random((n, n)) < density
    A = A * (mask | mask.T | np.eye(n, dtype=bool))
    return SparseSymMatrix.from_dense(A), A * 1.0


class TestSparseSymMatrix:
    def test_symmetrization(self):
        M = SparseSymMatrix.from_entries(3, [1], [0], [5.0])
        dense = M.to_dense()
        assert dense[0, 1] == 5.0 and dense[1, 0] == 5.0

    def test_duplicate_rejected(self):
        with pytest.raises(DimensionError):
            SparseSymMatrix.from_entries(3, [0, 1], [1, 0], [1.0, 2.0])

    def test_block_size_must_divide(self):
        with pytest.raises(DimensionError):
            SparseSymMatrix.from_entries(5, [0], [0], [1.0], block_size=3)

    def test_gershgorin_contains_spectrum(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            M, dense = random_sparse_sym(12, rng)
            lo, hi = M.gershgorin_interval()
            w = np.linalg.eigvalsh(dense)
            assert lo <= w[0] + 1e-12 and w[-1] <= hi + 1e-12


class TestSmallestEigenpairs:
    def test_identity_spectrum(self):
        I6 = SparseSymMatrix.from_entries(6, range(6), range(6), np.ones(6))
        p = smallest_eigenpairs(I6, 3)
        np.testing.assert_allclose(p.values, [1, 1, 1], atol=1e-10)
        np.testing.assert_allclose(p.vectors.T @ p.vectors, np.eye(3),
                                   atol=1e-10)

    def test_c4_cycle(self):
        p = smallest_eigenpairs(c4_laplacian(), 2)
        oracle = np.linalg.eigvalsh(c4_laplacian().to_dense())[:2]
        np.testing.assert_allclose(p.values, oracle, atol=1e-8)
        np.testing.assert_allclose(p.values, [0.0, 2.0], atol=1e-8)

    def test_zero_matrix(self):
        Z = SparseSymMatrix.from_entries(5, [], [], [])
        p = smallest_eigenpairs(Z, 2)
        np.testing.assert_allclose(p.values, [0.0, 0.0], atol=1e-14)

    def test_k_too_large(self):
        I3 = SparseSymMatrix.from_entries(3, range(3), range(3), np.ones(3))
        with pytest.raises(DimensionError):
            smallest_eigenpairs(I3, 3)

    def test_no_convergence(self):
        rng = np.random.default_rng(5)
        _, dense = random_sparse_sym(50, rng, density=1.0)
        M = SparseSymMatrix.from_dense(dense)
        with pytest.raises(NoConvergence) as info:
            smallest_eigenpairs(M, 3, tol=1e-12, max_iter=4)
        assert info.value.iterations <= 4
        assert info.value.best_residual > 0

    def test_dense_oracle_equivalence(self):
        rng = np.random.default_rng(1)
        for trial in range(15):
            n = int(rng.integers(8, 61))
            k = int(rng.integers(1, 6))
            M, dense = random_sparse_sym(n, rng)
            if trial % 3 == 0:
                # force a degenerate bottom cluster
                w, V = np.linalg.eigh(dense)
                w[: min(3, n)] = w[0]
                dense = (V * w) @ V.T
                dense = (dense + dense.T) / 2
                M = SparseSymMatrix.from_dense(dense)
            p = smallest_eigenpairs(M, k, seed=trial)
            oracle = np.linalg.eigvalsh(dense)[:k]
            np.testing.assert_allclose(p.values, oracle, atol=1e-8)
            gram = p.vectors.T @ p.vectors
            np.testing.assert_allclose(gram, np.eye(k), atol=1e-8)
            assert np.all(p.residual_norms <= 1e-8 * max(np.abs(oracle).max(), 1))

    def test_matvec_only_operator(self):
        rng = np.random.default_rng(2)
        _, dense = random_sparse_sym(30, rng, density=1.0)
        op = LinearOperator(30, lambda v: dense @ v)  # no norm bound
        p = smallest_eigenpairs(op, 2, seed=0)
        np.testing.assert_allclose(p.values, np.linalg.eigvalsh(dense)[:2],
                                   atol=1e-8)

    def test_deterministic_under_seed(self):
        M, _ = random_sparse_sym(25, np.random.default_rng(3))
        a = smallest_eigenpairs(M, 3, seed=11)
        b = smallest_eigenpairs(M, 3, seed=11)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.vectors, b.vectors)


class TestSpectralNorm:
    def test_diagonal(self):
        D = SparseSymMatrix.from_entries(3, range(3), range(3), [1, -3, 2])
        assert spectral_norm(D) == pytest.approx(3.0, rel=1e-8)

    def test_zero(self):
        Z = SparseSymMatrix.from_entries(4, [], [], [])
        assert spectral_norm(Z) == 0.0

    def test_c4(self):
        oracle = np.abs(np.linalg.eigvalsh(c4_laplacian().to_dense())).max()
        assert spectral_norm(c4_laplacian()) == pytest.approx(oracle, rel=1e-8)
        assert spectral_norm(c4_laplacian()) == pytest.approx(4.0, rel=1e-8)

    def test_random_vs_oracle(self):
        rng = np.random.default_rng(4)
        for trial in range(10):
            _, dense = random_sparse_sym(20, rng, density=0.5)
            est = spectral_norm(SparseSymMatrix.from_dense(dense), seed=trial)
            oracle = np.abs(np.linalg.eigvalsh(dense)).max()
            assert est == pytest.approx(oracle, rel=1e-7)


class TestSvdSmall:
    def test_identity(self):
        U, s, V = svd_small(np.eye(3))
        np.testing.assert_allclose(s, np.ones(3))

    def test_scaled_rotation(self):
        th = 0.37
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        _, s, _ = svd_small(2.0 * R)
        np.testing.assert_allclose(s, [2.0, 2.0], rtol=1e-14)

    def test_hand_example(self):
        X = np.array([[0.0, -2.0], [1.0, 0.0]])
        U, s, V = svd_small(X)
        np.testing.assert_allclose(s, [2.0, 1.0], rtol=1e-14)
        np.testing.assert_allclose(U @ np.diag(s) @ V.T, X, atol=1e-14)

    def test_reconstruction_property(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            d = int(rng.integers(2, 4))
            X = rng.standard_normal((d, d))
            U, s, V = svd_small(X)
            err = np.linalg.norm(U @ np.diag(s) @ V.T - X)
            assert err <= 1e-12 * max(np.linalg.norm(X), 1e-30)
            assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


class TestLaplacianPinv:
    def test_two_node(self):
        L = SparseSymMatrix.from_entries(2, [0, 0, 1], [0, 1, 1], [1, -1, 1])
        np.testing.assert_allclose(
            laplacian_pinv_apply(L, np.array([1.0, -1.0])), [0.5, -0.5],
            atol=1e-12)

    def test_ones_in_kernel(self):
        L = SparseSymMatrix.from_entries(2, [0, 0, 1], [0, 1, 1], [1, -1, 1])
        np.testing.assert_allclose(laplacian_pinv_apply(L, np.ones(2)),
                                   np.zeros(2), atol=1e-14)

    def test_k3(self):
        y = np.array([2.0, -1.0, -1.0])
        np.testing.assert_allclose(laplacian_pinv_apply(k3_laplacian(), y),
                                   y / 3.0, atol=1e-12)

    def test_disconnected(self):
        L = SparseSymMatrix.from_entries(
            4, [0, 0, 1, 2, 2, 3], [0, 1, 1, 2, 3, 3],
            [1.0, -1.0, 1.0, 1.0, -1.0, 1.0])
        with pytest.raises(DisconnectedGraph):
            AnchoredLaplacianSolver(L)

    def test_penrose_and_orthogonality(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            n = int(rng.integers(3, 15))
            # random connected weighted Laplacian
            W = np.zeros((n, n))
            order = rng.permutation(n)
            for k in range(1, n):
                a, b = order[rng.integers(0, k)], order[k]
                W[a, b] = W[b, a] = rng.uniform(0.5, 3.0)
            extra = rng.integers(0, n)
            for _ in range(extra):
                a, b = rng.integers(0, n, 2)
                if a != b:
                    W[a, b] = W[b, a] = rng.uniform(0.5, 3.0)
            Ld = np.diag(W.sum(axis=1)) - W
            L = SparseSymMatrix.from_dense(Ld)
            solver = AnchoredLaplacianSolver(L)
            y = rng.standard_normal(n)
            x = solver.pinv_apply(y)
            assert abs(np.sum(x)) <= 1e-10 * max(np.linalg.norm(x), 1)
            # defining property: L x reproduces the centered right-hand side
            resid = Ld @ x - (y - np.mean(y))
            assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(y)
            # Penrose identity applied to a random vector
            z = rng.standard_normal(n)
            lhs = Ld @ solver.pinv_apply(Ld @ z)
            assert np.linalg.norm(lhs - Ld @ z) <= 1e-8 * np.linalg.norm(Ld @ z)

    def test_matrix_rhs(self):
        L = k3_laplacian()
        Y = np.array([[2.0, 0.0], [-1.0, 3.0], [-1.0, -3.0]])
        X = AnchoredLaplacianSolver(L).pinv_apply(Y)
        assert X.shape == (3, 2)
        np.testing.assert_allclose(X[:, 0], Y[:, 0] / 3.0, atol=1e-12)


class TestLinearOperatorContract:
    def test_symmetry_and_linearity(self):
        rng = np.random.default_rng(8)
        _, dense = random_sparse_sym(15, rng, density=0.6)
        op = LinearOperator(15, lambda v: dense @ v)
        for _ in range(20):
            v, w = rng.standard_normal((2, 15))
            a, b = rng.standard_normal(2)
            sym = abs(op.matvec(v) @ w - v @ op.matvec(w))
            assert sym <= 1e-10 * np.linalg.norm(v) * np.linalg.norm(w)
            lin = op.matvec(a * v + b * w) - a * op.matvec(v) - b * op.matvec(w)
            assert np.linalg.norm(lin) <= 1e-10 * (abs(a) + abs(b)) * 20
