"""
Unit tests for the sparse linear algebra adapter.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from src.core.exceptions import ConfigError, FactorizationError
from src.infra.linalg import factorize, finalize, is_hermitian, solve, solve_gevp_smallest


def laplacian_1d(n: int) -> sp.csr_matrix:
    """tridiag(-1, 2, -1) of size n."""
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def exact_laplacian(n: int, k: int) -> np.ndarray:
    j = np.arange(1, k + 1)
    return 2.0 - 2.0 * np.cos(j * np.pi / (n + 1))


class TestFactorization:
    """Tests for factorize/solve."""

    def test_solve(self):
        A = laplacian_1d(30)
        b = np.arange(30, dtype=float)
        x = solve(factorize(A), b)
        np.testing.assert_allclose(A @ x, b, atol=1e-10)

    def test_complex_rhs_on_real_matrix(self):
        A = laplacian_1d(10)
        b = np.ones(10) + 1j * np.arange(10)
        x = factorize(A).solve(b)
        np.testing.assert_allclose(A @ x, b, atol=1e-10)

    def test_singular_raises(self):
        """Test an exactly singular matrix raises FactorizationError."""
        A = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(FactorizationError):
            factorize(A)

    def test_non_square_raises(self):
        with pytest.raises(ConfigError):
            factorize(sp.csr_matrix(np.ones((2, 3))))


class TestMatrixHelpers:
    """Tests for finalize and is_hermitian."""

    def test_finalize_drops_zeros(self):
        A = sp.coo_matrix(([1.0, 0.0, 2.0, -2.0], ([0, 1, 0, 0], [0, 1, 1, 1])), shape=(2, 2))
        out = finalize(A)
        assert out.nnz == 1
        assert out.has_sorted_indices

    def test_is_hermitian(self):
        rng = np.random.default_rng(1)
        B = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        assert is_hermitian(sp.csr_matrix(B + B.conj().T))
        assert not is_hermitian(sp.csr_matrix(B))


class TestGevp:
    """Tests for solve_gevp_smallest."""

    @pytest.mark.parametrize("method", ["dense", "sparse"])
    def test_tridiagonal_exact(self, method):
        """Test both paths reproduce 2 - 2cos(j pi/(n+1))."""
        n, k = 200, 5
        res = solve_gevp_smallest(laplacian_1d(n), sp.identity(n, format="csr"), k, method=method)
        assert res.method == method
        np.testing.assert_allclose(res.eigenvalues, exact_laplacian(n, k), rtol=1e-9)
        assert res.residuals.max() < 1e-8

    def test_ascending_and_m_orthonormal(self):
        n = 120
        K = laplacian_1d(n)
        M = sp.diags(np.linspace(1.0, 2.0, n), format="csr")
        res = solve_gevp_smallest(K, M, 4, method="sparse")
        assert np.all(np.diff(res.eigenvalues) > 0)
        X = res.eigenvectors
        np.testing.assert_allclose(X.T @ (M @ X), np.eye(4), atol=1e-10)

    def test_sparse_matches_dense_with_shift(self):
        n = 150
        K = laplacian_1d(n) + sp.identity(n) * 3.0
        M = sp.identity(n, format="csr")
        dense = solve_gevp_smallest(K, M, 3, method="dense")
        sparse = solve_gevp_smallest(K, M, 3, shift=2.5, method="sparse")
        np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, rtol=1e-10)
        assert sparse.shift == 2.5

    def test_auto_uses_dense_for_small_problems(self):
        res = solve_gevp_smallest(laplacian_1d(20), sp.identity(20), 2)
        assert res.method == "dense"
        assert res.k == 2

    @pytest.mark.parametrize("k", [0, 11])
    def test_bad_k(self, k):
        with pytest.raises(ConfigError):
            solve_gevp_smallest(laplacian_1d(10), sp.identity(10), k)
