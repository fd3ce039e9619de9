"""
Sparse linear algebra adapter.

Wraps SuperLU factorizations and ARPACK shift-invert iterations for the
generalized problems K x = lambda M x (real symmetric or complex Hermitian K,
Hermitian positive definite M). Small problems go to dense LAPACK.
"""

import time
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from src.core.config import get_settings
from src.core.exceptions import ConfigError, ConvergenceError, FactorizationError
from src.core.logging import get_logger, log_solver_call

logger = get_logger(__name__)

Method = Literal["auto", "sparse", "dense"]


@dataclass(frozen=True, eq=False)
class EigResult:
    """Eigenpairs in ascending order; eigenvectors are M-orthonormal columns."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray
    residuals: NDArray[np.float64]
    iterations: int
    method: str
    shift: float

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)


def finalize(A) -> sp.csr_matrix:
    """CSR with summed duplicates, sorted column indices and no explicit zeros."""
    mat = sp.csr_matrix(A)
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def is_hermitian(A, tol: float = 1e-14, samples: int = 200, seed: int = 0) -> bool:
    """Check A == A^H on a deterministic sample of stored entries."""
    mat = sp.coo_matrix(A)
    if mat.nnz == 0:
        return True
    rng = np.random.default_rng(seed)
    pick = rng.choice(mat.nnz, size=min(samples, mat.nnz), replace=False)
    csr = mat.tocsr()
    scale = max(1.0, float(np.abs(mat.data).max()))
    for t in pick:
        i, j = mat.row[t], mat.col[t]
        if abs(csr[i, j] - np.conj(csr[j, i])) > tol * scale:
            return False
    return True


class Factorization:
    """Sparse LU factorization of a square matrix; read-only after construction."""

    def __init__(self, A):
        mat = sp.csc_matrix(A)
        if mat.shape[0] != mat.shape[1]:
            raise ConfigError(f"factorize needs a square matrix, got {mat.shape}")
        self.shape = mat.shape
        self.dtype = mat.dtype
        try:
            self._lu = splu(mat)
        except RuntimeError as e:
            raise FactorizationError(f"sparse LU failed: {e}")

    def solve(self, b: NDArray) -> NDArray:
        b = np.asarray(b)
        if np.iscomplexobj(b) and not np.iscomplexobj(np.empty(0, dtype=self.dtype)):
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(
                np.ascontiguousarray(b.imag)
            )
        return self._lu.solve(np.ascontiguousarray(b, dtype=np.result_type(b, self.dtype)))


def factorize(A) -> Factorization:
    return Factorization(A)


def solve(F: Factorization, b: NDArray) -> NDArray:
    return F.solve(b)


def _residuals(K, M, values: NDArray, vectors: NDArray) -> NDArray[np.float64]:
    KX = K @ vectors
    R = KX - (M @ vectors) * values[None, :]
    norms = np.linalg.norm(KX, axis=0)
    norms[norms == 0.0] = 1.0
    return np.linalg.norm(R, axis=0) / norms


def _rayleigh_ritz(K, M, X: NDArray) -> tuple[NDArray, NDArray]:
    """Project onto span(X) and re-solve; returns M-orthonormal Ritz pairs."""
    Kr = X.conj().T @ (K @ X)
    Mr = X.conj().T @ (M @ X)
    Kr = 0.5 * (Kr + Kr.conj().T)
    Mr = 0.5 * (Mr + Mr.conj().T)
    values, W = sla.eigh(Kr, Mr)
    return values, X @ W


def dense_gevp(K, M, k: int) -> tuple[NDArray, NDArray]:
    """k smallest eigenpairs by dense LAPACK (reference and fallback path)."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M)
    return sla.eigh(Kd, Md, subset_by_index=[0, k - 1])


def solve_gevp_smallest(
    K,
    M,
    k: int,
    tol: float = 1e-10,
    shift: float = 0.0,
    method: Method = "auto",
    max_iter: int | None = None,
    kind: str = "gevp",
) -> EigResult:
    """
    k smallest eigenpairs of K x = lambda M x.

    The sparse path runs ARPACK in shift-invert mode around `shift` with a
    SuperLU factorization of K - shift*M, then a Rayleigh-Ritz step on the
    converged basis. `shift` must lie below the wanted eigenvalues for the
    k nearest to be the k smallest. Problems of dimension <= dense_max_dim
    (or with k >= n - 1) use dense LAPACK.
    """
    settings = get_settings()
    n = K.shape[0]
    if k < 1 or k > n:
        raise ConfigError(f"requested k={k} eigenpairs of a {n}x{n} problem")

    use_dense = method == "dense" or k >= n - 1 or (
        method == "auto" and n <= settings.dense_max_dim
    )
    started = time.perf_counter()
    iterations = 0

    if use_dense:
        values, vectors = dense_gevp(K, M, k)
        used = "dense"
    else:
        K = sp.csr_matrix(K)
        M = sp.csr_matrix(M)
        complex_problem = np.iscomplexobj(K.data) or np.iscomplexobj(M.data)
        dtype = np.complex128 if complex_problem else np.float64

        F = factorize((K - shift * M).astype(dtype))
        op_inv = LinearOperator((n, n), matvec=F.solve, dtype=dtype)

        rng = np.random.default_rng(settings.random_seed)
        v0 = rng.standard_normal(n)
        if complex_problem:
            v0 = v0 + 1j * rng.standard_normal(n)

        ncv = min(n, max(2 * k + 1, 20))
        try:
            _, X = eigsh(
                K.astype(dtype),
                k=k,
                M=M.astype(dtype),
                sigma=shift,
                which="LM",
                OPinv=op_inv,
                v0=v0,
                ncv=ncv,
                tol=tol,
                maxiter=max_iter,
            )
        except ArpackNoConvergence as e:
            raise ConvergenceError(
                f"ARPACK converged {len(e.eigenvalues)} of {k} eigenpairs"
            )
        values, vectors = _rayleigh_ritz(K, M, X)
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        used = "sparse"
        iterations = ncv

    values = np.asarray(values, dtype=np.float64)
    residuals = _residuals(K, M, values, vectors)
    duration_ms = (time.perf_counter() - started) * 1000.0
    log_solver_call(
        kind,
        n,
        k,
        duration_ms,
        used,
        shift=shift,
        max_residual=float(residuals.max()),
    )
    if residuals.max() > max(tol, 1e-8):
        logger.warning(
            "residual_above_tolerance",
            kind=kind,
            max_residual=float(residuals.max()),
            tol=tol,
        )

    return EigResult(
        eigenvalues=values,
        eigenvectors=vectors,
        residuals=residuals,
        iterations=iterations,
        method=used,
        shift=float(shift),
    )
