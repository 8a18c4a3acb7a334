"""Sparse symmetric linear algebra kernels.

Everything here targets desk scale (up to ~1e5 unknowns): a seeded Lanczos
solver with full reorthogonalization for the smallest eigenpairs of a
symmetric operator, spectral-norm estimation, small dense SVD, and anchored
solves against graph Laplacians implementing the action of the Moore-Penrose
pseudoinverse.

Matvecs of the immutable matrix/operator types are safe to call from multiple
threads; a single eigensolve is sequential and must not be shared
mid-iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import DimensionError, DisconnectedGraph, NoConvergence

__all__ = [
    "SparseSymMatrix",
    "LinearOperator",
    "EigenPairs",
    "as_operator",
    "operator_sum",
    "operator_diff",
    "smallest_eigenpairs",
    "spectral_norm",
    "svd_small",
    "AnchoredSolver",
    "AnchoredLaplacianSolver",
    "laplacian_pinv_apply",
]

_EPS = float(np.finfo(float).eps)
_TINY = float(np.finfo(float).tiny)


@dataclass(frozen=True)
class SparseSymMatrix:
    """Symmetric matrix stored as a single (upper) triangle in COO form.

    The stored triangle defines both halves; `block_size` tags matrices with
    d x d block structure (dim must then be divisible by it).
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    block_size: int | None = None

    @classmethod
    def from_entries(cls, dim, rows, cols, vals, block_size=None) -> "SparseSymMatrix":
        """Build from coordinates of either triangle; duplicates are rejected."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (rows.size == cols.size == vals.size):
            raise DimensionError("rows, cols, vals must have equal length")
        if dim <= 0:
            raise DimensionError(f"dim must be positive, got {dim}")
        if block_size is not None and (block_size <= 0 or dim % block_size):
            raise DimensionError(f"dim {dim} not divisible by block size {block_size}")
        if rows.size and (rows.min() < 0 or cols.min() < 0
                          or rows.max() >= dim or cols.max() >= dim):
            raise DimensionError("coordinate out of range")
        swap = rows > cols
        r = np.where(swap, cols, rows)
        c = np.where(swap, rows, cols)
        key = r * dim + c
        order = np.argsort(key, kind="stable")
        key = key[order]
        if key.size > 1 and np.any(np.diff(key) == 0):
            raise DimensionError("duplicate (row, col) coordinates after assembly")
        return cls(int(dim), r[order], c[order], vals[order].copy(), block_size)

    @classmethod
    def from_dense(cls, A, block_size=None) -> "SparseSymMatrix":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError("expected a square matrix")
        r, c = np.nonzero(np.triu(A))
        return cls.from_entries(A.shape[0], r, c, A[r, c], block_size)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.vals, self.vals[off]])
        return sp.csr_matrix((v, (r, c)), shape=(self.dim, self.dim))

    def to_csr(self) -> sp.csr_matrix:
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self._csr @ v

    def gershgorin_interval(self) -> tuple[float, float]:
        """Enclosing interval for the spectrum from Gershgorin discs."""
        A = self._csr
        diag = A.diagonal()
        absrow = np.asarray(abs(A).sum(axis=1)).ravel()
        off = absrow - np.abs(diag)
        return float(np.min(diag - off)), float(np.max(diag + off))

    def norm_bound(self) -> float:
        lo, hi = self.gershgorin_interval()
        return max(abs(lo), abs(hi))


@dataclass(frozen=True)
class LinearOperator:
    """Symmetric operator given by its matvec.

    `norm_bound`, when set, is an upper bound on the spectral norm and lets
    eigensolvers pick a spectral shift without probing the operator.
    """

    dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    norm_bound: float | None = None


def as_operator(A) -> LinearOperator:
    """Coerce a SparseSymMatrix, dense array, or LinearOperator to an operator."""
    if isinstance(A, LinearOperator):
        return A
    if isinstance(A, SparseSymMatrix):
        return LinearOperator(A.dim, A.matvec, A.norm_bound())
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("expected a square matrix or operator")
    bound = float(np.abs(M).sum(axis=1).max()) if M.size else 0.0
    return LinearOperator(M.shape[0], lambda v: M @ v, bound)


def _combine_bounds(a: LinearOperator, b: LinearOperator) -> float | None:
    if a.norm_bound is None or b.norm_bound is None:
        return None
    return a.norm_bound + b.norm_bound


def operator_sum(a, b) -> LinearOperator:
    a, b = as_operator(a), as_operator(b)
    if a.dim != b.dim:
        raise DimensionError("operator dimensions differ")
    return LinearOperator(a.dim, lambda v: a.matvec(v) + b.matvec(v),
                          _combine_bounds(a, b))


def operator_diff(a, b) -> LinearOperator:
    a, b = as_operator(a), as_operator(b)
    if a.dim != b.dim:
        raise DimensionError("operator dimensions differ")
    return LinearOperator(a.dim, lambda v: a.matvec(v) - b.matvec(v),
                          _combine_bounds(a, b))


@dataclass(frozen=True)
class EigenPairs:
    """Eigenpairs sorted by ascending eigenvalue.

    vectors holds orthonormal columns; residual_norms are the exact
    ||A v - lambda v||_2 computed after convergence.
    """

    values: np.ndarray
    vectors: np.ndarray
    residual_norms: np.ndarray


class _LanczosState:
    """Workspace shared by the restarted Lanczos runs of one eigensolve."""

    def __init__(self, op: LinearOperator, rng: np.random.Generator,
                 budget: int, tol: float):
        self.op = op
        self.n = op.dim
        self.rng = rng
        self.budget = budget
        self.tol = tol
        self.total = 0
        self.best_resid = np.inf
        self.shift, self.scale = self._shift_and_scale()

    def _shift_and_scale(self) -> tuple[float, float]:
        if self.op.norm_bound is not None and np.isfinite(self.op.norm_bound):
            s = float(self.op.norm_bound)
            return s, max(s, _TINY)
        est = _norm_estimate(self.op, self.rng, steps=min(self.n, 20))
        return 1.25 * est + _TINY, max(est, _TINY)

    def bmatvec(self, v: np.ndarray) -> np.ndarray:
        self.total += 1
        return self.shift * v - self.op.matvec(v)

    def fresh_vector(self, basis: np.ndarray, ncols: int) -> np.ndarray | None:
        """Random unit vector orthogonal to the first ncols columns of basis."""
        for _ in range(4):
            v = self.rng.standard_normal(self.n)
            for _ in range(2):
                if ncols:
                    v -= basis[:, :ncols] @ (basis[:, :ncols].T @ v)
            nv = np.linalg.norm(v)
            if nv > 1e-8 * np.sqrt(self.n):
                return v / nv
        return None


def _norm_estimate(op: LinearOperator, rng: np.random.Generator, steps: int) -> float:
    """Cheap Lanczos estimate of ||A||_2 used only to pick a spectral shift."""
    n = op.dim
    v = rng.standard_normal(n)
    v /= max(np.linalg.norm(v), _TINY)
    V = np.zeros((n, steps))
    alphas, betas = [], []
    est = 0.0
    for m in range(steps):
        V[:, m] = v
        w = op.matvec(v)
        a = float(v @ w)
        w -= V[:, : m + 1] @ (V[:, : m + 1].T @ w)
        w -= V[:, : m + 1] @ (V[:, : m + 1].T @ w)
        b = float(np.linalg.norm(w))
        alphas.append(a)
        betas.append(b)
        theta = eigh_tridiagonal(np.array(alphas), np.array(betas[:-1]),
                                 eigvals_only=True)
        est = max(est, float(np.max(np.abs(theta))))
        if b <= 1e-8 * max(est, _TINY):
            break
        v = w / b
    return est


def _run_lanczos(state: _LanczosState, basis: np.ndarray, locked: int,
                 want: int, run_cap: int) -> tuple[list, int]:
    """One deflated Lanczos run against the shifted operator.

    Appends Lanczos vectors into basis starting at column `locked` and tries
    to converge the `want` largest Ritz pairs of the shifted operator (the
    smallest of A). Returns (converged Ritz list as (theta, coeff-vector),
    krylov dimension m). Convergence threshold is tightened below the user
    tolerance so that exact residuals pass it after assembly.
    """
    v = state.fresh_vector(basis, locked)
    if v is None:
        return [], 0
    lock_tol = 0.2 * state.tol * state.scale
    bshift = max(abs(state.shift), state.scale)
    breakdown_tol = 100 * _EPS * bshift
    alphas: list[float] = []
    betas: list[float] = []
    m = 0
    theta = s_last = None
    while m < run_cap and state.total < state.budget:
        basis[:, locked + m] = v
        w = state.bmatvec(v)
        a = float(v @ w)
        ncols = locked + m + 1
        w -= basis[:, :ncols] @ (basis[:, :ncols].T @ w)
        w -= basis[:, :ncols] @ (basis[:, :ncols].T @ w)
        b = float(np.linalg.norm(w))
        alphas.append(a)
        betas.append(b)
        m += 1
        k_top = min(want, m)
        theta, svec = eigh_tridiagonal(
            np.array(alphas), np.array(betas[:-1]),
            select="i", select_range=(m - k_top, m - 1))
        s_last = svec
        resid = b * np.abs(svec[-1, :])
        state.best_resid = min(state.best_resid, float(np.min(resid)))
        # converged prefix, counted from the largest Ritz value down
        conv = 0
        for j in range(k_top - 1, -1, -1):
            if resid[j] <= lock_tol:
                conv += 1
            else:
                break
        if conv >= want:
            break
        if b <= breakdown_tol:
            break
        v = w / b
    if m == 0 or theta is None:
        return [], 0
    b_final = betas[-1]
    resid = b_final * np.abs(s_last[-1, :])
    exact_subspace = b_final <= breakdown_tol or m >= state.n - locked
    out = []
    for j in range(s_last.shape[1] - 1, -1, -1):
        if resid[j] <= lock_tol or exact_subspace:
            out.append((float(theta[j]), s_last[:, j].copy()))
        else:
            break
    return out, m


def smallest_eigenpairs(A, k: int, tol: float = 1e-8,
                        max_iter: int | None = None, seed: int = 0) -> EigenPairs:
    """k smallest eigenpairs of a symmetric matrix or operator.

    Runs Lanczos with full reorthogonalization on the shifted operator
    sigma*I - A (sigma an upper bound on the spectrum, Gershgorin when
    available), restarting with deflation on breakdown. After k candidates
    converge, extra deflated verification runs probe for eigenvalues missed
    inside degenerate clusters; for a degenerate cluster any orthonormal
    basis of the invariant subspace may come back.

    The starting vectors derive deterministically from `seed`.
    """
    op = as_operator(A)
    n = op.dim
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DimensionError(f"k must be a positive integer, got {k}")
    if k >= n:
        raise DimensionError(f"k={k} must be smaller than dim={n}")
    budget = max_iter if max_iter is not None else max(1000, 4 * n)
    rng = np.random.default_rng(seed)
    state = _LanczosState(op, rng, budget, tol)

    run_cap_base = 450
    cap_cols = min(n, max(2 * k + 16, 64) + run_cap_base)
    basis = np.zeros((n, cap_cols))
    locked_vals: list[float] = []
    locked = 0  # columns of basis holding locked eigenvectors

    def ensure_room(extra: int):
        nonlocal basis, cap_cols
        if locked + extra > cap_cols:
            grow = np.zeros((n, locked + extra + 64))
            grow[:, :locked] = basis[:, :locked]
            basis = grow
            cap_cols = basis.shape[1]

    def lock(ritz: list, m: int) -> None:
        nonlocal locked
        vecs = basis[:, locked:locked + m].copy()
        cols = np.column_stack([vecs @ s for (_, s) in ritz])
        basis[:, locked:locked + cols.shape[1]] = cols
        for (theta, _) in ritz:
            locked_vals.append(state.shift - theta)
        locked += cols.shape[1]

    verified = False
    while locked < n:
        run_cap = min(n - locked, run_cap_base, max(state.budget - state.total, 0))
        if run_cap <= 0:
            break
        ensure_room(run_cap)
        if locked < k:
            ritz, m = _run_lanczos(state, basis, locked, k - locked, run_cap)
            if not ritz:
                break
            lock(ritz, m)
            continue
        # verification run: the smallest eigenvalue outside the locked space
        # must not lie below the current k-th answer, else a degenerate
        # cluster was only partially discovered
        vritz, vm = _run_lanczos(state, basis, locked, 1, run_cap)
        if not vritz:
            break
        theta, s = vritz[0]
        lam_new = state.shift - theta
        kth = float(np.sort(locked_vals)[k - 1])
        slack = max(4 * tol * state.scale, 64 * _EPS * state.scale)
        if lam_new < kth - slack:
            vecs = basis[:, locked:locked + vm].copy()
            basis[:, locked] = vecs @ s
            locked_vals.append(lam_new)
            locked += 1
            continue
        verified = True
        break

    if locked < k or not (verified or locked >= n):
        raise NoConvergence(state.total, state.best_resid)

    order = np.argsort(np.asarray(locked_vals), kind="stable")[:k]
    values = np.asarray(locked_vals)[order]
    vectors = basis[:, :locked][:, order].copy()
    residuals = np.empty(k)
    for j in range(k):
        r = op.matvec(vectors[:, j]) - values[j] * vectors[:, j]
        residuals[j] = np.linalg.norm(r)
    if float(np.max(residuals)) > tol * state.scale:
        raise NoConvergence(state.total, float(np.max(residuals)))
    return EigenPairs(values=values, vectors=vectors, residual_norms=residuals)


def spectral_norm(A, tol: float = 1e-8, max_iter: int | None = None,
                  seed: int = 0) -> float:
    """||A||_2 of a symmetric matrix or operator via Lanczos.

    Tracks both extreme Ritz values of the tridiagonal reduction and stops
    once the residual of the dominant one is below tol relative to the
    current estimate. The zero operator is detected by probing a few random
    vectors.
    """
    op = as_operator(A)
    n = op.dim
    if n == 0:
        return 0.0
    budget = max_iter if max_iter is not None else max(500, 3 * n)
    rng = np.random.default_rng(seed)
    v = None
    for _ in range(3):
        cand = rng.standard_normal(n)
        nv = np.linalg.norm(cand)
        if nv == 0:
            continue
        cand /= nv
        if np.linalg.norm(op.matvec(cand)) > 0:
            v = cand
            break
    else:
        return 0.0

    cap = min(n, budget)
    V = np.zeros((n, cap))
    alphas: list[float] = []
    betas: list[float] = []
    est = 0.0
    resid = np.inf
    for m in range(cap):
        V[:, m] = v
        w = op.matvec(v)
        a = float(v @ w)
        w -= V[:, : m + 1] @ (V[:, : m + 1].T @ w)
        w -= V[:, : m + 1] @ (V[:, : m + 1].T @ w)
        b = float(np.linalg.norm(w))
        alphas.append(a)
        betas.append(b)
        theta, svec = eigh_tridiagonal(np.array(alphas), np.array(betas[:-1]))
        j_ext = int(np.argmax(np.abs(theta)))
        est = float(np.abs(theta[j_ext]))
        resid = b * abs(svec[-1, j_ext])
        if resid <= tol * max(est, _TINY):
            return est
        if b <= 100 * _EPS * max(est, _TINY):
            # invariant subspace reached; extreme value is exact within it
            return est
        v = w / b
    if m + 1 >= n:
        return est
    raise NoConvergence(m + 1, float(resid))


def svd_small(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD of a small dense matrix, returned as (U, s, V) with X = U diag(s) V^T."""
    U, s, Vh = np.linalg.svd(np.asarray(X, dtype=float))
    return U, s, Vh.T


class AnchoredSolver:
    """Sparse factorization of a symmetric matrix with leading rows/cols removed.

    Deleting the first `drop` rows and columns anchors the gauge freedom of
    the Laplacian-type systems used throughout; the factorization is computed
    once and reused (read-only, safe for concurrent solves).
    """

    def __init__(self, M, drop: int = 1):
        csr = M.to_csr() if isinstance(M, SparseSymMatrix) else sp.csr_matrix(M)
        if csr.shape[0] != csr.shape[1]:
            raise DimensionError("expected a square matrix")
        self.dim = csr.shape[0]
        self.drop = drop
        reduced = csr[drop:, drop:].tocsc()
        if reduced.shape[0] == 0:
            self._lu = None
            return
        try:
            self._lu = splu(reduced)
        except RuntimeError as exc:
            raise DisconnectedGraph("anchored system is singular") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self._lu is None:
            return np.zeros_like(rhs)
        out = self._lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise DisconnectedGraph("anchored solve produced non-finite values")
        return out


class AnchoredLaplacianSolver:
    """Action of the Moore-Penrose pseudoinverse of a connected graph Laplacian.

    L^+ y is computed by projecting y onto the complement of the all-ones
    vector, solving the anchored SPD system with the first row and column
    deleted, and re-centering the solution to be orthogonal to the all-ones
    vector. Construction verifies connectivity of the support graph.
    """

    def __init__(self, L):
        csr = L.to_csr() if isinstance(L, SparseSymMatrix) else sp.csr_matrix(L)
        if csr.shape[0] != csr.shape[1]:
            raise DimensionError("expected a square Laplacian")
        self.dim = csr.shape[0]
        coo = csr.tocoo()
        off = (coo.row != coo.col) & (coo.data != 0)
        adj = sp.csr_matrix(
            (np.ones(int(off.sum())), (coo.row[off], coo.col[off])),
            shape=csr.shape)
        ncomp = connected_components(adj, directed=False, return_labels=False)
        if self.dim > 0 and ncomp > 1:
            raise DisconnectedGraph(f"support graph has {ncomp} components")
        self._solver = AnchoredSolver(csr, drop=1) if self.dim > 1 else None

    def pinv_apply(self, y: np.ndarray) -> np.ndarray:
        """L^+ y for a vector or a matrix of column right-hand sides."""
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.dim:
            raise DimensionError("right-hand side has wrong length")
        if self.dim <= 1:
            return np.zeros_like(y)
        yc = y - np.mean(y, axis=0)
        x = np.zeros_like(yc)
        x[1:] = self._solver.solve(yc[1:])
        return x - np.mean(x, axis=0)


def laplacian_pinv_apply(L, y: np.ndarray) -> np.ndarray:
    """One-shot L^+ y. Build an AnchoredLaplacianSolver for repeated applies."""
    return AnchoredLaplacianSolver(L).pinv_apply(y)
