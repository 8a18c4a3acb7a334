"""Assembly of the synchronization data matrices.

The rotation connection Laplacian is built sparsely; the translational data
matrix (a dense generalized Schur complement in general) is never
materialized and is applied as three sparse products plus one anchored solve
per matvec, with the factorization cached at assembly time. The assembled
set is immutable and thread-shareable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DisconnectedGraph, ModeError, TopologyMismatch
from .linalg import (AnchoredLaplacianSolver, LinearOperator, SparseSymMatrix,
                     as_operator, operator_diff, operator_sum, spectral_norm)
from .posegraph import FULL_POSE, ROTATION_ONLY, PoseGraph, check_connected, \
    weight_laplacians

__all__ = [
    "DataMatrixSet",
    "rotation_connection_laplacian",
    "translational_data_operator",
    "assemble",
    "perturbation_spectral_norm",
    "export_matrixmarket",
]


@dataclass(frozen=True)
class DataMatrixSet:
    """The operators defining one synchronization problem instance.

    Q is the full quadratic-form operator: the rotation connection Laplacian
    alone in rotation-only mode, or its sum with the translational operator
    in full mode.
    """

    d: int
    n: int
    L_rho_conn: SparseSymMatrix
    Q_tau: LinearOperator | None
    Q: LinearOperator

    @property
    def dim(self) -> int:
        return self.d * self.n


def rotation_connection_laplacian(G: PoseGraph) -> SparseSymMatrix:
    """Block Laplacian with measured rotations on the off-diagonal blocks.

    Diagonal block i is (sum of incident kappas) * I_d; the block at (i, j)
    for a measured edge is -kappa_ij * R_ij (transposed on the mirror side).
    """
    d, n = G.d, G.n
    deg = np.zeros(n)
    for e in G.edges:
        deg[e.i] += e.kappa
        deg[e.j] += e.kappa

    nnz = d * n + d * d * len(G.edges)
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    rows[: d * n] = np.arange(d * n)
    cols[: d * n] = np.arange(d * n)
    vals[: d * n] = np.repeat(deg, d)

    pos = d * n
    rr, cc = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    rr, cc = rr.ravel(), cc.ravel()
    for e in G.edges:
        if e.i < e.j:
            u, v, B = e.i, e.j, -e.kappa * e.R_meas
        else:
            u, v, B = e.j, e.i, -e.kappa * e.R_meas.T
        rows[pos:pos + d * d] = u * d + rr
        cols[pos:pos + d * d] = v * d + cc
        vals[pos:pos + d * d] = B.ravel()
        pos += d * d
    return SparseSymMatrix.from_entries(d * n, rows, cols, vals, block_size=d)


def translational_data_operator(G: PoseGraph) -> LinearOperator:
    """Implicit operator for the translational part of the full problem.

    Applies v -> Omega v - V^T L(W_tau)^+ (V v) where Omega collects the
    weighted outer products of the translation measurements on edges leaving
    each node and V couples them across edges. The anchored factorization of
    the translational weight Laplacian is computed once and cached in the
    returned closure.
    """
    if not G.is_full:
        raise ModeError("translational operator requires a full-pose graph")
    if not check_connected(G):
        raise DisconnectedGraph("graph is not connected")
    d, n = G.d, G.n

    omega = np.zeros((n, d, d))
    v_rows: list[int] = []
    v_cols: list[int] = []
    v_vals: list[float] = []
    for e in G.edges:
        t = np.asarray(e.t_meas, dtype=float)
        omega[e.i] += e.tau * np.outer(t, t)
        cols = range(e.i * d, e.i * d + d)
        # row i carries +tau t^T in block column i, row j carries -tau t^T
        for c, tc in zip(cols, t):
            v_rows.append(e.i)
            v_cols.append(c)
            v_vals.append(e.tau * tc)
            v_rows.append(e.j)
            v_cols.append(c)
            v_vals.append(-e.tau * tc)
    V = sp.csr_matrix((v_vals, (v_rows, v_cols)), shape=(n, d * n))

    _, L_tau = weight_laplacians(G)
    solver = AnchoredLaplacianSolver(L_tau)

    def matvec(x: np.ndarray) -> np.ndarray:
        blocks = x.reshape(n, d)
        out = np.einsum("nij,nj->ni", omega, blocks).ravel()
        u = V @ x
        return out - V.T @ solver.pinv_apply(u)

    # Omega bounds the operator from above (both terms are PSD), and each
    # PSD block's norm is at most its trace
    bound = float(np.trace(omega, axis1=1, axis2=2).max()) if n else 0.0
    return LinearOperator(d * n, matvec, bound)


def assemble(G: PoseGraph, mode: str | None = None) -> DataMatrixSet:
    """Build the data matrices for a connected graph in the requested mode."""
    mode = mode if mode is not None else G.mode
    if mode not in (ROTATION_ONLY, FULL_POSE):
        raise ModeError(f"unknown mode {mode!r}")
    if mode == FULL_POSE and not G.is_full:
        raise ModeError("full mode requires translation measurements")
    if not check_connected(G):
        raise DisconnectedGraph("graph is not connected")
    L = rotation_connection_laplacian(G)
    if mode == ROTATION_ONLY:
        return DataMatrixSet(G.d, G.n, L, None, as_operator(L))
    Q_tau = translational_data_operator(G)
    return DataMatrixSet(G.d, G.n, L, Q_tau, operator_sum(L, Q_tau))


def _check_same_topology(A: PoseGraph, B: PoseGraph) -> None:
    if A.d != B.d or A.n != B.n or A.mode != B.mode:
        raise TopologyMismatch("graphs differ in dimensions or mode")
    ea = sorted(A.edges, key=lambda e: (e.i, e.j))
    eb = sorted(B.edges, key=lambda e: (e.i, e.j))
    if len(ea) != len(eb):
        raise TopologyMismatch("graphs have different edge counts")
    for x, y in zip(ea, eb):
        if (x.i, x.j) != (y.i, y.j):
            raise TopologyMismatch(f"edge sets differ at ({x.i},{x.j})")
        if x.kappa != y.kappa or (x.tau or 0.0) != (y.tau or 0.0):
            raise TopologyMismatch(f"precisions differ on edge ({x.i},{x.j})")


def perturbation_spectral_norm(G_noisy: PoseGraph, G_true: PoseGraph,
                               tol: float = 1e-8, seed: int = 0) -> float:
    """Spectral norm of the difference of the two graphs' data matrices.

    The graphs must share topology, dimensions, and precisions; only the
    measurements may differ. The difference is applied implicitly.
    """
    _check_same_topology(G_noisy, G_true)
    Qn = assemble(G_noisy).Q
    Qt = assemble(G_true).Q
    return spectral_norm(operator_diff(Qn, Qt), tol=tol, seed=seed)


def export_matrixmarket(M: SparseSymMatrix, path) -> None:
    """Debug export in MatrixMarket coordinate format."""
    from scipy.io import mmwrite
    mmwrite(path, M.to_csr().tocoo())
