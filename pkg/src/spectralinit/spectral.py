"""The initializers: spectral relaxation with SO(d) rounding, the chordal
linear comparator, odometry composition, and translation recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamatrix import DataMatrixSet, assemble, rotation_connection_laplacian
from .errors import ArgumentError, DisconnectedGraph, ModeError
from .linalg import AnchoredSolver, smallest_eigenpairs, svd_small
from .posegraph import (FULL_POSE, ROTATION_ONLY, PoseGraph, PoseSet,
                        RotationSet, check_connected, weight_laplacians)

__all__ = [
    "RelaxationSolution",
    "solve_relaxation",
    "project_to_SOd",
    "round_to_rotations",
    "spectral_initialize",
    "chordal_initialize",
    "recover_translations",
    "odometry_initialize",
]


@dataclass(frozen=True)
class RelaxationSolution:
    """Minimizer of the relaxed problem plus its spectral data.

    Y_star rows are sqrt(n)-scaled orthonormal eigenvectors for the d
    smallest eigenvalues of Q, so Y_star @ Y_star.T = n I_d. p_star_S is the
    optimal value n * sum(eigenvalues). lambda_next and eigengap report the
    (d+1)-th eigenvalue and the realized gap, which callers should inspect
    when the gap is close to collapsing.
    """

    d: int
    n: int
    Y_star: np.ndarray
    eigenvalues: np.ndarray
    p_star_S: float
    residuals: np.ndarray
    lambda_next: float
    eigengap: float


def solve_relaxation(M: DataMatrixSet, seed: int = 0, tol: float = 1e-8,
                     max_iter: int | None = None) -> RelaxationSolution:
    """Global minimizer of the orthogonal-rows relaxation.

    The rows of the optimum are eigenvectors of Q for its d smallest
    eigenvalues, scaled by sqrt(n). One extra eigenvalue is computed to
    report the realized eigengap.
    """
    d, n = M.d, M.n
    pairs = smallest_eigenpairs(M.Q, d + 1, tol=tol, max_iter=max_iter, seed=seed)
    lam = pairs.values
    Y = np.sqrt(n) * pairs.vectors[:, :d].T
    return RelaxationSolution(
        d=d, n=n, Y_star=Y,
        eigenvalues=lam[:d].copy(),
        p_star_S=float(n * np.sum(lam[:d])),
        residuals=pairs.residual_norms.copy(),
        lambda_next=float(lam[d]),
        eigengap=float(lam[d] - lam[d - 1]),
    )


def project_to_SOd(X: np.ndarray) -> np.ndarray:
    """Nearest rotation to X in Frobenius norm.

    Computed as U Xi V^T from the SVD X = U S V^T with
    Xi = diag(1, ..., 1, det(U V^T)). For rank-deficient X or a determinant
    flip tied at the smallest singular value the minimizer is not unique and
    one valid choice is returned.
    """
    X = np.asarray(X, dtype=float)
    U, _, V = svd_small(X)
    det = np.linalg.det(U @ V.T)
    xi = np.ones(X.shape[0])
    xi[-1] = 1.0 if det >= 0 else -1.0
    return (U * xi) @ V.T


def round_to_rotations(Y: np.ndarray, d: int) -> RotationSet:
    """Blockwise projection of a d x dn matrix onto SO(d)^n.

    The eigenbasis behind Y is defined only up to a left orthogonal factor.
    A rotation factor commutes with blockwise projection and is absorbed by
    the gauge, but a reflection factor is not: rounding blocks that sit near
    reflections produces arbitrary per-block results. The reflection sheet is
    detected by the majority sign of the block determinants and undone with a
    single axis flip before projecting.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[1] // d
    blocks = Y.reshape(d, n, d).transpose(1, 0, 2)
    if float(np.sum(np.linalg.det(blocks))) < 0:
        flip = np.ones(d)
        flip[-1] = -1.0
        blocks = flip[None, :, None] * blocks
    rounded = np.stack([project_to_SOd(B) for B in blocks])
    return RotationSet.from_blocks(rounded, validate=False)


def spectral_initialize(G: PoseGraph, mode: str = FULL_POSE, seed: int = 0,
                        tol: float = 1e-8,
                        max_iter: int | None = None) -> tuple[RotationSet, RelaxationSolution]:
    """Rotation estimates from the d bottom eigenvectors of the data matrix.

    mode "full" uses the combined operator including translational data,
    mode "rotation-only" uses the sparse rotation connection Laplacian alone.
    """
    M = assemble(G, mode)
    sol = solve_relaxation(M, seed=seed, tol=tol, max_iter=max_iter)
    return round_to_rotations(sol.Y_star, G.d), sol


def chordal_initialize(G: PoseGraph) -> RotationSet:
    """Linear least-squares comparator over unconstrained d x d blocks.

    Minimizes the weighted consistency objective over real blocks with block
    one pinned to the identity, then projects each block onto SO(d). The
    normal equations are the connection Laplacian anchored at the first
    block.
    """
    if not check_connected(G):
        raise DisconnectedGraph("graph is not connected")
    d, n = G.d, G.n
    L = rotation_connection_laplacian(G).to_csr()
    if n == 1:
        return RotationSet.from_blocks(np.eye(d)[None, :, :], validate=False)
    rhs = -L[d:, :d].toarray()
    X_rest = AnchoredSolver(L, drop=d).solve(rhs)
    X = np.vstack([np.eye(d), X_rest])
    blocks = np.stack([project_to_SOd(X[i * d:(i + 1) * d].T) for i in range(n)])
    return RotationSet.from_blocks(blocks, validate=False)


def recover_translations(G: PoseGraph, R: RotationSet) -> PoseSet:
    """Optimal translations for fixed rotations, anchored at t_0 = 0.

    Solves the weighted least-squares problem whose normal equations are the
    translational weight Laplacian; the solution is unique up to a global
    offset.
    """
    if not G.is_full:
        raise ModeError("translation recovery requires a full-pose graph")
    if not check_connected(G):
        raise DisconnectedGraph("graph is not connected")
    if R.n != G.n or R.d != G.d:
        raise ArgumentError("rotation set does not match the graph")
    d, n = G.d, G.n
    rhs = np.zeros((n, d))
    for e in G.edges:
        b = e.tau * (R.block(e.i) @ e.t_meas)
        rhs[e.j] += b
        rhs[e.i] -= b
    trans = np.zeros((n, d))
    if n > 1:
        _, L_tau = weight_laplacians(G)
        trans[1:] = AnchoredSolver(L_tau, drop=1).solve(rhs[1:])
    return PoseSet(R, trans)


def odometry_initialize(G: PoseGraph):
    """Baseline that composes the measurements along consecutive node pairs.

    Returns a PoseSet for full-pose graphs and a RotationSet otherwise.
    Requires a measurement between k and k+1 (either direction) for every k.
    """
    d, n = G.d, G.n
    lookup = G.edge_lookup
    blocks = np.empty((n, d, d))
    blocks[0] = np.eye(d)
    trans = np.zeros((n, d))
    for k in range(n - 1):
        fwd = lookup.get((k, k + 1))
        rev = lookup.get((k + 1, k))
        if fwd is not None:
            blocks[k + 1] = blocks[k] @ fwd.R_meas
            if G.is_full:
                trans[k + 1] = trans[k] + blocks[k] @ fwd.t_meas
        elif rev is not None:
            blocks[k + 1] = blocks[k] @ rev.R_meas.T
            if G.is_full:
                trans[k + 1] = trans[k] - blocks[k + 1] @ rev.t_meas
        else:
            raise ArgumentError(f"no odometry measurement between {k} and {k + 1}")
    rot = RotationSet.from_blocks(blocks, validate=False)
    return PoseSet(rot, trans) if G.is_full else rot
