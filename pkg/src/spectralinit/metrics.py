"""Gauge-invariant evaluation: orbit distances, objective costs, the
orthogonal decomposition against a reference, and a first-order local
refinement. All operations are pure functions over immutable inputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .datamatrix import DataMatrixSet, assemble
from .errors import ArgumentError, DimensionError, ModeError, NoConvergence
from .posegraph import PoseGraph, PoseSet, RotationSet
from .spectral import RelaxationSolution, project_to_SOd
from .linalg import svd_small

__all__ = [
    "AlignmentResult",
    "so_orbit_distance",
    "o_orbit_distance",
    "evaluate_cost",
    "orthogonal_decomposition",
    "RefineResult",
    "refine",
]


@dataclass(frozen=True)
class AlignmentResult:
    """Orbit distance together with the gauge element realizing it."""

    distance: float
    gauge: np.ndarray


def _as_stacked(X) -> np.ndarray:
    if isinstance(X, RotationSet):
        return X.as_matrix()
    if isinstance(X, PoseSet):
        return X.rotations.as_matrix()
    if isinstance(X, RelaxationSolution):
        return X.Y_star
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("expected a d x dn matrix")
    return X


def _check_match(X: np.ndarray, Y: np.ndarray) -> None:
    if X.shape != Y.shape:
        raise DimensionError(f"shape mismatch: {X.shape} vs {Y.shape}")


def so_orbit_distance(X, Y) -> AlignmentResult:
    """min over G in SO(d) of ||X - G Y||_F and the optimal G."""
    Xm, Ym = _as_stacked(X), _as_stacked(Y)
    _check_match(Xm, Ym)
    G = project_to_SOd(Xm @ Ym.T)
    return AlignmentResult(float(np.linalg.norm(Xm - G @ Ym)), G)


def o_orbit_distance(X, Y) -> AlignmentResult:
    """min over G in O(d) of ||X - G Y||_F and the optimal G.

    Also accepts unrounded relaxation solutions for Y (or X).
    """
    Xm, Ym = _as_stacked(X), _as_stacked(Y)
    _check_match(Xm, Ym)
    U, _, V = svd_small(Xm @ Ym.T)
    G = U @ V.T
    return AlignmentResult(float(np.linalg.norm(Xm - G @ Ym)), G)


def _quadratic_cost(M: DataMatrixSet, rows: np.ndarray) -> float:
    total = 0.0
    for a in range(rows.shape[0]):
        total += float(rows[a] @ M.Q.matvec(rows[a]))
    return total


def evaluate_cost(G: PoseGraph, est, kind: str = "quadratic",
                  matrices: DataMatrixSet | None = None) -> float:
    """Objective value of an estimate under one of three conventions.

    kind "ra": the weighted rotation consistency cost. kind "pgo": the full
    pose objective including translation residuals (PoseSet required).
    kind "quadratic": the data-matrix quadratic form on the rotations, which
    equals the pgo cost minimized over translations in full mode.
    """
    if kind == "quadratic":
        rot = est.rotations if isinstance(est, PoseSet) else est
        rows = _as_stacked(rot)
        if rows.shape != (G.d, G.d * G.n):
            raise DimensionError("estimate does not match the graph")
        M = matrices if matrices is not None else assemble(G)
        return _quadratic_cost(M, rows)

    if kind == "ra":
        rot = est.rotations if isinstance(est, PoseSet) else est
        if not isinstance(rot, RotationSet):
            raise ArgumentError("ra cost needs rotations")
        total = 0.0
        for e in G.edges:
            diff = rot.block(e.j) - rot.block(e.i) @ e.R_meas
            total += e.kappa * float(np.sum(diff * diff))
        return total

    if kind == "pgo":
        if not G.is_full:
            raise ModeError("pgo cost requires a full-pose graph")
        if not isinstance(est, PoseSet):
            raise ModeError("pgo cost requires a PoseSet estimate")
        total = evaluate_cost(G, est.rotations, kind="ra")
        t = est.translations
        rot = est.rotations
        for e in G.edges:
            r = t[e.j] - t[e.i] - rot.block(e.i) @ e.t_meas
            total += e.tau * float(r @ r)
        return total

    raise ArgumentError(f"unknown cost kind {kind!r}")


def orthogonal_decomposition(R_hat, R_true) -> tuple[np.ndarray, np.ndarray]:
    """Split an estimate into its component in the reference row space and
    the orthogonal remainder.

    Returns (K, P) with K = (1/n) R_hat R_true^T R_true, P = R_hat - K,
    K + P = R_hat exactly and <K, P> = 0.
    """
    Xh, Xt = _as_stacked(R_hat), _as_stacked(R_true)
    _check_match(Xh, Xt)
    n = Xh.shape[1] // Xh.shape[0]
    K = (Xh @ Xt.T) @ Xt / n
    return K, Xh - K


class RefineResult(NamedTuple):
    rotations: RotationSet
    iterations: int
    gradient_norm: float
    cost: float


def _riemannian_gradient(rows: np.ndarray, qrows: np.ndarray, d: int,
                         n: int) -> np.ndarray:
    """Project the Euclidean gradient 2 R Q onto the tangent spaces."""
    grad = 2.0 * qrows
    out = np.empty_like(grad)
    for i in range(n):
        Ri = rows[:, i * d:(i + 1) * d]
        Gi = grad[:, i * d:(i + 1) * d]
        A = Ri.T @ Gi
        out[:, i * d:(i + 1) * d] = Ri @ (0.5 * (A - A.T))
    return out


def refine(G: PoseGraph, init: RotationSet, max_iter: int = 200,
           grad_tol: float = 1e-6, initial_step: float | None = None,
           matrices: DataMatrixSet | None = None) -> RefineResult:
    """Riemannian gradient descent on the quadratic objective over SO(d)^n.

    Blockwise tangent projection, projection retraction, and Armijo
    backtracking; the cost never increases. Terminates at the gradient
    tolerance, after max_iter iterations, or when the line search exhausts
    the objective's floating-point resolution (numerically stationary).
    Raises NoConvergence (carrying the best iterate) if the objective turns
    non-finite.
    """
    d, n = G.d, G.n
    M = matrices if matrices is not None else assemble(G)
    rows = init.as_matrix().copy()

    def apply_q(r: np.ndarray) -> np.ndarray:
        return np.vstack([M.Q.matvec(r[a]) for a in range(d)])

    qrows = apply_q(rows)
    cost = float(np.sum(rows * qrows))
    bound = M.Q.norm_bound or 1.0
    step = initial_step if initial_step is not None else 1.0 / (2.0 * bound + 1e-12)

    iterations = 0
    grad = _riemannian_gradient(rows, qrows, d, n)
    gnorm = float(np.linalg.norm(grad))
    while gnorm > grad_tol and iterations < max_iter:
        accepted = False
        while step > 1e-18:
            cand = rows - step * grad
            cand_rows = np.hstack([
                project_to_SOd(cand[:, i * d:(i + 1) * d]) for i in range(n)])
            cand_q = apply_q(cand_rows)
            cand_cost = float(np.sum(cand_rows * cand_q))
            if not np.isfinite(cand_cost):
                best = RotationSet.from_matrix(rows, d, validate=False)
                raise NoConvergence(iterations, gnorm, best=best)
            if cand_cost <= cost - 1e-4 * step * gnorm * gnorm:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # decrease is below the objective's floating-point resolution
            break
        rows, qrows, cost = cand_rows, cand_q, cand_cost
        iterations += 1
        step *= 2.0
        grad = _riemannian_gradient(rows, qrows, d, n)
        gnorm = float(np.linalg.norm(grad))

    return RefineResult(RotationSet.from_matrix(rows, d, validate=False),
                        iterations, gnorm, cost)
