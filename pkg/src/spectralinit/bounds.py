"""Worst-case error bounds for the spectral estimate, the maximum-likelihood
estimate, and their mutual distance, plus the spectral-gap quantities they
divide by and Monte-Carlo estimation of the perturbation norm.

All bounds share the shape constant * sqrt(dn) * |dQ| / gap; each one is
recomputed independently from its closed form so the report carries no
derived redundancy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .datamatrix import DataMatrixSet, assemble, perturbation_spectral_norm
from .errors import ArgumentError, DisconnectedGraph, ModeError, NonPositiveGap
from .linalg import smallest_eigenpairs
from .noise import graph_from_truth
from .posegraph import (FULL_POSE, ROTATION_ONLY, PoseGraph, PoseSet,
                        RotationSet, check_connected, weight_laplacians)

__all__ = [
    "BoundReport",
    "evaluate_bounds",
    "spectral_gap",
    "exact_spectral_gap",
    "rotation_only_bound",
    "McDeltaQ",
    "monte_carlo_delta_q",
]


@dataclass(frozen=True)
class BoundReport:
    """Evaluated right-hand sides of the error bounds with inputs echoed.

    lambda_gap is the smallest nonzero eigenvalue of the noiseless data
    matrix, or its scalar-Laplacian surrogate when surrogate_used is set
    (the surrogate is a lower bound, so every bound stays valid).
    """

    d: int
    n: int
    delta_q_norm: float
    lambda_gap: float
    lemma1_bound: float
    thm3_bound: float
    thm4_bound: float
    cor5_bound: float
    rotation_only_bound: float | None
    surrogate_used: bool

    def to_json(self) -> dict:
        return asdict(self)


def evaluate_bounds(d: int, n: int, delta_q_norm: float, lambda_gap: float,
                    delta_rho_norm: float | None = None,
                    rotation_gap: float | None = None,
                    surrogate_used: bool = False) -> BoundReport:
    """Evaluate every bound formula at the given perturbation norm and gap.

    lemma1 bounds the aligned subspace estimate, thm3 the rounded
    initialization, thm4 the global optimum, and cor5 (their sum) the
    distance from initialization to optimum. When delta_rho_norm and
    rotation_gap are given, the rotation-only initialization bound is
    evaluated as well.
    """
    if delta_q_norm < 0:
        raise ArgumentError("delta_q_norm must be nonnegative")
    if lambda_gap <= 0:
        raise NonPositiveGap(
            f"lambda_gap must be positive, got {lambda_gap} "
            "(zero gap signals a disconnected graph)")
    dn = d * n
    ratio = delta_q_norm / lambda_gap
    rot_bound = None
    if delta_rho_norm is not None:
        if rotation_gap is None:
            rotation_gap = lambda_gap
        if rotation_gap <= 0:
            raise NonPositiveGap("rotation_gap must be positive")
        if delta_rho_norm < 0:
            raise ArgumentError("delta_rho_norm must be nonnegative")
        rot_bound = 4.0 * math.sqrt(2.0 * dn) * delta_rho_norm / rotation_gap
    return BoundReport(
        d=d, n=n,
        delta_q_norm=float(delta_q_norm),
        lambda_gap=float(lambda_gap),
        lemma1_bound=2.0 * math.sqrt(2.0 * dn) * ratio,
        thm3_bound=4.0 * math.sqrt(2.0 * dn) * ratio,
        thm4_bound=8.0 * math.sqrt(dn) * ratio,
        cor5_bound=(8.0 + 4.0 * math.sqrt(2.0)) * math.sqrt(dn) * ratio,
        rotation_only_bound=rot_bound,
        surrogate_used=surrogate_used,
    )


def spectral_gap(G: PoseGraph, mode: str = ROTATION_ONLY, tol: float = 1e-8,
                 seed: int = 0) -> float:
    """Algebraic connectivity of the rotational weight graph.

    This equals the relevant spectral gap of the noiseless data matrix in
    rotation-only problems and lower-bounds it in full-pose problems, so it
    is always a bound-valid denominator.
    """
    if not check_connected(G):
        raise DisconnectedGraph("graph is not connected")
    L_rho, _ = weight_laplacians(G)
    pairs = smallest_eigenpairs(L_rho, 2, tol=tol, seed=seed)
    gap = float(pairs.values[1])
    if gap <= 0:
        raise DisconnectedGraph("vanishing algebraic connectivity")
    return gap


def exact_spectral_gap(noiseless: DataMatrixSet, tol: float = 1e-8,
                       seed: int = 0) -> float:
    """Smallest nonzero eigenvalue of a noiseless data matrix.

    Valid only when the matrices were assembled from noiseless measurements
    (the d bottom eigenvalues are then zero); available for synthetic data
    where the ground truth is known.
    """
    pairs = smallest_eigenpairs(noiseless.Q, noiseless.d + 1, tol=tol, seed=seed)
    return float(pairs.values[noiseless.d])


def rotation_only_bound(G: PoseGraph, delta_rho_norm: float, tol: float = 1e-8,
                        seed: int = 0) -> float:
    """Error bound for the initialization computed from rotations alone."""
    if delta_rho_norm < 0:
        raise ArgumentError("delta_rho_norm must be nonnegative")
    gap = spectral_gap(G, tol=tol, seed=seed)
    return 4.0 * math.sqrt(2.0 * G.d * G.n) * delta_rho_norm / gap


@dataclass(frozen=True)
class McDeltaQ:
    """Empirical distribution of the perturbation norm under the noise model.

    samples are sorted ascending; bound_samples maps each bound name to its
    per-sample evaluation at lambda_gap. identity_gauge records that the
    latent rotations were fixed to the identity (an approximation: the
    perturbation distribution depends on the latent poses in general).
    """

    samples: np.ndarray
    quantiles: dict[float, float]
    lambda_gap: float
    bound_samples: dict[str, np.ndarray]
    identity_gauge: bool
    surrogate_used: bool


def monte_carlo_delta_q(G: PoseGraph, trials: int, seed: int = 0,
                        mode: str = ROTATION_ONLY, truth: PoseSet | None = None,
                        quantile_levels=(0.05, 0.25, 0.5, 0.75, 0.95),
                        tol: float = 1e-6) -> McDeltaQ:
    """Sample the perturbation norm by re-drawing measurements on G's
    topology with G's precisions.

    Rotation-only simulation needs no translation data; full-mode simulation
    requires ground-truth translations (pass truth). Latent rotations default
    to the identity gauge unless truth provides them. Trial t draws from an
    independent stream derived from (seed, t), so results do not depend on
    evaluation order.
    """
    if trials < 1:
        raise ArgumentError("trials must be at least 1")
    if mode not in (ROTATION_ONLY, FULL_POSE):
        raise ModeError(f"unknown mode {mode!r}")
    if mode == FULL_POSE and not G.is_full:
        raise ModeError("full-mode simulation requires a full-pose graph")
    if mode == FULL_POSE and truth is None:
        raise ArgumentError(
            "full-mode simulation requires ground-truth translations")
    d, n = G.d, G.n

    if truth is not None:
        latent = truth if mode == FULL_POSE else truth.rotations
    else:
        eye = RotationSet.from_blocks(np.stack([np.eye(d)] * n), validate=False)
        latent = eye
    topo = [(e.i, e.j, e.kappa, e.tau if G.is_full else None)
            for e in G.edges]
    if mode == ROTATION_ONLY:
        topo = [(i, j, k, None) for (i, j, k, _) in topo]

    G_true = graph_from_truth(latent, topo, None, mode)
    samples = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        G_noisy = graph_from_truth(latent, topo, rng, mode)
        samples[t] = perturbation_spectral_norm(G_noisy, G_true, tol=tol,
                                                seed=seed)
    samples.sort()

    gap = spectral_gap(G, tol=tol, seed=seed)
    quantiles = {float(q): float(np.quantile(samples, q))
                 for q in quantile_levels}
    reports = [evaluate_bounds(d, n, s, gap, surrogate_used=(mode == FULL_POSE))
               for s in samples]
    bound_samples = {
        "lemma1_bound": np.array([r.lemma1_bound for r in reports]),
        "thm3_bound": np.array([r.thm3_bound for r in reports]),
        "thm4_bound": np.array([r.thm4_bound for r in reports]),
        "cor5_bound": np.array([r.cor5_bound for r in reports]),
    }
    return McDeltaQ(samples=samples, quantiles=quantiles, lambda_gap=gap,
                    bound_samples=bound_samples, identity_gauge=truth is None,
                    surrogate_used=(mode == FULL_POSE))
