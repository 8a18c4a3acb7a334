"""Samplers for the generative measurement model.

Rotational noise follows the isotropic concentration model on SO(d) with
density proportional to exp(kappa * tr(R)) against the uniform measure;
translational noise is isotropic Gaussian with precision tau.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import ArgumentError
from .posegraph import (FULL_POSE, ROTATION_ONLY, PoseGraph, PoseSet,
                        RelativeMeasurement, RotationSet)

__all__ = [
    "sample_langevin",
    "sample_translation_noise",
    "haar_rotation",
    "graph_from_truth",
]


def _langevin_log_envelope(kappa: float) -> float:
    """Log of the maximum of (1 - cos t) * exp(2 kappa cos t) on [0, pi]."""
    if kappa < 0.25:
        # increasing on (0, pi): max at pi
        return math.log(2.0) - 2.0 * kappa
    c = 1.0 - 1.0 / (2.0 * kappa)
    return math.log(1.0 - c) + 2.0 * kappa * c


def _sample_langevin_angle(kappa: float, rng: np.random.Generator) -> float:
    """Rotation-angle draw for the 3D model by rejection from a uniform
    proposal, evaluated in log space to survive large kappa."""
    log_m = _langevin_log_envelope(kappa)
    # expected acceptance decays like 1/sqrt(kappa); size batches accordingly
    acc = min(1.0, 0.8 / math.sqrt(max(kappa, 1.0)))
    batch = int(min(max(16.0, 8.0 / acc), 4e6))
    while True:
        theta = rng.uniform(0.0, math.pi, size=batch)
        u = rng.random(size=batch)
        with np.errstate(divide="ignore"):
            logg = np.log1p(-np.cos(theta)) + 2.0 * kappa * (np.cos(theta) - 1.0) \
                + 2.0 * kappa - log_m
            hit = np.log(u) <= logg
        if np.any(hit):
            return float(theta[np.argmax(hit)])


def _axis_angle_rotation(axis: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    K = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def sample_langevin(d: int, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """One rotation drawn from the isotropic model with mode I_d.

    d = 2 reduces to a von Mises angle with concentration 2 kappa. d = 3
    draws a uniform axis and an angle from the density proportional to
    (1 - cos t) exp(2 kappa cos t) on [0, pi] by rejection sampling.
    kappa = 0 gives the uniform distribution; kappa = inf gives the identity.
    """
    if kappa < 0:
        raise ArgumentError("kappa must be nonnegative")
    if math.isinf(kappa):
        return np.eye(d)
    if d == 2:
        theta = rng.vonmises(0.0, 2.0 * kappa) if kappa > 0 \
            else rng.uniform(-math.pi, math.pi)
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s], [s, c]])
    if d == 3:
        axis = rng.standard_normal(3)
        nrm = np.linalg.norm(axis)
        while nrm < 1e-12:
            axis = rng.standard_normal(3)
            nrm = np.linalg.norm(axis)
        axis /= nrm
        theta = _sample_langevin_angle(kappa, rng)
        return _axis_angle_rotation(axis, theta)
    raise ArgumentError(f"d must be 2 or 3, got {d}")


def sample_translation_noise(d: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Isotropic Gaussian translation noise with precision tau."""
    if not tau > 0:
        raise ArgumentError("tau must be positive")
    if math.isinf(tau):
        return np.zeros(d)
    return rng.normal(0.0, 1.0 / math.sqrt(tau), size=d)


def haar_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation."""
    if d == 2:
        theta = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s], [s, c]])
    if d == 3:
        q = rng.standard_normal(4)
        while np.linalg.norm(q) < 1e-12:
            q = rng.standard_normal(4)
        x, y, z, w = q / np.linalg.norm(q)
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])
    raise ArgumentError(f"d must be 2 or 3, got {d}")


def graph_from_truth(truth, topology: Sequence[tuple], rng: np.random.Generator | None,
                     mode: str = FULL_POSE) -> PoseGraph:
    """Measurements sampled around latent poses on a given topology.

    topology lists (i, j, kappa, tau) per directed edge (tau ignored in
    rotation-only mode). rng = None produces the noiseless graph: every
    measurement equals the latent relative pose.
    """
    if isinstance(truth, PoseSet):
        rot, trans = truth.rotations, truth.translations
    elif isinstance(truth, RotationSet):
        rot, trans = truth, None
    else:
        raise ArgumentError("truth must be a PoseSet or RotationSet")
    if mode == FULL_POSE and trans is None:
        raise ArgumentError("full mode requires ground-truth translations")
    d, n = rot.d, rot.n
    edges = []
    for (i, j, kappa, tau) in topology:
        R_rel = rot.block(i).T @ rot.block(j)
        R_meas = R_rel if rng is None else R_rel @ sample_langevin(d, kappa, rng)
        if mode == FULL_POSE:
            t_rel = rot.block(i).T @ (trans[j] - trans[i])
            t_meas = t_rel if rng is None \
                else t_rel + sample_translation_noise(d, tau, rng)
            edges.append(RelativeMeasurement(i, j, R_meas, kappa, t_meas, tau))
        else:
            edges.append(RelativeMeasurement(i, j, R_meas, kappa))
    return PoseGraph.from_edges(d, n, edges, mode)
