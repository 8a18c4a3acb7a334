"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from spectralinit import (FULL_POSE, ROTATION_ONLY, PoseGraph, PoseSet,
                          RotationSet)
from spectralinit.noise import graph_from_truth, haar_rotation


def densify(op, dim: int) -> np.ndarray:
    """Materialize an implicit operator column by column."""
    out = np.empty((dim, dim))
    eye = np.eye(dim)
    for j in range(dim):
        out[:, j] = op.matvec(eye[:, j])
    return out


def random_rotation_set(d: int, n: int, rng: np.random.Generator) -> RotationSet:
    return RotationSet.from_blocks(
        np.stack([haar_rotation(d, rng) for _ in range(n)]), validate=False)


def random_topology(n: int, extra: int, rng: np.random.Generator,
                    kappa_range=(0.5, 20.0), tau_range=(0.5, 20.0)):
    """Connected random topology: a random spanning tree plus extra edges."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[int(rng.integers(0, k))])
        b = int(order[k])
        edges.add((min(a, b), max(a, b)))
    while len(edges) < n - 1 + extra and len(edges) < n * (n - 1) // 2:
        a, b = rng.integers(0, n, size=2)
        if a == b:
            continue
        edges.add((min(int(a), int(b)), max(int(a), int(b))))
    lo_k, hi_k = kappa_range
    lo_t, hi_t = tau_range
    topo = []
    for (i, j) in sorted(edges):
        kappa = float(np.exp(rng.uniform(math.log(lo_k), math.log(hi_k))))
        tau = float(np.exp(rng.uniform(math.log(lo_t), math.log(hi_t))))
        if rng.random() < 0.5:
            i, j = j, i
        topo.append((i, j, kappa, tau))
    return topo


def random_graph(d: int, n: int, extra: int, rng: np.random.Generator,
                 mode: str = ROTATION_ONLY, noisy: bool = True,
                 scale: float = 1.0):
    """Random connected graph plus the truth that generated it.

    noisy=True replaces each measurement with an unrelated random rotation
    (worst case); noisy=False returns the noiseless graph.
    """
    truth_rot = random_rotation_set(d, n, rng)
    truth = PoseSet(truth_rot, scale * rng.standard_normal((n, d)))
    topo = random_topology(n, extra, rng)
    if mode == ROTATION_ONLY:
        topo = [(i, j, k, None) for (i, j, k, _) in topo]
    G = graph_from_truth(truth if mode == FULL_POSE else truth_rot,
                         topo, rng if noisy else None, mode)
    return G, truth, topo


def make_sphere_graph(n_rings: int = 10, per_ring: int = 20,
                      radius: float = 20.0, kappa: float = 500.0,
                      tau: float = 20.0, seed: int = 0):
    """Sphere-type pose-graph fixture: poses on latitude rings of a sphere,
    an odometry chain in ring order, and loop closures between rings.

    Serves as a stand-in for the public sphere benchmark when no file is
    supplied: same shape (spherical shell, dense cross-ring closures) at a
    reduced size.
    """
    rng = np.random.default_rng(seed)
    n = n_rings * per_ring
    positions = np.empty((n, 3))
    for r in range(n_rings):
        polar = math.pi * (r + 0.5) / n_rings
        for j in range(per_ring):
            azim = 2.0 * math.pi * j / per_ring
            k = r * per_ring + j
            positions[k] = radius * np.array([
                math.sin(polar) * math.cos(azim),
                math.sin(polar) * math.sin(azim),
                math.cos(polar)])
    truth = PoseSet(random_rotation_set(3, n, rng), positions)

    topo = [(k, k + 1, kappa, tau) for k in range(n - 1)]
    for r in range(n_rings):
        base = r * per_ring
        topo.append((base + per_ring - 1, base, kappa, tau))  # close the ring
        if r + 1 < n_rings:
            for j in range(per_ring):
                if j % 2 == 0:
                    topo.append((base + j, base + per_ring + j, kappa, tau))
    seen = set()
    topo = [t for t in topo
            if not ((t[0], t[1]) in seen or (t[1], t[0]) in seen
                    or seen.add((t[0], t[1])))]
    G = graph_from_truth(truth, topo, rng, FULL_POSE)
    return G, truth
