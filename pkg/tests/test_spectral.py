import math

import numpy as np
import pytest

from spectralinit import (CubeParams, DisconnectedGraph, LinearOperator,
                          PoseGraph, RelativeMeasurement, assemble,
                          chordal_initialize, evaluate_cost, generate_cube,
                          odometry_initialize, o_orbit_distance,
                          project_to_SOd, recover_translations,
                          round_to_rotations, so_orbit_distance,
                          solve_relaxation, spectral_initialize)
from spectralinit.datamatrix import DataMatrixSet, rotation_connection_laplacian
from spectralinit.noise import graph_from_truth, haar_rotation
from spectralinit.posegraph import rotation_from_angle

from helpers import random_graph


class TestSolveRelaxation:
    def test_noiseless_recovers_kernel(self):
        rng = np.random.default_rng(0)
        G, truth, _ = random_graph(3, 6, 5, rng, mode="full", noisy=False)
        sol = solve_relaxation(assemble(G))
        assert sol.p_star_S == pytest.approx(0.0, abs=1e-8)
        assert o_orbit_distance(truth.rotations, sol).distance <= 1e-6

    def test_identity_operator(self):
        d, n = 3, 5
        eye_op = LinearOperator(d * n, lambda v: v.copy(), 1.0)
        L = rotation_connection_laplacian(PoseGraph.from_edges(
            3, n, [RelativeMeasurement(i, i + 1, np.eye(3), 1.0)
                   for i in range(n - 1)], mode="rotation-only"))
        M = DataMatrixSet(d, n, L, None, eye_op)
        sol = solve_relaxation(M)
        assert sol.p_star_S == pytest.approx(d * n, rel=1e-10)

    def test_optimal_value_against_dense_oracle(self):
        rng = np.random.default_rng(1)
        G, _, _ = random_graph(2, 6, 4, rng, mode="rotation-only")
        M = assemble(G)
        sol = solve_relaxation(M)
        w = np.linalg.eigvalsh(M.L_rho_conn.to_dense())
        expect = G.n * w[:2].sum()
        assert sol.p_star_S == pytest.approx(expect, rel=1e-8)

    def test_feasibility(self):
        rng = np.random.default_rng(2)
        G, _, _ = random_graph(3, 7, 5, rng, mode="full")
        sol = solve_relaxation(assemble(G))
        gram = sol.Y_star @ sol.Y_star.T
        np.testing.assert_allclose(gram, G.n * np.eye(3), atol=1e-6 * G.n)
        assert sol.p_star_S == pytest.approx(
            G.n * sol.eigenvalues.sum(), rel=1e-6, abs=1e-9)
        assert sol.eigengap == sol.lambda_next - sol.eigenvalues[-1]


class TestProjectToSOd:
    def test_identity(self):
        np.testing.assert_array_equal(project_to_SOd(np.eye(3)), np.eye(3))

    def test_positive_scaling(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            R = haar_rotation(3, rng)
            np.testing.assert_allclose(project_to_SOd(5.0 * R), R, atol=1e-12)

    def test_hand_example_2d(self):
        X = np.array([[0.0, -2.0], [1.0, 0.0]])
        np.testing.assert_allclose(project_to_SOd(X),
                                   [[0.0, -1.0], [1.0, 0.0]], atol=1e-12)

    def test_angle_grid_oracle_2d(self):
        rng = np.random.default_rng(4)
        thetas = np.linspace(-math.pi, math.pi, 200001)
        cs, ss = np.cos(thetas), np.sin(thetas)
        for _ in range(20):
            X = rng.standard_normal((2, 2))
            R = project_to_SOd(X)
            assert abs(np.linalg.det(R) - 1) < 1e-10
            # trace objective over the angle grid
            vals = (X[0, 0] + X[1, 1]) * cs + (X[1, 0] - X[0, 1]) * ss
            best = thetas[np.argmax(vals)]
            np.testing.assert_allclose(R, rotation_from_angle(best), atol=1e-4)

    def test_output_always_rotation(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            d = int(rng.integers(2, 4))
            X = rng.standard_normal((d, d))
            R = project_to_SOd(X)
            np.testing.assert_allclose(R @ R.T, np.eye(d), atol=1e-10)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-10)

    def test_rounding_contraction(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            d = int(rng.integers(2, 4))
            R = haar_rotation(d, rng)
            X = R + rng.uniform(0.01, 3.0) * rng.standard_normal((d, d))
            lhs = np.linalg.norm(project_to_SOd(X) - R)
            rhs = 2.0 * np.linalg.norm(X - R)
            assert lhs <= rhs + 1e-12

    def test_projection_optimality_sampling(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            d = int(rng.integers(2, 4))
            X = rng.standard_normal((d, d))
            best = np.linalg.norm(X - project_to_SOd(X))
            for _ in range(2000):
                G = haar_rotation(d, rng)
                assert best <= np.linalg.norm(X - G) + 1e-12


class TestRoundToRotations:
    def test_reflected_sheet_is_repaired(self):
        # a reflected eigenbasis representative must round to the same
        # estimate up to gauge as the direct one
        rng = np.random.default_rng(8)
        G, truth, _ = random_graph(3, 6, 5, rng, mode="rotation-only",
                                   noisy=False)
        Y = truth.rotations.as_matrix()
        S = np.diag([1.0, 1.0, -1.0])
        R_direct = round_to_rotations(Y, 3)
        R_reflected = round_to_rotations(S @ Y, 3)
        assert so_orbit_distance(truth.rotations, R_direct).distance <= 1e-10
        assert so_orbit_distance(truth.rotations, R_reflected).distance <= 1e-10


class TestSpectralInitialize:
    def test_noiseless_exact(self):
        rng = np.random.default_rng(9)
        G, truth, _ = random_graph(3, 8, 6, rng, mode="full", noisy=False)
        R, sol = spectral_initialize(G, "full", seed=1)
        assert so_orbit_distance(truth.rotations, R).distance <= 1e-6

    def test_bound_holds_on_noisy_instance(self):
        from spectralinit import (evaluate_bounds, exact_spectral_gap,
                                  perturbation_spectral_norm)
        inst = generate_cube(CubeParams(s=4, p_lc=0.2, kappa=1e5, tau=150,
                                        seed=0))
        G, truth = inst.graph, inst.truth
        topo = [(e.i, e.j, e.kappa, e.tau) for e in G.edges]
        G_true = graph_from_truth(truth, topo, None, "full")
        dq = perturbation_spectral_norm(G, G_true)
        lam = exact_spectral_gap(assemble(G_true))
        report = evaluate_bounds(3, G.n, dq, lam)
        R, _ = spectral_initialize(G, "full", seed=0)
        err = so_orbit_distance(truth.rotations, R).distance
        assert err <= report.thm3_bound

    def test_disconnected(self):
        edges = [RelativeMeasurement(0, 1, np.eye(3), 1.0, np.zeros(3), 1.0),
                 RelativeMeasurement(2, 3, np.eye(3), 1.0, np.zeros(3), 1.0)]
        G = PoseGraph.from_edges(3, 4, edges)
        with pytest.raises(DisconnectedGraph):
            spectral_initialize(G, "full")

    def test_gauge_covariance(self):
        rng = np.random.default_rng(10)
        G, truth, topo = random_graph(3, 6, 4, rng, mode="rotation-only")
        R1, _ = spectral_initialize(G, "rotation-only", seed=3)
        # conjugate every node rotation by a fixed gauge: measurements are
        # unchanged, so the estimate must match up to gauge regardless
        R2, _ = spectral_initialize(G, "rotation-only", seed=4)
        assert so_orbit_distance(R1, R2).distance <= 1e-6


class TestChordal:
    def test_noiseless_exact(self):
        rng = np.random.default_rng(11)
        G, truth, _ = random_graph(3, 7, 6, rng, mode="full", noisy=False)
        R = chordal_initialize(G)
        assert so_orbit_distance(truth.rotations, R).distance <= 1e-6

    def test_single_edge(self):
        rng = np.random.default_rng(12)
        Rm = haar_rotation(3, rng)
        e = RelativeMeasurement(0, 1, Rm, 2.0)
        G = PoseGraph.from_edges(3, 2, [e], mode="rotation-only")
        R = chordal_initialize(G)
        np.testing.assert_allclose(R.block(0), np.eye(3), atol=1e-10)
        np.testing.assert_allclose(R.block(1), Rm, atol=1e-10)

    def test_disconnected(self):
        edges = [RelativeMeasurement(0, 1, np.eye(3), 1.0),
                 RelativeMeasurement(2, 3, np.eye(3), 1.0)]
        G = PoseGraph.from_edges(3, 4, edges, mode="rotation-only")
        with pytest.raises(DisconnectedGraph):
            chordal_initialize(G)


class TestRecoverTranslations:
    def test_noiseless_up_to_offset(self):
        rng = np.random.default_rng(13)
        G, truth, _ = random_graph(3, 7, 5, rng, mode="full", noisy=False)
        est = recover_translations(G, truth.rotations)
        diff = est.translations - truth.translations
        diff -= diff.mean(axis=0)
        assert np.abs(diff).max() <= 1e-8

    def test_single_edge(self):
        rng = np.random.default_rng(14)
        t = rng.standard_normal(3)
        e = RelativeMeasurement(0, 1, haar_rotation(3, rng), 1.0, t, 2.0)
        G = PoseGraph.from_edges(3, 2, [e])
        eye2 = np.stack([np.eye(3), np.eye(3)])
        from spectralinit import RotationSet
        est = recover_translations(G, RotationSet.from_blocks(eye2))
        np.testing.assert_allclose(est.translations[1] - est.translations[0],
                                   t, atol=1e-12)

    def test_tree_exact_fit(self):
        rng = np.random.default_rng(15)
        G, truth, _ = random_graph(3, 8, 0, rng, mode="full", noisy=True)
        R, _ = spectral_initialize(G, "full", seed=0)
        est = recover_translations(G, R)
        # trees admit a zero-residual fit; compare with composing edges
        assert evaluate_cost(G, est, "pgo") == pytest.approx(
            evaluate_cost(G, R, "ra"), abs=1e-9)


class TestOdometry:
    def test_composes_forward_chain(self):
        rng = np.random.default_rng(16)
        inst = generate_cube(CubeParams(s=2, p_lc=0.5, kappa=1e3, tau=100,
                                        seed=4))
        est = odometry_initialize(inst.graph)
        R, t = est.rotations, est.translations
        for k in range(inst.graph.n - 1):
            e = inst.graph.edge_lookup[(k, k + 1)]
            np.testing.assert_allclose(R.block(k + 1),
                                       R.block(k) @ e.R_meas, atol=1e-12)
            np.testing.assert_allclose(t[k + 1], t[k] + R.block(k) @ e.t_meas,
                                       atol=1e-12)

    def test_missing_chain(self):
        edges = [RelativeMeasurement(0, 2, np.eye(3), 1.0, np.zeros(3), 1.0),
                 RelativeMeasurement(2, 1, np.eye(3), 1.0, np.zeros(3), 1.0)]
        G = PoseGraph.from_edges(3, 3, edges)
        from spectralinit import ArgumentError
        with pytest.raises(ArgumentError):
            odometry_initialize(G)
