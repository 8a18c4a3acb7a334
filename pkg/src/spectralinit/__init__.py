"""Spectral initialization for rotation averaging and pose-graph SLAM.

A library and CLI for computing eigenvector-based initializations of
SO(d)-synchronization problems, evaluating their worst-case error bounds,
generating synthetic benchmark instances, and scoring estimates with
gauge-invariant metrics.
"""

from .bounds import (BoundReport, McDeltaQ, evaluate_bounds, exact_spectral_gap,
                     monte_carlo_delta_q, rotation_only_bound, spectral_gap)
from .datamatrix import (DataMatrixSet, assemble, export_matrixmarket,
                         perturbation_spectral_norm,
                         rotation_connection_laplacian,
                         translational_data_operator)
from .errors import (ArgumentError, DimensionError, DisconnectedGraph,
                     MixedDimension, ModeError, NoConvergence, NonPositiveGap,
                     ParseError, SpectralInitError, TopologyMismatch)
from .linalg import (AnchoredLaplacianSolver, EigenPairs, LinearOperator,
                     SparseSymMatrix, laplacian_pinv_apply, smallest_eigenpairs,
                     spectral_norm, svd_small)
from .metrics import (AlignmentResult, RefineResult, evaluate_cost,
                      o_orbit_distance, orthogonal_decomposition, refine,
                      so_orbit_distance)
from .noise import graph_from_truth, haar_rotation, sample_langevin
from .posegraph import (FULL_POSE, ROTATION_ONLY, PoseGraph, PoseSet,
                        RelativeMeasurement, RotationSet, check_connected,
                        g2o_to_string, load_g2o, parse_g2o, weight_laplacians,
                        write_g2o)
from .spectral import (RelaxationSolution, chordal_initialize,
                       odometry_initialize, project_to_SOd,
                       recover_translations, round_to_rotations,
                       solve_relaxation, spectral_initialize)
from .synthgen import (CubeParams, GroundTruthInstance, derive_seed,
                       generate_cube, sweep)

__version__ = "0.1.0"
