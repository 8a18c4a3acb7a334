"""Pose-graph data model, g2o ingestion and serialization, weight Laplacians.

Graphs are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (ArgumentError, DimensionError, MixedDimension, ModeError,
                     ParseError)
from .linalg import SparseSymMatrix

__all__ = [
    "RelativeMeasurement",
    "PoseGraph",
    "RotationSet",
    "PoseSet",
    "ROTATION_ONLY",
    "FULL_POSE",
    "parse_g2o",
    "load_g2o",
    "write_g2o",
    "g2o_to_string",
    "weight_laplacians",
    "check_connected",
    "rotation_from_angle",
    "rotation_to_quaternion",
    "quaternion_to_rotation",
    "estimate_to_json",
    "write_estimate_g2o",
]

ROTATION_ONLY = "rotation-only"
FULL_POSE = "full"

_SO_TOL = 1e-8


def rotation_from_angle(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def quaternion_to_rotation(q: Sequence[float]) -> np.ndarray:
    """Rotation matrix from a quaternion in (qx, qy, qz, qw) order."""
    x, y, z, w = (float(v) for v in q)
    nrm = math.sqrt(x * x + y * y + z * z + w * w)
    if nrm == 0:
        raise ValueError("zero quaternion")
    x, y, z, w = x / nrm, y / nrm, z / nrm, w / nrm
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Quaternion (qx, qy, qz, qw) with qw >= 0 from a 3x3 rotation matrix."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0:
        r = math.sqrt(1.0 + t)
        w = 0.5 * r
        x = (R[2, 1] - R[1, 2]) / (2 * r)
        y = (R[0, 2] - R[2, 0]) / (2 * r)
        z = (R[1, 0] - R[0, 1]) / (2 * r)
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = math.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        q = np.empty(3)
        q[i] = 0.5 * r
        q[j] = (R[j, i] + R[i, j]) / (2 * r)
        q[k] = (R[k, i] + R[i, k]) / (2 * r)
        w = (R[k, j] - R[j, k]) / (2 * r)
        x, y, z = q
    quat = np.array([x, y, z, w])
    if quat[3] < 0:
        quat = -quat
    return quat / np.linalg.norm(quat)


def _is_rotation(R: np.ndarray, tol: float = _SO_TOL) -> bool:
    d = R.shape[0]
    if R.shape != (d, d):
        return False
    return (np.linalg.norm(R.T @ R - np.eye(d)) <= tol * d
            and np.linalg.det(R) > 0)


@dataclass(frozen=True)
class RelativeMeasurement:
    """Directed relative measurement on the edge i -> j.

    kappa is the rotation concentration, tau the translation precision;
    t_meas and tau are absent in rotation-only problems.
    """

    i: int
    j: int
    R_meas: np.ndarray
    kappa: float
    t_meas: np.ndarray | None = None
    tau: float | None = None

    def validate(self, d: int, n: int) -> None:
        if self.i == self.j:
            raise ArgumentError(f"self loop at node {self.i}")
        if not (0 <= self.i < n and 0 <= self.j < n):
            raise ArgumentError(f"edge ({self.i},{self.j}) out of range [0,{n})")
        if self.R_meas.shape != (d, d) or not _is_rotation(self.R_meas):
            raise ArgumentError(f"edge ({self.i},{self.j}): R_meas not in SO({d})")
        if not self.kappa > 0:
            raise ArgumentError(f"edge ({self.i},{self.j}): kappa must be positive")
        if self.t_meas is not None:
            if np.asarray(self.t_meas).shape != (d,):
                raise ArgumentError(f"edge ({self.i},{self.j}): t_meas has wrong shape")
            if self.tau is None or not self.tau > 0:
                raise ArgumentError(f"edge ({self.i},{self.j}): tau must be positive")


@dataclass(frozen=True)
class RotationSet:
    """Element of SO(d)^n stored as n blocks of shape (d, d)."""

    d: int
    n: int
    blocks: np.ndarray

    @classmethod
    def from_blocks(cls, blocks, validate: bool = True) -> "RotationSet":
        blocks = np.asarray(blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise DimensionError("expected an (n, d, d) block array")
        n, d = blocks.shape[0], blocks.shape[1]
        if validate:
            for idx in range(n):
                if not _is_rotation(blocks[idx]):
                    raise ArgumentError(f"block {idx} is not in SO({d})")
        return cls(d, n, blocks)

    @classmethod
    def from_matrix(cls, M: np.ndarray, d: int, validate: bool = True) -> "RotationSet":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != d or M.shape[1] % d:
            raise DimensionError("expected a d x dn matrix")
        n = M.shape[1] // d
        blocks = np.stack([M[:, i * d:(i + 1) * d] for i in range(n)])
        return cls.from_blocks(blocks, validate=validate)

    def as_matrix(self) -> np.ndarray:
        """Row-concatenated d x dn representation."""
        return np.hstack(tuple(self.blocks))

    def block(self, i: int) -> np.ndarray:
        return self.blocks[i]


@dataclass(frozen=True)
class PoseSet:
    """Rotations plus one translation per node."""

    rotations: RotationSet
    translations: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translations, dtype=float)
        if t.shape != (self.rotations.n, self.rotations.d):
            raise DimensionError("translations must have shape (n, d)")
        object.__setattr__(self, "translations", t)

    @property
    def d(self) -> int:
        return self.rotations.d

    @property
    def n(self) -> int:
        return self.rotations.n


@dataclass(frozen=True)
class PoseGraph:
    """Directed measurement graph over n nodes in dimension d (2 or 3).

    mode is "rotation-only" or "full"; full-pose graphs carry translation
    measurements and precisions on every edge. vertex_poses optionally holds
    per-node poses read from VERTEX records (kept for round-tripping and as
    an odometry-style baseline).
    """

    d: int
    n: int
    edges: tuple[RelativeMeasurement, ...]
    mode: str
    vertex_poses: PoseSet | None = None

    @classmethod
    def from_edges(cls, d: int, n: int, edges: Iterable[RelativeMeasurement],
                   mode: str = FULL_POSE, vertex_poses: PoseSet | None = None,
                   validate: bool = True) -> "PoseGraph":
        edges = tuple(edges)
        if d not in (2, 3):
            raise DimensionError(f"d must be 2 or 3, got {d}")
        if n < 1:
            raise DimensionError("graph needs at least one node")
        if mode not in (ROTATION_ONLY, FULL_POSE):
            raise ArgumentError(f"unknown mode {mode!r}")
        if validate:
            seen: set[tuple[int, int]] = set()
            for e in edges:
                e.validate(d, n)
                if (e.i, e.j) in seen:
                    raise ArgumentError(f"duplicate directed edge ({e.i},{e.j})")
                if (e.j, e.i) in seen:
                    raise ArgumentError(
                        f"edge ({e.i},{e.j}) measured in both directions")
                seen.add((e.i, e.j))
                if mode == FULL_POSE and (e.t_meas is None or e.tau is None):
                    raise ModeError(
                        f"edge ({e.i},{e.j}) lacks translation data in full mode")
        return cls(d, n, edges, mode, vertex_poses)

    @property
    def is_full(self) -> bool:
        return self.mode == FULL_POSE

    @cached_property
    def edge_lookup(self) -> dict[tuple[int, int], RelativeMeasurement]:
        return {(e.i, e.j): e for e in self.edges}

    def rotation_only(self) -> "PoseGraph":
        """Copy with translation data dropped."""
        stripped = tuple(
            RelativeMeasurement(e.i, e.j, e.R_meas, e.kappa) for e in self.edges)
        return PoseGraph(self.d, self.n, stripped, ROTATION_ONLY, self.vertex_poses)


def check_connected(G: PoseGraph) -> bool:
    """True iff the undirected support graph of G is connected."""
    if G.n == 1:
        return True
    if not G.edges:
        return False
    rows = np.fromiter((e.i for e in G.edges), dtype=np.int64, count=len(G.edges))
    cols = np.fromiter((e.j for e in G.edges), dtype=np.int64, count=len(G.edges))
    adj = sp.csr_matrix((np.ones(len(G.edges)), (rows, cols)), shape=(G.n, G.n))
    ncomp = connected_components(adj, directed=False, return_labels=False)
    return int(ncomp) == 1


def weight_laplacians(G: PoseGraph) -> tuple[SparseSymMatrix, SparseSymMatrix | None]:
    """Scalar Laplacians of the rotational and translational weight graphs.

    The translational Laplacian is absent for rotation-only graphs.
    """

    def build(weights: np.ndarray) -> SparseSymMatrix:
        deg = np.zeros(G.n)
        rows = np.empty(len(G.edges), dtype=np.int64)
        cols = np.empty(len(G.edges), dtype=np.int64)
        vals = np.empty(len(G.edges))
        for idx, e in enumerate(G.edges):
            w = weights[idx]
            deg[e.i] += w
            deg[e.j] += w
            u, v = min(e.i, e.j), max(e.i, e.j)
            rows[idx], cols[idx], vals[idx] = u, v, -w
        diag_idx = np.arange(G.n)
        return SparseSymMatrix.from_entries(
            G.n,
            np.concatenate([diag_idx, rows]),
            np.concatenate([diag_idx, cols]),
            np.concatenate([deg, vals]),
        )

    kappas = np.array([e.kappa for e in G.edges])
    L_rho = build(kappas)
    if not G.is_full:
        return L_rho, None
    taus = np.array([e.tau for e in G.edges])
    return L_rho, build(taus)


# ---------------------------------------------------------------------------
# g2o format
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _info_from_upper(entries: Sequence[float], size: int) -> np.ndarray:
    M = np.zeros((size, size))
    pos = 0
    for r in range(size):
        for c in range(r, size):
            M[r, c] = entries[pos]
            M[c, r] = entries[pos]
            pos += 1
    return M


def _upper_entries(M: np.ndarray) -> list[float]:
    size = M.shape[0]
    return [M[r, c] for r in range(size) for c in range(r, size)]


def _kappa_tau_3d(info: np.ndarray, lineno: int) -> tuple[float, float]:
    # isotropized per-edge precisions: tau = 3 / tr(Sigma_t),
    # kappa = 3 / (2 tr(Sigma_R)), with Sigma the inverse information and
    # translation in rows 0:3, rotation in rows 3:6
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise ParseError(lineno, "singular information matrix") from exc
    tr_t = float(np.trace(cov[:3, :3]))
    tr_r = float(np.trace(cov[3:, 3:]))
    if tr_t <= 0 or tr_r <= 0:
        raise ParseError(lineno, "information matrix is not positive definite")
    return 3.0 / (2.0 * tr_r), 3.0 / tr_t


def _kappa_tau_2d(info: np.ndarray, lineno: int) -> tuple[float, float]:
    # 2D mapping: tau = 2 / tr(Sigma_t), kappa = 1 / var(theta)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise ParseError(lineno, "singular information matrix") from exc
    tr_t = float(np.trace(cov[:2, :2]))
    var_th = float(cov[2, 2])
    if tr_t <= 0 or var_th <= 0:
        raise ParseError(lineno, "information matrix is not positive definite")
    return 1.0 / var_th, 2.0 / tr_t


def parse_g2o(text) -> PoseGraph:
    """Parse g2o text (str or bytes) into a full-pose PoseGraph.

    Supported records: VERTEX_SE2, VERTEX_SE3:QUAT, EDGE_SE2, EDGE_SE3:QUAT.
    Lines starting with '#' are ignored. Node ids are compacted to [0, n).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    edges_raw = []       # (lineno, i, j, R, t, kappa, tau)
    vertices_raw = {}    # id -> (t, R)
    dim: int | None = None

    def set_dim(d: int, lineno: int):
        nonlocal dim
        if dim is None:
            dim = d
        elif dim != d:
            raise MixedDimension(f"line {lineno}: {d}D record in a {dim}D file")

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        tag = fields[0]
        try:
            if tag == "VERTEX_SE3:QUAT":
                if len(fields) != 9:
                    raise ParseError(lineno, f"expected 9 fields, got {len(fields)}")
                set_dim(3, lineno)
                vid = int(fields[1])
                t = np.array([float(x) for x in fields[2:5]])
                R = quaternion_to_rotation([float(x) for x in fields[5:9]])
                vertices_raw[vid] = (t, R)
            elif tag == "VERTEX_SE2":
                if len(fields) != 5:
                    raise ParseError(lineno, f"expected 5 fields, got {len(fields)}")
                set_dim(2, lineno)
                vid = int(fields[1])
                t = np.array([float(fields[2]), float(fields[3])])
                vertices_raw[vid] = (t, rotation_from_angle(float(fields[4])))
            elif tag == "EDGE_SE3:QUAT":
                if len(fields) != 31:
                    raise ParseError(lineno, f"expected 31 fields, got {len(fields)}")
                set_dim(3, lineno)
                i, j = int(fields[1]), int(fields[2])
                t = np.array([float(x) for x in fields[3:6]])
                R = quaternion_to_rotation([float(x) for x in fields[6:10]])
                info = _info_from_upper([float(x) for x in fields[10:31]], 6)
                kappa, tau = _kappa_tau_3d(info, lineno)
                edges_raw.append((lineno, i, j, R, t, kappa, tau))
            elif tag == "EDGE_SE2":
                if len(fields) != 12:
                    raise ParseError(lineno, f"expected 12 fields, got {len(fields)}")
                set_dim(2, lineno)
                i, j = int(fields[1]), int(fields[2])
                t = np.array([float(fields[3]), float(fields[4])])
                R = rotation_from_angle(float(fields[5]))
                info = _info_from_upper([float(x) for x in fields[6:12]], 3)
                kappa, tau = _kappa_tau_2d(info, lineno)
                edges_raw.append((lineno, i, j, R, t, kappa, tau))
            # unknown record types are skipped
        except (ValueError, IndexError) as exc:
            if isinstance(exc, (ParseError, MixedDimension)):
                raise
            raise ParseError(lineno, f"malformed record: {exc}") from exc

    if dim is None:
        raise ParseError(0, "no supported records found")

    ids = sorted(set(vertices_raw)
                 | {i for (_, i, _, _, _, _, _) in edges_raw}
                 | {j for (_, _, j, _, _, _, _) in edges_raw})
    if not ids:
        raise ParseError(0, "file defines no nodes")
    remap = {vid: k for k, vid in enumerate(ids)}
    n = len(ids)

    edges = []
    seen: set[tuple[int, int]] = set()
    for (lineno, i, j, R, t, kappa, tau) in edges_raw:
        ci, cj = remap[i], remap[j]
        if (ci, cj) in seen:
            raise ParseError(lineno, f"duplicate directed edge ({i},{j})")
        if (cj, ci) in seen:
            raise ParseError(lineno, f"edge ({i},{j}) measured in both directions")
        seen.add((ci, cj))
        edges.append(RelativeMeasurement(ci, cj, R, kappa, t, tau))

    vertex_poses = None
    if vertices_raw and set(vertices_raw) == set(ids):
        blocks = np.stack([vertices_raw[vid][1] for vid in ids])
        ts = np.stack([vertices_raw[vid][0] for vid in ids])
        vertex_poses = PoseSet(RotationSet.from_blocks(blocks, validate=False), ts)

    return PoseGraph.from_edges(dim, n, edges, FULL_POSE, vertex_poses)


def load_g2o(path) -> PoseGraph:
    with open(path, "rb") as f:
        return parse_g2o(f.read())


def g2o_to_string(G: PoseGraph) -> str:
    """Serialize a full-pose PoseGraph back to g2o text.

    Information matrices are written isotropic so that the per-edge kappa and
    tau round-trip exactly: diag(tau..., 2*kappa...) in 3D and
    diag(tau, tau, kappa) in 2D.
    """
    if not G.is_full:
        raise ModeError("g2o serialization requires a full-pose graph")
    out = io.StringIO()
    if G.vertex_poses is not None:
        for k in range(G.n):
            t = G.vertex_poses.translations[k]
            R = G.vertex_poses.rotations.block(k)
            if G.d == 3:
                q = rotation_to_quaternion(R)
                out.write("VERTEX_SE3:QUAT " + str(k) + " "
                          + " ".join(_fmt(x) for x in t) + " "
                          + " ".join(_fmt(x) for x in q) + "\n")
            else:
                th = math.atan2(R[1, 0], R[0, 0])
                out.write("VERTEX_SE2 " + str(k) + " "
                          + _fmt(t[0]) + " " + _fmt(t[1]) + " " + _fmt(th) + "\n")
    for e in G.edges:
        if G.d == 3:
            q = rotation_to_quaternion(e.R_meas)
            info = np.diag([e.tau] * 3 + [2.0 * e.kappa] * 3)
            out.write("EDGE_SE3:QUAT " + f"{e.i} {e.j} "
                      + " ".join(_fmt(x) for x in e.t_meas) + " "
                      + " ".join(_fmt(x) for x in q) + " "
                      + " ".join(_fmt(x) for x in _upper_entries(info)) + "\n")
        else:
            th = math.atan2(e.R_meas[1, 0], e.R_meas[0, 0])
            info = np.diag([e.tau, e.tau, e.kappa])
            out.write("EDGE_SE2 " + f"{e.i} {e.j} "
                      + _fmt(e.t_meas[0]) + " " + _fmt(e.t_meas[1]) + " "
                      + _fmt(th) + " "
                      + " ".join(_fmt(x) for x in _upper_entries(info)) + "\n")
    return out.getvalue()


def write_g2o(G: PoseGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(g2o_to_string(G))


def estimate_to_json(est, config: dict | None = None) -> dict:
    """JSON-serializable dict of a RotationSet or PoseSet estimate."""
    if isinstance(est, PoseSet):
        rot, trans = est.rotations, est.translations.tolist()
    elif isinstance(est, RotationSet):
        rot, trans = est, None
    else:
        raise ArgumentError("expected a RotationSet or PoseSet")
    doc = {
        "d": rot.d,
        "n": rot.n,
        "rotations": [rot.block(i).ravel().tolist() for i in range(rot.n)],
        "translations": trans,
    }
    if config is not None:
        doc["config"] = config
    return doc


def write_estimate_g2o(est, path) -> None:
    """Write an estimate as g2o VERTEX records."""
    if isinstance(est, RotationSet):
        est = PoseSet(est, np.zeros((est.n, est.d)))
    with open(path, "w", encoding="utf-8") as f:
        for k in range(est.n):
            t = est.translations[k]
            R = est.rotations.block(k)
            if est.d == 3:
                q = rotation_to_quaternion(R)
                f.write("VERTEX_SE3:QUAT " + str(k) + " "
                        + " ".join(_fmt(x) for x in t) + " "
                        + " ".join(_fmt(x) for x in q) + "\n")
            else:
                th = math.atan2(R[1, 0], R[0, 0])
                f.write("VERTEX_SE2 " + str(k) + " "
                        + _fmt(t[0]) + " " + _fmt(t[1]) + " " + _fmt(th) + "\n")


def save_truth_json(truth: PoseSet, path, config: dict | None = None) -> None:
    """Ground-truth sidecar for a synthetic instance."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(estimate_to_json(truth, config), f)


def load_truth_json(path) -> PoseSet:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    d, n = doc["d"], doc["n"]
    blocks = np.array(doc["rotations"]).reshape(n, d, d)
    trans = (np.array(doc["translations"]) if doc.get("translations") is not None
             else np.zeros((n, d)))
    return PoseSet(RotationSet.from_blocks(blocks, validate=False), trans)
