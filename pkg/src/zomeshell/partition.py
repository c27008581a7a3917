"""Shell segmentation: assign every outer-surface triangle to an outermost
structure node by alpha-expansion over a distance/seam-smoothness energy, with
saliency protection and a print-volume fitting loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphcut import potts_energy, solve_potts
from .mesh import TriangleMesh

DISTANCE_CLAMP_MM = 1e-6
MIN_DIHEDRAL_RAD = 1e-9
DEFAULT_W_DATA = 1.0
DEFAULT_W_SMOOTHNESS = 10.0
DEFAULT_W_SALIENCY = 5.0
MAX_SMOOTHNESS_SHRINKS = 8


class PartitionError(RuntimeError):
    pass


class PartitionFitError(PartitionError):
    def __init__(self, message, w_sequence):
        super().__init__(message)
        self.w_sequence = w_sequence


@dataclass
class PartitionProblem:
    mesh: TriangleMesh
    label_ids: list  # outermost node ids, ascending
    label_positions_mm: np.ndarray  # (n_labels, 3)
    w_data: float = DEFAULT_W_DATA
    w_smoothness: float = DEFAULT_W_SMOOTHNESS
    w_saliency: float = DEFAULT_W_SALIENCY
    saliency: frozenset = frozenset()

    def __post_init__(self):
        if not len(self.label_ids):
            raise PartitionError("label set is empty")
        if min(self.w_data, self.w_smoothness, self.w_saliency) < 0:
            raise PartitionError("weights must be non-negative")
        self.label_ids = sorted(self.label_ids)
        self.label_positions_mm = np.asarray(
            self.label_positions_mm, dtype=np.float64
        ).reshape(len(self.label_ids), 3)


@dataclass
class Labeling:
    labels: np.ndarray  # per-triangle index into problem.label_ids
    energy: float

    def label_node_ids(self, problem: PartitionProblem):
        return [problem.label_ids[i] for i in self.labels]

    def partition_count(self) -> int:
        return len(set(self.labels.tolist()))

    def to_json_dict(self, problem: PartitionProblem) -> dict:
        return {
            "schema_version": 1,
            "labels": self.label_node_ids(problem),
            "energy": self.energy,
        }


@dataclass(frozen=True)
class PrintVolume:
    x: float = 200.0
    y: float = 200.0
    z: float = 200.0

    def __post_init__(self):
        if min(self.x, self.y, self.z) <= 0:
            raise ValueError("print volume dimensions must be positive")

    def fits(self, extents) -> bool:
        """Axis-rotated AABB fit: rotations permute the extents, so the piece
        fits iff the sorted extents fit the sorted volume dimensions."""
        return all(
            e <= v + 1e-9
            for e, v in zip(sorted(extents), sorted((self.x, self.y, self.z)))
        )


# ------------------------------------------------------------------ costs


def mesh_adjacency(mesh: TriangleMesh) -> np.ndarray:
    """(m, 2) triangle index pairs sharing an edge, each pair once, sorted."""
    owners = {}
    pairs = set()
    for t, (a, b, c) in enumerate(mesh.triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            if key in owners:
                pairs.add((min(owners[key], t), max(owners[key], t)))
            else:
                owners[key] = t
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def data_cost_matrix(problem: PartitionProblem) -> np.ndarray:
    """(n_tri, n_labels) of log centroid-to-node distances (mm, clamped)."""
    diff = problem.mesh.centroids[:, None, :] - problem.label_positions_mm[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    return np.log(np.maximum(d, DISTANCE_CLAMP_MM))


def data_cost(problem: PartitionProblem, triangle: int, label_index: int) -> float:
    d = np.linalg.norm(
        problem.mesh.centroids[triangle] - problem.label_positions_mm[label_index]
    )
    return math.log(max(d, DISTANCE_CLAMP_MM))


def seam_cost_per_edge(problem: PartitionProblem, edges: np.ndarray) -> np.ndarray:
    """Cost of a label discontinuity across each shared edge:
    -log(theta/pi) * centroid distance with theta the angle between the two
    triangle normals, plus the saliency penalty when either triangle is marked
    (symmetric form of the published term).  Smooth surface -> small theta ->
    expensive seam; sharp crease -> cheap seam, so cuts prefer creases and
    adjacent near-coplanar triangles keep consistent labels."""
    mesh = problem.mesh
    t, s = edges[:, 0], edges[:, 1]
    dots = np.clip(np.einsum("ij,ij->i", mesh.normals[t], mesh.normals[s]), -1.0, 1.0)
    theta = np.maximum(np.arccos(dots), MIN_DIHEDRAL_RAD)
    phi = np.linalg.norm(mesh.centroids[t] - mesh.centroids[s], axis=1)
    cost = -np.log(theta / math.pi) * phi
    if problem.saliency:
        flags = np.zeros(len(mesh.triangles))
        flags[list(problem.saliency)] = 1.0
        cost = cost + problem.w_saliency * np.maximum(flags[t], flags[s])
    return cost


def smoothness_cost(problem: PartitionProblem, t: int, s: int,
                    l_t: int, l_s: int) -> float:
    """Pairwise cost of one edge under a concrete label pair."""
    if l_t == l_s:
        return 0.0
    edge = np.array([[t, s]], dtype=np.int64)
    return float(seam_cost_per_edge(problem, edge)[0])


def labeling_energy(problem: PartitionProblem, labels, edges=None) -> float:
    if edges is None:
        edges = mesh_adjacency(problem.mesh)
    unary = problem.w_data * data_cost_matrix(problem)
    weights = problem.w_smoothness * seam_cost_per_edge(problem, edges)
    return potts_energy(labels, unary, edges, weights)


# ---------------------------------------------------------------- solvers


def nearest_node_labeling(problem: PartitionProblem) -> Labeling:
    """Each triangle takes the closest label; ties go to the lowest node id."""
    diff = problem.mesh.centroids[:, None, :] - problem.label_positions_mm[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    labels = np.argmin(d, axis=1).astype(np.int64)  # argmin takes the first tie
    return Labeling(labels, labeling_energy(problem, labels))


def solve_multilabel(problem: PartitionProblem, initial: Labeling) -> Labeling:
    edges = mesh_adjacency(problem.mesh)
    unary = problem.w_data * data_cost_matrix(problem)
    weights = problem.w_smoothness * seam_cost_per_edge(problem, edges)
    labels, energy = solve_potts(unary, edges, weights, initial.labels)
    return Labeling(labels, energy)


def piece_extents(mesh: TriangleMesh, labels, label_value) -> np.ndarray:
    tri = mesh.triangles[np.asarray(labels) == label_value]
    pts = mesh.vertices[np.unique(tri)]
    return pts.max(axis=0) - pts.min(axis=0)


def fit_partitions(problem: PartitionProblem, volume: PrintVolume,
                   shell_thickness_mm: float):
    """Shrink the seam-smoothness weight by 10x until every piece's best
    axis-aligned pose fits the print volume.  Returns (labeling, final weight).
    """
    tri_pts = problem.mesh.vertices[problem.mesh.triangles]
    tri_extents = tri_pts.max(axis=1) - tri_pts.min(axis=1)
    worst = int(np.argmax(tri_extents.max(axis=1)))
    if not volume.fits(tri_extents[worst]):
        raise PartitionFitError(
            f"triangle {worst} alone exceeds the print volume "
            f"(extents {np.round(tri_extents[worst], 2).tolist()} mm, "
            f"shell thickness {shell_thickness_mm} mm)",
            w_sequence=[],
        )
    w = DEFAULT_W_SMOOTHNESS
    sequence = []
    initial = None
    for _ in range(MAX_SMOOTHNESS_SHRINKS + 1):
        sequence.append(w)
        problem.w_smoothness = w
        if initial is None:
            initial = nearest_node_labeling(problem)
        labeling = solve_multilabel(problem, initial)
        bad = [
            lv for lv in sorted(set(labeling.labels.tolist()))
            if not volume.fits(piece_extents(problem.mesh, labeling.labels, lv))
        ]
        if not bad:
            return labeling, w
        w *= 0.1
    raise PartitionFitError(
        f"partitions still exceed the print volume after weights {sequence}",
        w_sequence=sequence,
    )


# ----------------------------------------------------------------- saliency


def load_saliency(path, mesh: TriangleMesh) -> frozenset:
    """Whitespace-separated triangle ids; '#' starts a comment."""
    ids = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0]
        for tok in body.split():
            try:
                t = int(tok)
            except ValueError:
                raise PartitionError(f"{path}:{lineno}: bad triangle id {tok!r}")
            if not 0 <= t < len(mesh.triangles):
                raise PartitionError(f"{path}:{lineno}: triangle id {t} out of range")
            ids.add(t)
    return frozenset(ids)
