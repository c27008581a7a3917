"""Max-margin cut planes between adjacent partition labels.

Each adjacent label pair gets a linear classifier trained on triangle
centroids; the resulting hyperplane becomes the physical cutting plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.svm import SVC

DEFAULT_MARGIN_PENALTY = 10.0
_UNIT_TOL = 1e-12


class DegenerateClassesError(ValueError):
    pass


@dataclass(frozen=True)
class CutPlane:
    """Oriented plane n . x = offset; label_pair[0] lies on the positive side."""

    normal: tuple
    offset: float
    label_pair: tuple

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
            raise ValueError("cut plane normal must be unit length")

    def signed_distance(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ np.asarray(self.normal) - self.offset

    def flipped(self) -> "CutPlane":
        return CutPlane(
            tuple(-c for c in self.normal), -self.offset, self.label_pair[::-1]
        )

    def to_json_dict(self) -> dict:
        return {
            "normal": [float(c) for c in self.normal],
            "offset": float(self.offset),
            "label_pair": list(self.label_pair),
        }


def train_pair_classifier(centroids_a, centroids_b, label_pair=(0, 1),
                          penalty=DEFAULT_MARGIN_PENALTY) -> CutPlane:
    """Soft-margin linear separator between two centroid sets; deterministic
    for a fixed input order."""
    a = np.asarray(centroids_a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(centroids_b, dtype=np.float64).reshape(-1, 3)
    if not len(a) or not len(b):
        raise DegenerateClassesError("both classes need at least one centroid")
    points = np.concatenate([a, b])
    if np.allclose(points, points[0], atol=1e-12):
        raise DegenerateClassesError("all centroids identical; no plane exists")
    labels = np.concatenate([np.ones(len(a)), np.zeros(len(b))])
    clf = SVC(kernel="linear", C=penalty)
    clf.fit(points, labels)  # decision_function > 0 for class 1 (side a)
    w = clf.coef_[0]
    norm = float(np.linalg.norm(w))
    if norm == 0 or not math.isfinite(norm):
        raise DegenerateClassesError("classifier produced a zero normal")
    normal = w / norm
    normal /= np.linalg.norm(normal)  # renormalize to tighten the unit invariant
    offset = float(-clf.intercept_[0] / norm)
    return CutPlane(tuple(float(c) for c in normal), offset, tuple(label_pair))


def separation_fractions(plane: CutPlane, centroids_a, centroids_b):
    """(fraction of a on the positive side, fraction of b on the negative)."""
    da = plane.signed_distance(centroids_a)
    db = plane.signed_distance(centroids_b)
    return float((da > 0).mean()), float((db < 0).mean())


def separation_margin(plane: CutPlane, centroids_a, centroids_b) -> float:
    """Smallest distance of any correctly separated point to the plane;
    negative when some point sits on the wrong side."""
    da = plane.signed_distance(centroids_a)
    db = -plane.signed_distance(centroids_b)
    return float(min(da.min(), db.min()))


def train_all_planes(mesh, labeling, problem, penalty=DEFAULT_MARGIN_PENALTY):
    """One plane per label pair adjacent in the labeling, keyed (low, high)."""
    from .partition import mesh_adjacency

    labels = np.asarray(labeling.labels)
    pairs = set()
    for t, s in mesh_adjacency(mesh):
        lt, ls = int(labels[t]), int(labels[s])
        if lt != ls:
            pairs.add((min(lt, ls), max(lt, ls)))
    planes = []
    for la, lb in sorted(pairs):
        ca = mesh.centroids[labels == la]
        cb = mesh.centroids[labels == lb]
        planes.append(train_pair_classifier(ca, cb, (la, lb), penalty))
    return planes
