"""Spatial queries over triangle meshes: nearest surface point, nearest
triangle centroid, inside/outside tests, and ray casting."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh


def closest_points_on_triangles(p, tri):
    """Closest point to p on each triangle in tri (n,3,3).  Returns (n,3) points.

    Region-based projection (Ericson, Real-Time Collision Detection).
    """
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    result = np.empty_like(a)
    done = np.zeros(len(tri), dtype=bool)

    def assign(mask, pts):
        m = mask & ~done
        if np.any(m):
            result[m] = pts[m] if pts.shape == result.shape else pts
            done[m] = True

    assign((d1 <= 0) & (d2 <= 0), a)  # vertex A
    assign((d3 >= 0) & (d4 <= d3), b)  # vertex B
    assign((d6 >= 0) & (d5 <= d6), c)  # vertex C

    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
    assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * v_ab[:, None])  # edge AB

    vb = d5 * d2 - d1 * d6
    with np.errstate(divide="ignore", invalid="ignore"):
        w_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
    assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * w_ac[:, None])  # edge AC

    va = d3 * d6 - d5 * d4
    denom_bc = (d4 - d3) + (d5 - d6)
    with np.errstate(divide="ignore", invalid="ignore"):
        w_bc = np.where(denom_bc != 0, (d4 - d3) / denom_bc, 0.0)
    assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + (c - b) * w_bc[:, None])

    denom = va + vb + vc
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
    assign(~done, a + ab * v[:, None] + ac * w[:, None])  # interior
    return result


class _BVHNode:
    __slots__ = ("lo", "hi", "left", "right", "tri_ids")

    def __init__(self, lo, hi, left=None, right=None, tri_ids=None):
        self.lo = lo
        self.hi = hi
        self.left = left
        self.right = right
        self.tri_ids = tri_ids


class SurfaceQueryIndex:
    """Median-split AABB hierarchy for nearest-surface and ray queries."""

    LEAF_SIZE = 8

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        self._tri = mesh.vertices[mesh.triangles]
        lo = self._tri.min(axis=1)
        hi = self._tri.max(axis=1)
        order = np.arange(len(mesh.triangles))
        self.root = self._build(order, lo, hi, mesh.centroids)
        self._centroid_tree = cKDTree(mesh.centroids)

    def _build(self, ids, lo, hi, centroids):
        node_lo = lo[ids].min(axis=0)
        node_hi = hi[ids].max(axis=0)
        if len(ids) <= self.LEAF_SIZE:
            return _BVHNode(node_lo, node_hi, tri_ids=np.sort(ids))
        axis = int(np.argmax(node_hi - node_lo))
        order = ids[np.argsort(centroids[ids, axis], kind="stable")]
        mid = len(order) // 2
        left = self._build(order[:mid], lo, hi, centroids)
        right = self._build(order[mid:], lo, hi, centroids)
        return _BVHNode(node_lo, node_hi, left=left, right=right)

    @staticmethod
    def _box_dist2(node, p):
        d = np.maximum(np.maximum(node.lo - p, 0.0), p - node.hi)
        return float(d @ d)

    def nearest_surface(self, p):
        """Returns (closest_point, distance, triangle_id); exact ties go to the
        lowest triangle id."""
        p = np.asarray(p, dtype=np.float64)
        best = (np.inf, -1, None)  # (dist, tri_id, point)
        stack = [self.root]
        while stack:
            node = stack.pop()
            if self._box_dist2(node, p) > best[0] * best[0]:
                continue
            if node.tri_ids is not None:
                pts = closest_points_on_triangles(p, self._tri[node.tri_ids])
                # sqrt'd distances so exact ties match brute-force comparisons
                d = np.linalg.norm(pts - p, axis=1)
                for k in np.argsort(d, kind="stable"):
                    cand = (float(d[k]), int(node.tri_ids[k]), pts[k])
                    if cand[0] < best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                        best = cand
            else:
                children = sorted(
                    (node.left, node.right), key=lambda n: self._box_dist2(n, p)
                )
                stack.extend(reversed(children))
        return best[2], best[0], best[1]

    def distance(self, p) -> float:
        return self.nearest_surface(p)[1]

    def _sample_tree(self, spacing):
        """KD-tree over a barycentric point net on the surface; the nearest
        sample over-estimates the true distance by at most `spacing`."""
        cached = getattr(self, "_samples", None)
        if cached is not None and cached[0] <= spacing:
            return cached[1]
        pts = []
        tri = self._tri
        edge = np.linalg.norm(
            tri - np.roll(tri, 1, axis=1), axis=2
        ).max(axis=1)
        for t in range(len(tri)):
            n = max(1, int(np.ceil(edge[t] / spacing)))
            a, b, c = tri[t]
            for i in range(n + 1):
                for j in range(n + 1 - i):
                    u, v = i / n, j / n
                    pts.append(a + u * (b - a) + v * (c - a))
        tree = cKDTree(np.asarray(pts))
        self._samples = (spacing, tree)
        return tree

    def sampled_upper_distances(self, points, spacing=1.0) -> np.ndarray:
        """Batch upper bounds on the surface distance: the true distance of
        each point lies in [bound - spacing, bound]."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        tree = self._sample_tree(spacing)
        upper, _ = tree.query(points)
        return upper

    def nearest_centroid_distance(self, p) -> float:
        d, _ = self._centroid_tree.query(np.asarray(p, dtype=np.float64))
        return float(d)

    # ------------------------------------------------------------- rays

    def ray_crossings(self, origin, direction, eps=1e-9):
        """Parameters t > 0 of ray/surface crossings, or None when a hit is too
        close to a triangle edge to trust the parity."""
        ts, degenerate = ray_triangle_intersections(
            origin, direction, self._tri, eps=eps
        )
        if degenerate:
            return None
        return ts

    def is_inside(self, p, rng_seed=12345, max_retries=32) -> bool:
        """Ray-parity inside test with direction retry on degenerate hits."""
        rng = np.random.default_rng(rng_seed)
        p = np.asarray(p, dtype=np.float64)
        for _ in range(max_retries):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            ts = self.ray_crossings(p, direction)
            if ts is None:
                continue
            return len(ts) % 2 == 1
        raise RuntimeError("inside test failed to find a non-degenerate ray")


def ray_triangle_intersections(origin, direction, tri, eps=1e-9, t_min=0.0):
    """Moller-Trumbore over a triangle array.  Returns (sorted t values,
    degenerate flag); degenerate means some hit grazed an edge within eps."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = b - a
    e2 = c - a
    h = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    parallel = np.abs(det) < 1e-14
    det_safe = np.where(parallel, 1.0, det)
    s = origin[None, :] - a
    u = np.einsum("ij,ij->i", s, h) / det_safe
    q = np.cross(s, e1)
    v = np.einsum("ij,ij->i", direction[None, :], q) / det_safe
    t = np.einsum("ij,ij->i", e2, q) / det_safe
    w = 1.0 - u - v
    hit = (~parallel) & (u >= -eps) & (v >= -eps) & (w >= -eps) & (t > t_min)
    if not np.any(hit):
        return np.empty(0), False
    grazing = hit & ((np.abs(u) < eps) | (np.abs(v) < eps) | (np.abs(w) < eps))
    if np.any(grazing):
        return None, True
    return np.sort(t[hit]), False
