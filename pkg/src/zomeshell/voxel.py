"""Voxelization, erosion by surface distance, and boundary surface extraction."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .mesh import MeshError, TriangleMesh
from .spatial import SurfaceQueryIndex

DEFAULT_CELL_BUDGET = 512**3


class VoxelBudgetError(MeshError):
    pass


class VoxelGrid:
    """Dense boolean occupancy; a cell is occupied iff its center is inside the
    source solid.  The grid always carries at least one empty padding layer."""

    def __init__(self, origin, cell_size, occupancy):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.cell_size = float(cell_size)
        self.occupancy = np.asarray(occupancy, dtype=bool)

    @property
    def dims(self):
        return self.occupancy.shape

    def cell_center(self, i, j, k):
        return self.origin + (np.array([i, j, k], dtype=np.float64) + 0.5) * self.cell_size

    def cell_centers(self, index_array):
        return self.origin + (index_array + 0.5) * self.cell_size

    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def copy(self):
        return VoxelGrid(self.origin.copy(), self.cell_size, self.occupancy.copy())


def voxelize(mesh: TriangleMesh, cell_size: float, cell_budget=DEFAULT_CELL_BUDGET) -> VoxelGrid:
    """Occupancy by cell-center inside test, computed with one z-parity ray per
    (x, y) column.  Columns whose ray grazes a triangle edge are retried with a
    small in-plane jitter."""
    if cell_size <= 0:
        raise MeshError("cell_size must be positive")
    lo, hi = mesh.bounds
    # one empty padding layer on all sides
    nx, ny, nz = (np.ceil((hi - lo) / cell_size).astype(int) + 2)
    if nx * ny * nz > cell_budget:
        raise VoxelBudgetError(
            f"voxel grid {nx}x{ny}x{nz} exceeds cell budget {cell_budget}"
        )
    origin = lo - cell_size
    occ = np.zeros((nx, ny, nz), dtype=bool)

    tri = mesh.vertices[mesh.triangles]
    zs = origin[2] + (np.arange(nz) + 0.5) * cell_size

    for ix in range(nx):
        cx = origin[0] + (ix + 0.5) * cell_size
        for iy in range(ny):
            cy = origin[1] + (iy + 0.5) * cell_size
            crossings = _column_crossings(tri, cx, cy, cell_size)
            if crossings.size == 0:
                continue
            inside = np.searchsorted(crossings, zs) % 2 == 1
            occ[ix, iy, :] = inside
    return VoxelGrid(origin, cell_size, occ)


def _column_crossings(tri, cx, cy, cell_size, max_retries=16):
    """Sorted z values where the vertical line (cx, cy) crosses the surface."""
    jitter = 0.0
    rng = np.random.default_rng(round(cx * 7919 + cy * 104729) & 0xFFFFFFFF)
    for _ in range(max_retries):
        zs = _column_crossings_once(tri, cx + jitter, cy + jitter * 0.618)
        if zs is not None:
            return zs
        jitter = (rng.random() - 0.5) * 2e-4 * cell_size
    raise MeshError(f"voxelize: degenerate column at ({cx}, {cy})")


def _column_crossings_once(tri, cx, cy, eps=1e-12):
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    # 2D barycentric in the xy projection
    v0 = (b - a)[:, :2]
    v1 = (c - a)[:, :2]
    p = np.array([cx, cy]) - a[:, :2]
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    vertical = np.abs(det) < 1e-14  # triangle parallel to the ray
    det_safe = np.where(vertical, 1.0, det)
    u = (p[:, 0] * v1[:, 1] - p[:, 1] * v1[:, 0]) / det_safe
    v = (v0[:, 0] * p[:, 1] - v0[:, 1] * p[:, 0]) / det_safe
    w = 1.0 - u - v
    margin = 1e-10
    hit = (~vertical) & (u > -margin) & (v > -margin) & (w > -margin)
    if not np.any(hit):
        return np.empty(0)
    grazing = hit & ((np.abs(u) < 1e-9) | (np.abs(v) < 1e-9) | (np.abs(w) < 1e-9))
    if np.any(grazing):
        return None
    z = w[hit] * a[hit, 2] + u[hit] * b[hit, 2] + v[hit] * c[hit, 2]
    z = np.sort(z)
    if len(z) % 2:
        return None
    # coincident crossings (ray through a shared edge) also poison parity
    if len(z) > 1 and np.any(np.diff(z) < eps):
        return None
    return z


def erode(grid: VoxelGrid, distance_mm: float, index: SurfaceQueryIndex = None,
          mesh: TriangleMesh = None) -> VoxelGrid:
    """Keep occupied cells whose center is at least distance_mm from the mesh
    surface.  A voxel distance transform bounds which cells need exact
    nearest-surface queries."""
    if distance_mm < 0:
        raise MeshError("erode distance must be non-negative")
    if distance_mm == 0:
        return grid.copy()
    if index is None:
        if mesh is None:
            raise MeshError("erode needs a SurfaceQueryIndex or a mesh")
        index = SurfaceQueryIndex(mesh)

    occ = grid.occupancy
    # distance (in mm) from each occupied cell center to the nearest empty cell
    # center; true surface distance differs by at most half the cell diagonal
    edt = ndimage.distance_transform_edt(occ, sampling=grid.cell_size)
    slack = grid.cell_size * np.sqrt(3.0)
    keep = occ & (edt >= distance_mm + slack)
    uncertain = occ & ~keep & (edt >= max(distance_mm - slack, 0.0))
    idxs = np.argwhere(uncertain)
    if len(idxs):
        centers = grid.cell_centers(idxs)
        # sampled upper bound first; exact BVH queries only in the thin band
        # where the bound cannot decide
        spacing = 1.0
        upper = index.sampled_upper_distances(centers, spacing)
        sure_far = upper - spacing >= distance_mm
        sure_near = upper < distance_mm
        keep[tuple(idxs[sure_far].T)] = True
        for ijk in idxs[~(sure_far | sure_near)]:
            if index.distance(grid.cell_center(*ijk)) >= distance_mm:
                keep[tuple(ijk)] = True
    return VoxelGrid(grid.origin.copy(), grid.cell_size, keep)


_FACE_DIRS = [
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
]

# Corner offsets (in corner-lattice units) of the exposed face for each
# direction, wound counter-clockwise as seen from the empty side.
_FACE_CORNERS = {
    (1, 0, 0): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    (-1, 0, 0): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    (0, 1, 0): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    (0, -1, 0): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    (0, 0, 1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
    (0, 0, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
}


def boundary_surface(grid: VoxelGrid) -> TriangleMesh:
    """Closed, manifold triangle surface between occupied and empty cells,
    oriented outward from the occupied region.

    Corners shared by cells that touch only along an edge or corner are split
    per face-connected cell class, so every edge of the output is shared by
    exactly two triangles.
    """
    occ = grid.occupancy
    if not occ.any():
        raise MeshError("boundary_surface: empty grid")
    nx, ny, nz = occ.shape

    def occupied(i, j, k):
        return 0 <= i < nx and 0 <= j < ny and 0 <= k < nz and occ[i, j, k]

    corner_classes = {}

    def corner_class(corner, cell):
        """Class id of `cell` among the occupied cells incident to `corner`,
        grouped by face adjacency within that 8-cell neighbourhood."""
        key = corner
        classes = corner_classes.get(key)
        if classes is None:
            ci, cj, ck = corner
            cells = [
                (ci - a, cj - b, ck - c)
                for a in (0, 1) for b in (0, 1) for c in (0, 1)
            ]
            cells = [c for c in cells if occupied(*c)]
            parent = {c: c for c in cells}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for idx_a in range(len(cells)):
                for idx_b in range(idx_a + 1, len(cells)):
                    pa, pb = cells[idx_a], cells[idx_b]
                    if sum(abs(u - v) for u, v in zip(pa, pb)) == 1:
                        parent[find(pa)] = find(pb)
            classes = {c: find(c) for c in cells}
            corner_classes[key] = classes
        return classes[cell]

    vertex_index = {}
    vertices = []
    triangles = []

    occ_idx = np.argwhere(occ)
    for i, j, k in occ_idx:
        i, j, k = int(i), int(j), int(k)
        for d in _FACE_DIRS:
            if occupied(i + d[0], j + d[1], k + d[2]):
                continue
            quad = []
            for off in _FACE_CORNERS[d]:
                corner = (i + off[0], j + off[1], k + off[2])
                vkey = (corner, corner_class(corner, (i, j, k)))
                vid = vertex_index.get(vkey)
                if vid is None:
                    vid = len(vertices)
                    vertex_index[vkey] = vid
                    vertices.append(grid.origin + np.array(corner) * grid.cell_size)
                quad.append(vid)
            triangles.append([quad[0], quad[1], quad[2]])
            triangles.append([quad[0], quad[2], quad[3]])

    return TriangleMesh(np.asarray(vertices), np.asarray(triangles),
                        triangle_tags=["inner"] * len(triangles))
