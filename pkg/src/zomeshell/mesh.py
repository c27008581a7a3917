"""Triangle mesh container, OBJ/STL input and OBJ output, watertight validation.

Units are millimetres throughout.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

WELD_TOLERANCE_MM = 1e-6
MIN_TRIANGLE_AREA_MM2 = 1e-9


class MeshError(ValueError):
    pass


class NotWatertightError(MeshError):
    def __init__(self, message, bad_edges):
        super().__init__(message)
        self.bad_edges = bad_edges


class TriangleMesh:
    """Indexed triangle set with cached centroids, areas, and normals."""

    def __init__(self, vertices, triangles, triangle_tags=None):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        # Optional per-triangle provenance tag ('outer', 'inner', 'cap', ...).
        self.triangle_tags = triangle_tags
        self._centroids = None
        self._areas = None
        self._normals = None

    @property
    def centroids(self):
        if self._centroids is None:
            self._centroids = self.vertices[self.triangles].mean(axis=1)
        return self._centroids

    def _cross(self):
        tri = self.vertices[self.triangles]
        return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])

    @property
    def areas(self):
        if self._areas is None:
            self._areas = 0.5 * np.linalg.norm(self._cross(), axis=1)
        return self._areas

    @property
    def normals(self):
        if self._normals is None:
            c = self._cross()
            n = np.linalg.norm(c, axis=1)
            n[n == 0] = 1.0
            self._normals = c / n[:, None]
        return self._normals

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive for outward-oriented closed meshes."""
        tri = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)

    def directed_edges(self):
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    def boundary_and_nonmanifold_edges(self):
        """Undirected edges not shared by exactly one forward + one reverse use."""
        edges = self.directed_edges()
        bad = []
        counts = {}
        for a, b in edges:
            key = (min(a, b), max(a, b))
            fwd = 1 if a < b else -1
            uses, balance = counts.get(key, (0, 0))
            counts[key] = (uses + 1, balance + fwd)
        for key, (uses, balance) in counts.items():
            if uses != 2 or balance != 0:
                bad.append(key)
        return bad

    def is_watertight(self) -> bool:
        return not self.boundary_and_nonmanifold_edges()

    def validate(self, require_watertight=True):
        if len(self.triangles) == 0:
            raise MeshError("mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index out of range")
        tiny = np.nonzero(self.areas <= MIN_TRIANGLE_AREA_MM2)[0]
        if len(tiny):
            raise MeshError(f"{len(tiny)} degenerate triangles (first: {tiny[:5].tolist()})")
        if require_watertight:
            bad = self.boundary_and_nonmanifold_edges()
            if bad:
                raise NotWatertightError(
                    f"mesh is not watertight/orientable: {len(bad)} bad edges "
                    f"(first: {bad[:8]})",
                    bad,
                )
        return self

    def copy(self):
        tags = None if self.triangle_tags is None else list(self.triangle_tags)
        return TriangleMesh(self.vertices.copy(), self.triangles.copy(), tags)

    def reversed(self):
        m = self.copy()
        m.triangles = m.triangles[:, [0, 2, 1]]
        return m


def merge_meshes(meshes) -> TriangleMesh:
    """Concatenate meshes as independent components (no welding across inputs)."""
    verts, tris, tags = [], [], []
    offset = 0
    any_tags = any(m.triangle_tags is not None for m in meshes)
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        if any_tags:
            tags.extend(m.triangle_tags if m.triangle_tags is not None else ["?"] * len(m.triangles))
        offset += len(m.vertices)
    return TriangleMesh(
        np.concatenate(verts), np.concatenate(tris), tags if any_tags else None
    )


def weld_vertices(points, tolerance=WELD_TOLERANCE_MM):
    """Deduplicate points within tolerance; returns (unique_points, index_map)."""
    points = np.asarray(points, dtype=np.float64)
    keys = np.round(points / tolerance).astype(np.int64)
    seen = {}
    index_map = np.empty(len(points), dtype=np.int64)
    unique = []
    for i, key in enumerate(map(tuple, keys)):
        j = seen.get(key)
        if j is None:
            j = len(unique)
            seen[key] = j
            unique.append(points[i])
        index_map[i] = j
    return np.asarray(unique).reshape(-1, 3), index_map


# ---------------------------------------------------------------- parsing


def _parse_obj(path: Path) -> TriangleMesh:
    verts, faces = [], []
    with open(path, "r", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex line")
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    tok = tok.split("/")[0]
                    i = int(tok)
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise MeshError(f"{path}:{lineno}: face with <3 vertices")
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not faces:
        raise MeshError(f"{path}: no faces found")
    return TriangleMesh(np.asarray(verts), np.asarray(faces))


def _parse_stl_binary(data: bytes, path) -> TriangleMesh:
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + count * 50
    if len(data) < expected:
        raise MeshError(f"{path}: truncated binary STL")
    raw = np.frombuffer(data, dtype=np.uint8, count=count * 50, offset=84)
    raw = raw.reshape(count, 50)
    tri = raw[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(np.float64)
    return _weld_soup(tri)


def _parse_stl_ascii(text: str, path) -> TriangleMesh:
    tri = []
    current = []
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            current.append([float(p) for p in parts[1:4]])
            if len(current) == 3:
                tri.append(current)
                current = []
    if not tri:
        raise MeshError(f"{path}: no facets found in ascii STL")
    return _weld_soup(np.asarray(tri))


def _weld_soup(tri_soup):
    points = tri_soup.reshape(-1, 3)
    unique, index_map = weld_vertices(points)
    faces = index_map.reshape(-1, 3)
    return TriangleMesh(unique, faces)


def load_mesh(path, fmt=None, require_watertight=True) -> TriangleMesh:
    """Load an OBJ or STL (binary/ascii) mesh and validate it.

    fmt: 'obj', 'stl', or None to infer from the extension.
    """
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    if fmt is None:
        fmt = path.suffix.lower().lstrip(".")
    if fmt == "obj":
        mesh = _parse_obj(path)
    elif fmt == "stl":
        data = path.read_bytes()
        if _looks_binary_stl(data):
            mesh = _parse_stl_binary(data, path)
        else:
            mesh = _parse_stl_ascii(data.decode(errors="replace"), path)
    else:
        raise MeshError(f"unsupported mesh format: {fmt!r}")
    return mesh.validate(require_watertight=require_watertight)


def _looks_binary_stl(data: bytes) -> bool:
    if len(data) < 84:
        return False
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) == 84 + count * 50:
        return True
    return not data[:5].lower().startswith(b"solid")


def save_obj(mesh: TriangleMesh, path):
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# zomeshell export: {len(mesh.vertices)} vertices, "
                 f"{len(mesh.triangles)} triangles\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
