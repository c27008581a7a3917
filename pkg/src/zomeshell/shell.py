"""Hollow shell construction and planar cutting into closed printable pieces.

The shell solid is the input surface minus an eroded voxel core.  Cutting
clips the solid against half-spaces and closes each planar cross-section with
an ear-clipped cap (holes are bridged into their outer loop first), so every
piece stays watertight.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .cutplanes import CutPlane
from .mesh import MIN_TRIANGLE_AREA_MM2, MeshError, TriangleMesh, merge_meshes
from .spatial import SurfaceQueryIndex
from .voxel import boundary_surface, erode, voxelize

SNAP_EPS_MM = 1e-6


class ShellError(RuntimeError):
    pass


class PieceExtractionError(ShellError):
    def __init__(self, message, label, planes):
        super().__init__(message)
        self.label = label
        self.planes = planes


@dataclass
class SolidShell:
    outer: TriangleMesh
    inner: TriangleMesh  # outward-oriented cavity surface, or None when solid
    thickness_mm: float

    def volume(self) -> float:
        v = self.outer.signed_volume()
        if self.inner is not None:
            v -= self.inner.signed_volume()
        return v

    def solid_mesh(self) -> TriangleMesh:
        """One closed mesh bounding the shell material: outer surface plus the
        cavity surface flipped to face the material."""
        outer = self.outer.copy()
        outer.triangle_tags = ["outer"] * len(outer.triangles)
        if self.inner is None:
            return outer
        inner = self.inner.reversed()
        inner.triangle_tags = ["inner"] * len(inner.triangles)
        return merge_meshes([outer, inner])


@dataclass
class Piece:
    label: int
    mesh: TriangleMesh
    volume_mm3: float


def build_solid_shell(mesh: TriangleMesh, cell_size_mm: float,
                      thickness_mm: float = 16.0,
                      index: SurfaceQueryIndex = None) -> SolidShell:
    """Hollow the object: voxelize, erode by the wall thickness, and use the
    eroded boundary as the cavity surface."""
    if index is None:
        index = SurfaceQueryIndex(mesh)
    grid = voxelize(mesh, cell_size_mm)
    core = erode(grid, thickness_mm, index=index)
    if not core.occupancy.any():
        warnings.warn(
            f"erosion by {thickness_mm} mm emptied the object; "
            "the piece will be printed solid"
        )
        return SolidShell(mesh, None, thickness_mm)
    inner = boundary_surface(core)
    _check_inner_inside(inner, index)
    return SolidShell(mesh, inner, thickness_mm)


def _check_inner_inside(inner: TriangleMesh, index: SurfaceQueryIndex,
                        samples=32):
    step = max(1, len(inner.vertices) // samples)
    for v in inner.vertices[::step]:
        if not index.is_inside(v):
            raise ShellError("cavity surface leaked outside the object")


# ------------------------------------------------------------------ clipping


def clip_closed_mesh(mesh: TriangleMesh, plane_normal, plane_offset,
                     snap_eps=SNAP_EPS_MM) -> TriangleMesh:
    """Half-space intersection: keep n . x >= offset, cap the cross-section.

    Returns a closed mesh (possibly empty).  Cap triangles are tagged 'cap';
    surviving triangles keep their tags.
    """
    n = np.asarray(plane_normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    d = mesh.vertices @ n - plane_offset
    d[np.abs(d) < snap_eps] = 0.0

    n_verts = len(mesh.vertices)
    extra = []
    tags_in = mesh.triangle_tags or ["outer"] * len(mesh.triangles)
    cut_cache = {}

    def intersection(i, j):
        key = (min(i, j), max(i, j))
        idx = cut_cache.get(key)
        if idx is None:
            a, b = key
            t = d[a] / (d[a] - d[b])
            extra.append(mesh.vertices[a] + t * (mesh.vertices[b] - mesh.vertices[a]))
            idx = n_verts + len(extra) - 1
            cut_cache[key] = idx
        return idx

    tri_d = d[mesh.triangles]
    keep_mask = tri_d.min(axis=1) >= 0
    survivors = np.nonzero(tri_d.max(axis=1) > 0)[0]  # kept or crossing
    tris, tags = [], []
    for t in survivors:
        a, b, c = mesh.triangles[t]
        if keep_mask[t]:
            tris.append([a, b, c])
            tags.append(tags_in[t])
            continue
        # Sutherland-Hodgman clip of one triangle against the half-space
        poly = []
        ids = (a, b, c)
        for k in range(3):
            i, j = ids[k], ids[(k + 1) % 3]
            if d[i] >= 0:
                poly.append(i)
            if (d[i] > 0 and d[j] < 0) or (d[i] < 0 and d[j] > 0):
                poly.append(intersection(i, j))
        for k in range(1, len(poly) - 1):
            tris.append([poly[0], poly[k], poly[k + 1]])
            tags.append(tags_in[t])

    if extra:
        vert_array = np.vstack([mesh.vertices, np.asarray(extra)])
    else:
        vert_array = mesh.vertices
    if len(tris) == 0:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64), [])
    open_mesh = TriangleMesh(vert_array, np.asarray(tris, dtype=np.int64), tags)
    cap_tris = _cap_boundary(open_mesh, n)
    full = TriangleMesh(
        vert_array,
        np.concatenate([open_mesh.triangles,
                        np.asarray(cap_tris, dtype=np.int64).reshape(-1, 3)]),
        tags + ["cap"] * len(cap_tris),
    )
    if np.any(full.areas <= MIN_TRIANGLE_AREA_MM2):
        full = _repair_degenerate_triangles(full)
    return _compact(full)


WELD_TOLERANCE_MM = 1e-5


def _repair_degenerate_triangles(mesh: TriangleMesh, max_passes=64) -> TriangleMesh:
    """Remove zero-area triangles left by capping a grazing cross-section,
    preserving closure: coincident vertex pairs are welded, and a collinear
    triangle is resolved as a T-vertex by splitting the triangle across its
    long edge at the middle vertex."""
    verts = mesh.vertices
    tris = mesh.triangles.copy()
    tags = list(mesh.triangle_tags) if mesh.triangle_tags is not None else None
    for _ in range(max_passes):
        pts = verts[tris]
        areas = 0.5 * np.linalg.norm(
            np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]), axis=1
        )
        bad = np.nonzero(areas <= MIN_TRIANGLE_AREA_MM2)[0]
        if not len(bad):
            break
        i = int(bad[0])
        a, b, c = (int(v) for v in tris[i])
        weld = next(
            ((u, v) for u, v in ((a, b), (b, c), (c, a))
             if np.linalg.norm(verts[u] - verts[v]) < WELD_TOLERANCE_MM),
            None,
        )
        if weld is not None:
            u, v = weld
            tris = np.where(tris == v, u, tris)
            keep = ~(
                (tris[:, 0] == tris[:, 1])
                | (tris[:, 1] == tris[:, 2])
                | (tris[:, 2] == tris[:, 0])
            )
            tris = tris[keep]
            if tags is not None:
                tags = [t for t, k in zip(tags, keep) if k]
            continue
        edges = [(a, b), (b, c), (c, a)]
        spans = [np.linalg.norm(verts[q] - verts[p]) for p, q in edges]
        x, y = edges[int(np.argmax(spans))]
        middle = ({a, b, c} - {x, y}).pop()
        mate = None
        for j, t in enumerate(tris):
            if j == i:
                continue
            for k in range(3):
                if t[k] == y and t[(k + 1) % 3] == x:
                    mate, far = j, int(t[(k + 2) % 3])
                    break
            if mate is not None:
                break
        if mate is None:
            break  # not repairable here; validation reports what remains
        split = np.array([[y, middle, far], [middle, x, far]], dtype=tris.dtype)
        keep = np.ones(len(tris), dtype=bool)
        keep[[i, mate]] = False
        if tags is not None:
            tags = [t for t, k in zip(tags, keep) if k] + [tags[mate]] * 2
        tris = np.vstack([tris[keep], split])
    return TriangleMesh(verts, tris, tags)


def _compact(mesh: TriangleMesh) -> TriangleMesh:
    used = np.unique(mesh.triangles)
    remap = np.full(len(mesh.vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriangleMesh(mesh.vertices[used], remap[mesh.triangles],
                        mesh.triangle_tags)


# ------------------------------------------------------------------- capping


def _boundary_loops(mesh: TriangleMesh):
    """Closed vertex loops of the open boundary, traversed in cap orientation
    (reverse of the surface's directed boundary edges)."""
    directed = set()
    for a, b, c in mesh.triangles:
        directed.update([(a, b), (b, c), (c, a)])
    succ = {}
    for u, v in sorted(directed):
        if (v, u) not in directed:
            succ.setdefault(v, []).append(u)  # reversed edge v -> u
    loops = []
    while succ:
        start = min(succ)
        loop = [start]
        cur = start
        while True:
            nxts = succ.get(cur)
            if not nxts:
                raise ShellError("open boundary does not close into loops")
            nxt = nxts.pop(0)
            if not nxts:
                del succ[cur]
            if nxt == start:
                break
            loop.append(nxt)
            cur = nxt
        loops.append(loop)
    return loops


def _plane_frame(n):
    helper = np.array([1.0, 0.0, 0.0])
    if abs(n[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    # negated second axis: loops that should cap with normal -n appear CCW
    e2 = -np.cross(n, e1)
    return e1, e2


def _loop_area(coords, loop):
    x = coords[loop, 0]
    y = coords[loop, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _point_in_loop(coords, loop, p):
    inside = False
    x, y = p
    for k in range(len(loop)):
        x1, y1 = coords[loop[k]]
        x2, y2 = coords[loop[(k + 1) % len(loop)]]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if xi > x:
                inside = not inside
    return inside


def _bridge_hole(coords, outer, hole):
    """Splice a hole loop into its outer loop through a bridge at the hole's
    rightmost vertex (ear-clipping-with-holes construction)."""
    m_pos = max(range(len(hole)), key=lambda k: coords[hole[k], 0])
    m = hole[m_pos]
    mx, my = coords[m]
    best = None
    for k in range(len(outer)):
        p1, p2 = outer[k], outer[(k + 1) % len(outer)]
        y1, y2 = coords[p1, 1], coords[p2, 1]
        if (y1 > my) == (y2 > my):
            continue
        x1, x2 = coords[p1, 0], coords[p2, 0]
        xi = x1 + (my - y1) / (y2 - y1) * (x2 - x1)
        if xi >= mx - 1e-12 and (best is None or xi < best[0]):
            attach = k if x1 >= x2 else (k + 1) % len(outer)
            best = (xi, attach)
    if best is None:
        raise ShellError("cap hole could not be bridged to its outer loop")
    p_pos = best[1]
    rotated = hole[m_pos:] + hole[:m_pos]
    return outer[: p_pos + 1] + rotated + [m, outer[p_pos]] + outer[p_pos + 1:]


def _strip_spurs(poly):
    """Drop immediate back-tracks u, v, u: the two cap edges they would need
    cancel against each other, so removing them keeps the mesh closed."""
    while True:
        n = len(poly)
        if n < 3:
            return poly
        for k in range(n):
            if poly[k - 1] == poly[(k + 1) % n]:
                drop = {k % n, (k + 1) % n}
                poly = [v for i, v in enumerate(poly) if i not in drop]
                break
        else:
            return poly


def _ear_clip(coords, loop):
    """Triangulate a simple (bridged) polygon given CCW; returns index triples."""
    poly = _strip_spurs(list(loop))
    if len(poly) < 3:
        return []
    tris = []
    scale = max(coords[poly].max(axis=0) - coords[poly].min(axis=0)) or 1.0
    area_eps = 1e-12 * scale * scale

    def cross(o, a, b):
        return (coords[a, 0] - coords[o, 0]) * (coords[b, 1] - coords[o, 1]) - (
            coords[a, 1] - coords[o, 1]
        ) * (coords[b, 0] - coords[o, 0])

    def ear_is_empty(a, b, c, pts, threshold):
        """No polygon vertex beyond `threshold` inside triangle abc (corners
        excluded); threshold -area_eps blocks on-rim points, +area_eps only
        strictly interior ones."""
        pa, pb, pc = coords[a], coords[b], coords[c]
        d1 = (pb[0] - pa[0]) * (pts[:, 1] - pa[1]) - (pb[1] - pa[1]) * (pts[:, 0] - pa[0])
        d2 = (pc[0] - pb[0]) * (pts[:, 1] - pb[1]) - (pc[1] - pb[1]) * (pts[:, 0] - pb[0])
        d3 = (pa[0] - pc[0]) * (pts[:, 1] - pc[1]) - (pa[1] - pc[1]) * (pts[:, 0] - pc[0])
        inside = (d1 > threshold) & (d2 > threshold) & (d3 > threshold)
        corner = ((pts == pa).all(axis=1) | (pts == pb).all(axis=1)
                  | (pts == pc).all(axis=1))
        return not np.any(inside & ~corner)

    def corner(k):
        return poly[k - 1], poly[k], poly[(k + 1) % len(poly)]

    guard = 0
    while len(poly) > 3 and guard < 4 * len(loop) * len(loop):
        guard += 1
        pts = coords[poly]
        convex = [k for k in range(len(poly)) if cross(*corner(k)) > area_eps]
        choice = next(
            (k for k in convex if ear_is_empty(*corner(k), pts, -area_eps)),
            None,
        )
        if choice is None:
            # bridged polygons can leave vertices exactly on an ear's rim;
            # tolerate those before giving up on proper ears
            choice = next(
                (k for k in convex if ear_is_empty(*corner(k), pts, area_eps)),
                None,
            )
        if choice is None:
            # pinched (bridged) polygon: split at a repeated vertex so each
            # lobe is triangulated on its own, then stop here
            first_seen, pinch = {}, None
            for idx, v in enumerate(poly):
                if v in first_seen:
                    pinch = (first_seen[v], idx)
                    break
                first_seen[v] = idx
            if pinch is not None:
                i0, j0 = pinch
                tris.extend(_ear_clip(coords, poly[i0:j0]))
                tris.extend(_ear_clip(coords, poly[j0:] + poly[:i0]))
                return tris
        if choice is None and convex:
            # self-touching geometry: clip the widest corner to keep progress
            choice = max(convex, key=lambda k: cross(*corner(k)))
        if choice is None:
            warnings.warn("cap triangulation fell back to a boundary fan")
            tris.extend(
                (poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)
            )
            return tris
        tris.append(corner(choice))
        del poly[choice]
    if len(poly) == 3:
        tris.append(tuple(poly))
    return tris


# Boundary loops whose mean width (|area| / perimeter) is below this are
# grazing-contact cracks, not real cross-sections; they are closed flat.
CRACK_WIDTH_MM = 0.01


def _fan(loop):
    return [(loop[0], loop[k], loop[k + 1]) for k in range(1, len(loop) - 1)]


def _loop_perimeter(coords, loop):
    pts = coords[loop + loop[:1]]
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _cap_boundary(mesh: TriangleMesh, n):
    loops = _boundary_loops(mesh)
    if not loops:
        return []
    e1, e2 = _plane_frame(n)
    coords = np.column_stack([mesh.vertices @ e1, mesh.vertices @ e2])
    outers, holes, tris = [], [], []
    for loop in loops:
        area = _loop_area(coords, loop)
        if abs(area) <= CRACK_WIDTH_MM * _loop_perimeter(coords, loop):
            tris.extend(_fan(loop))  # zero-width crack: close it flat
        elif area > 0:
            outers.append(loop)
        else:
            holes.append(loop)
    if holes and not outers:
        raise ShellError("cap boundary has holes but no outer loop")
    merged = {id(o): list(o) for o in outers}
    for h in sorted(holes, key=lambda h: -max(coords[h, 0])):
        inside, rest = [], []
        for o in outers:
            (inside if _point_in_loop(coords, o, coords[h[0]]) else rest).append(o)
        inside.sort(key=lambda o: abs(_loop_area(coords, o)))
        rest.sort(key=lambda o: -abs(_loop_area(coords, o)))
        for host in inside + rest:
            try:
                merged[id(host)] = _bridge_hole(coords, merged[id(host)], h)
                break
            except ShellError:
                continue
        else:
            warnings.warn("cap hole could not be bridged; closing it flat")
            tris.extend(_fan(h))
    for o in outers:
        tris.extend(_ear_clip(coords, merged[id(o)]))
    return [list(t) for t in tris]


# ----------------------------------------------------------------- cutting


def _outer_label_set(cell: TriangleMesh) -> set:
    return {int(t[6:]) for t in cell.triangle_tags if t.startswith("outer:")}


# Offset nudges (mm) tried when a cut plane grazes the surface tangentially
# and leaves degenerate cross-section geometry; far below voxel resolution.
_CLIP_NUDGES_MM = (0.0, 0.05, -0.05, 0.2, -0.2)

# A clipped half below this volume is a corner graze or a sliver between
# nearly parallel planes, not a real piece of the cell; the plane is treated
# as missing the cell instead.  Any genuine piece spans at least one voxel
# (4 mm cells -> 64 mm^3), so this is far below legitimate geometry.
MIN_HALF_VOLUME_MM3 = 10.0

# An uncuttable cell below this volume (a sliver complex left between nearly
# parallel planes) is left whole rather than failing the run; it joins the
# majority label's piece, keeping every piece watertight and the total volume
# conserved.  Larger cells still fail loudly: leaving one whole could merge
# two real partitions.
SMALL_CELL_GIVEUP_MM3 = 1000.0


def _clip_both_sides(cell: TriangleMesh, plane) -> list:
    """Both closed halves of the cell, nudging the plane off tangential
    grazes that would leave degenerate caps.  Empty halves are dropped."""
    last_error = None
    for delta in _CLIP_NUDGES_MM:
        offset = plane.offset + delta
        try:
            pos = clip_closed_mesh(cell, plane.normal, offset)
            neg = clip_closed_mesh(
                cell, tuple(-c for c in plane.normal), -offset
            )
            halves = [
                h for h in (pos, neg)
                if len(h.triangles) and h.signed_volume() > MIN_HALF_VOLUME_MM3
            ]
            for h in halves:
                h.validate()
            return halves
        except (ShellError, MeshError) as exc:
            last_error = exc
    raise ShellError(
        f"cut by plane {plane.label_pair} failed at every offset nudge: "
        f"{last_error}"
    )


def _connected_parts(mesh: TriangleMesh) -> list:
    """Solid regions of a (possibly disconnected) closed mesh.

    Surface components are found by shared vertices; a component with
    negative signed volume is a cavity wall and is regrouped with the
    enclosing positive component so nested solids stay whole."""
    tris = mesh.triangles
    n = len(mesh.vertices)
    rows = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
    cols = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, vertex_comp = connected_components(graph, directed=False)
    tri_comp = vertex_comp[tris[:, 0]]
    if len(set(tri_comp.tolist())) == 1:
        return [mesh]
    tags = mesh.triangle_tags
    parts = []
    for c in sorted(set(tri_comp.tolist())):
        mask = tri_comp == c
        sub_tags = [t for t, m in zip(tags, mask) if m] if tags is not None else None
        parts.append(_compact(TriangleMesh(mesh.vertices, tris[mask], sub_tags)))
    vols = [p.signed_volume() for p in parts]
    solids = [i for i, v in enumerate(vols) if v > 0]
    if not solids:
        return [mesh]
    groups = {i: [parts[i]] for i in solids}
    for i, v in enumerate(vols):
        if v > 0:
            continue
        lo, hi = parts[i].bounds
        host = None
        for j in sorted(solids, key=lambda j: vols[j]):
            jlo, jhi = parts[j].bounds
            if np.all(jlo <= lo + SNAP_EPS_MM) and np.all(hi <= jhi + SNAP_EPS_MM):
                host = j
                break
        if host is None:  # defensive: keep the cavity with the biggest solid
            host = max(solids, key=lambda j: vols[j])
        groups[host].append(parts[i])
    return [
        group[0] if len(group) == 1 else merge_meshes(group)
        for group in groups.values()
    ]


def _split_cells(solid: TriangleMesh, planes) -> list:
    """Split the shell solid into cells, each on one side of every plane that
    separates two labels present on the cell.

    Applying a pair's plane only where both of its labels still coexist keeps
    the cell count near the label count instead of the full arrangement size.
    Clipping can disconnect a region (a plane through a closed shell leaves
    caps on both ends), so every half is split into connected components:
    each component carries only its own labels and is assigned independently.
    """
    cells = [
        (part, _outer_label_set(part)) for part in _connected_parts(solid)
    ]
    for plane in planes:
        la, lb = plane.label_pair
        next_cells = []
        for cell, present in cells:
            if la not in present or lb not in present:
                next_cells.append((cell, present))
                continue
            try:
                halves = _clip_both_sides(cell, plane)
            except ShellError:
                if cell.signed_volume() >= SMALL_CELL_GIVEUP_MM3:
                    raise
                warnings.warn(
                    f"leaving an uncuttable sliver cell whole at plane "
                    f"{plane.label_pair}"
                )
                next_cells.append((cell, present))
                continue
            if len(halves) == 2:
                next_cells.extend(
                    (part, _outer_label_set(part))
                    for h in halves
                    for part in _connected_parts(h)
                )
            else:  # plane misses the cell; keep it unre-capped
                next_cells.append((cell, present))
        cells = next_cells
    return [cell for cell, _ in cells]


def _cell_label(cell: TriangleMesh, outer_centroids, outer_labels) -> int:
    """Label carried by the cell's outer-surface area; a cell with no outer
    faces (caps and cavity walls only) takes the nearest outer face's label."""
    areas = {}
    for tag, area in zip(cell.triangle_tags, cell.areas):
        if tag.startswith("outer:"):
            lv = int(tag[6:])
            areas[lv] = areas.get(lv, 0.0) + float(area)
    if areas:
        return min(sorted(areas), key=lambda lv: -areas[lv])
    center = cell.vertices.mean(axis=0)
    d = np.linalg.norm(outer_centroids - center, axis=1)
    return int(outer_labels[int(np.argmin(d))])


def cut_shell(shell: SolidShell, labeling, planes) -> list:
    """One closed piece per partition label.

    The shell solid is split by every cut plane into arrangement cells, and
    each cell joins the label owning most of its outer surface; this keeps
    the pieces volume-conserving even when pairwise planes would over-cut a
    label's region far from the seam it separates.  Pieces may have several
    components.
    """
    solid = shell.solid_mesh()
    shell_volume = shell.volume()
    labels = np.asarray(labeling.labels)
    label_values = sorted(set(labels.tolist()))
    n_outer = len(shell.outer.triangles)
    if len(labels) != n_outer:
        raise ShellError(
            f"labeling covers {len(labels)} triangles, outer surface has {n_outer}"
        )
    tags = list(solid.triangle_tags)
    for t in range(n_outer):
        tags[t] = f"outer:{labels[t]}"
    solid.triangle_tags = tags

    cells = _split_cells(solid, planes)
    outer_centroids = shell.outer.centroids
    grouped = {lv: [] for lv in label_values}
    for cell in cells:
        lv = _cell_label(cell, outer_centroids, labels)
        grouped.setdefault(lv, []).append(cell)

    pieces = []
    for lv in label_values:
        if not grouped[lv]:
            raise PieceExtractionError(
                f"label {lv}: cut planes removed the whole piece", lv, planes
            )
        piece_mesh = merge_meshes(grouped[lv]) if len(grouped[lv]) > 1 \
            else grouped[lv][0]
        piece_mesh.triangle_tags = [
            "outer" if t.startswith("outer:") else t
            for t in piece_mesh.triangle_tags
        ]
        piece_mesh.validate()
        volume = piece_mesh.signed_volume()
        if volume <= 0:
            raise PieceExtractionError(
                f"label {lv}: clipped piece has non-positive volume {volume:.3f}",
                lv, planes,
            )
        pieces.append(Piece(lv, piece_mesh, volume))
    total = sum(p.volume_mm3 for p in pieces)
    if shell_volume > 0 and abs(total - shell_volume) > 0.01 * shell_volume:
        warnings.warn(
            f"piece volumes {total:.1f} mm^3 disagree with shell volume "
            f"{shell_volume:.1f} mm^3 by more than 1%"
        )
    return pieces


def validate_piece_fit(piece: Piece, volume) -> bool:
    """True when some axis-aligned orientation of the piece fits the volume."""
    extents = piece.mesh.vertices.max(axis=0) - piece.mesh.vertices.min(axis=0)
    return volume.fits(extents)
