"""Printed tenon pegs: grown from piece inner surfaces into free axis-aligned
Zomeball slots, connecting the shell to the internal structure."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .anneal import point_segments_distance, segment_segments_distance
from .golden import axis_direction_indices
from .mesh import TriangleMesh, merge_meshes
from .structure import ZomeStructure, classify_nodes

AXIS_STEPS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
PERPENDICULARITY_TOL = 1e-9


class ConnectorError(RuntimeError):
    pass


@dataclass(frozen=True)
class TenonParams:
    depth_mm: float = 8.0  # engagement into the ball slot
    cross_section_mm: tuple = (4.0, 2.0)  # nominal rectangular slot profile
    clearance_mm: float = 0.2
    ball_radius_mm: float = 9.2
    strut_radius_mm: float = 4.0
    min_tenons_per_piece: int = 2


@dataclass
class Tenon:
    ball_id: int
    direction: tuple  # axis-aligned unit vector, ball -> shell
    base_point: np.ndarray  # landing point on the piece inner surface (mm)
    length_mm: float  # ball center to base point

    def to_json_dict(self) -> dict:
        return {
            "ball_id": self.ball_id,
            "direction": [float(c) for c in self.direction],
            "base_point": [float(c) for c in self.base_point],
            "length_mm": float(self.length_mm),
        }


@dataclass
class ConnectorLayout:
    tenons_by_piece: dict = field(default_factory=dict)  # label -> [Tenon]

    def counts(self) -> dict:
        return {label: len(ts) for label, ts in sorted(self.tenons_by_piece.items())}

    def all_tenons(self):
        for label in sorted(self.tenons_by_piece):
            for tenon in self.tenons_by_piece[label]:
                yield label, tenon

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "pieces": {
                str(label): [t.to_json_dict() for t in tenons]
                for label, tenons in sorted(self.tenons_by_piece.items())
            },
        }


def admissible_slots(ball_id: int, z: ZomeStructure) -> list:
    """Axis-aligned rectangular slot directions not occupied by a strut."""
    axes = axis_direction_indices()
    slots = z.nodes[ball_id].slots
    return [axes[a] for a in AXIS_STEPS if axes[a] not in slots]


def covered_balls(z: ZomeStructure, label_node: int) -> list:
    """Balls a piece may anchor to: the labeling node itself plus outermost
    nodes one lattice step away from it."""
    from .golden import golden_vector_from_ints

    outer, _ = classify_nodes(z)
    outer_set = set(outer)
    covered = {label_node} if label_node in z.nodes else set()
    if label_node in z.nodes:
        pos = z.nodes[label_node].position
        for step in AXIS_STEPS:
            nid = z.node_at(pos + golden_vector_from_ints(*step))
            if nid is not None and nid in outer_set:
                covered.add(nid)
    return sorted(covered)


def _first_hit(mesh: TriangleMesh, origin, direction, eps=1e-9):
    """(t, triangle_id) of the nearest ray hit, or None."""
    tri = mesh.vertices[mesh.triangles]
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    e1, e2 = b - a, c - a
    h = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    parallel = np.abs(det) < 1e-14
    det_safe = np.where(parallel, 1.0, det)
    s = origin[None, :] - a
    u = np.einsum("ij,ij->i", s, h) / det_safe
    q = np.cross(s, e1)
    v = np.einsum("ij,ij->i", direction[None, :], q) / det_safe
    t = np.einsum("ij,ij->i", e2, q) / det_safe
    hit = (~parallel) & (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) & (t > eps)
    if not hit.any():
        return None
    ids = np.nonzero(hit)[0]
    k = ids[np.argmin(t[ids])]
    return float(t[k]), int(k)


def _ray_blocked(z: ZomeStructure, ball_id: int, origin, direction, t_hit,
                 params: TenonParams) -> bool:
    """True when another ball or a non-incident strut sits in the ray path."""
    end = origin + direction * t_hit
    start = origin + direction * 1e-6
    other_ids = [nid for nid in sorted(z.nodes) if nid != ball_id]
    for nid in other_ids:
        d = point_segments_distance(
            z.node_position_mm(nid), start[None, :], end[None, :]
        )[0]
        # symmetric roles: the ray is a thin segment passing a ball
        if d < params.ball_radius_mm:
            return True
    incident = set(z.nodes[ball_id].slots.values())
    strut_ids = [sid for sid in sorted(z.struts) if sid not in incident]
    if strut_ids:
        sa = np.array([z.strut_endpoints_mm(s)[0] for s in strut_ids])
        sb = np.array([z.strut_endpoints_mm(s)[1] for s in strut_ids])
        d = segment_segments_distance(start, end, sa, sb)
        if (d < params.strut_radius_mm).any():
            return True
    return False


def assign_tenons(z: ZomeStructure, pieces, label_to_node: dict,
                  max_len_mm: float, params: TenonParams = TenonParams()) -> ConnectorLayout:
    """Slot booking pass in (piece label, ball id, direction index) order.

    A tenon is emitted when the first ray hit from a free axis slot is the
    piece's own inner surface, lands square on it, and lies within range.
    """
    from .golden import slot_directions

    layout = ConnectorLayout()
    booked = set()  # (ball_id, direction_index)
    dirs = slot_directions()
    for piece in sorted(pieces, key=lambda p: p.label):
        tenons = []
        label_node = label_to_node[piece.label]
        tags = piece.mesh.triangle_tags or []
        for ball_id in covered_balls(z, label_node):
            origin = z.node_position_mm(ball_id)
            for didx in sorted(admissible_slots(ball_id, z)):
                if (ball_id, didx) in booked:
                    continue
                direction = np.asarray(dirs[didx].unit_vector)
                hit = _first_hit(piece.mesh, origin, direction)
                if hit is None:
                    continue
                t, tri_id = hit
                if t > max_len_mm:
                    continue
                if tri_id >= len(tags) or tags[tri_id] != "inner":
                    continue
                normal = piece.mesh.normals[tri_id]
                if abs(float(normal @ direction) + 1.0) > PERPENDICULARITY_TOL:
                    continue  # not a square landing
                if _ray_blocked(z, ball_id, origin, direction, t, params):
                    continue
                booked.add((ball_id, didx))
                tenons.append(Tenon(
                    ball_id,
                    tuple(float(c) for c in direction),
                    origin + direction * t,
                    t,
                ))
        if len(tenons) < params.min_tenons_per_piece:
            warnings.warn(
                f"piece {piece.label} has only {len(tenons)} tenon(s); "
                f"recommended minimum is {params.min_tenons_per_piece}"
            )
        layout.tenons_by_piece[piece.label] = tenons
    return layout


# ------------------------------------------------------------------ geometry


def _peg_box(tenon: Tenon, params: TenonParams) -> TriangleMesh:
    """Closed rectangular peg from the inner-surface landing point down into
    the ball slot; the profile is the nominal slot shrunk by the clearance."""
    direction = np.asarray(tenon.direction)
    axis = int(np.argmax(np.abs(direction)))
    u = np.zeros(3)
    v = np.zeros(3)
    u[(axis + 1) % 3] = 1.0
    v[(axis + 2) % 3] = 1.0
    half_w = (params.cross_section_mm[0] - 2 * params.clearance_mm) / 2.0
    half_h = (params.cross_section_mm[1] - 2 * params.clearance_mm) / 2.0
    base = np.asarray(tenon.base_point)
    tip_dist = tenon.length_mm - (params.ball_radius_mm - params.depth_mm)
    tip = base - direction * tip_dist
    corners = []
    for end in (base, tip):
        for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            corners.append(end + su * half_w * u + sv * half_h * v)
    # quads wound outward; base ring indices 0-3, tip ring 4-7
    if direction[axis] > 0:
        quads = [(3, 2, 1, 0), (4, 5, 6, 7),
                 (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)]
    else:
        quads = [(0, 1, 2, 3), (7, 6, 5, 4),
                 (4, 5, 1, 0), (5, 6, 2, 1), (6, 7, 3, 2), (7, 4, 0, 3)]
    tris = []
    for a, b, c, d in quads:
        tris.append([a, b, c])
        tris.append([a, c, d])
    mesh = TriangleMesh(np.asarray(corners), tris,
                        ["tenon"] * 12)
    if mesh.signed_volume() < 0:
        mesh = mesh.reversed()
        mesh.triangle_tags = ["tenon"] * 12
    return mesh


def _boxes_overlap(a: TriangleMesh, b: TriangleMesh) -> bool:
    lo_a, hi_a = a.bounds
    lo_b, hi_b = b.bounds
    return bool((lo_a < hi_b).all() and (lo_b < hi_a).all())


def emit_tenon_geometry(piece, tenons, params: TenonParams = TenonParams()) -> TriangleMesh:
    """Piece mesh plus one closed peg component per tenon.

    Pegs sit base-coplanar on the inner voxel face they land on; overlapping
    pegs are resolved by keeping the lowest ball id.
    """
    kept_boxes = []
    kept_tenons = []
    for tenon in sorted(tenons, key=lambda t: (t.ball_id, t.direction)):
        box = _peg_box(tenon, params)
        clash = next((t for t, other in zip(kept_tenons, kept_boxes)
                      if _boxes_overlap(box, other)), None)
        if clash is not None:
            warnings.warn(
                f"tenon at ball {tenon.ball_id} overlaps tenon at ball "
                f"{clash.ball_id}; dropping ball {tenon.ball_id}"
            )
            continue
        kept_boxes.append(box)
        kept_tenons.append(tenon)
    if not kept_boxes:
        return piece.mesh.copy()
    return merge_meshes([piece.mesh] + kept_boxes)


# ---------------------------------------------------------------- validation


def verify_layout(z: ZomeStructure, layout: ConnectorLayout, pieces) -> None:
    """Re-check the layout invariants; raises ConnectorError on violation."""
    from .golden import slot_directions

    piece_by_label = {p.label: p for p in pieces}
    seen_slots = set()
    axes = set(axis_direction_indices().values())
    dirs = slot_directions()
    for label, tenon in layout.all_tenons():
        direction = np.asarray(tenon.direction)
        if sorted(np.abs(direction).round(12)) != [0.0, 0.0, 1.0]:
            raise ConnectorError(f"tenon at ball {tenon.ball_id} is not axis-aligned")
        didx = next(i for i in axes
                    if np.allclose(dirs[i].unit_vector, direction))
        key = (tenon.ball_id, didx)
        if key in seen_slots:
            raise ConnectorError(f"slot {key} booked twice")
        if didx in z.nodes[tenon.ball_id].slots:
            raise ConnectorError(f"slot {key} already holds a strut")
        seen_slots.add(key)
        mesh = piece_by_label[label].mesh
        origin = z.node_position_mm(tenon.ball_id)
        hit = _first_hit(mesh, origin, direction)
        if hit is None or abs(hit[0] - tenon.length_mm) > 1e-6:
            raise ConnectorError(
                f"tenon at ball {tenon.ball_id} fails ray re-verification"
            )
        normal = mesh.normals[hit[1]]
        if abs(float(normal @ direction) + 1.0) > PERPENDICULARITY_TOL:
            raise ConnectorError(
                f"tenon at ball {tenon.ball_id} does not land square"
            )
