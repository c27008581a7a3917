"""Zometool structure graph: balls (nodes), struts (edges), slot occupancy,
cube-lattice initialization, and versioned JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .golden import (
    GoldenNumber,
    GoldenVector,
    StrutColor,
    StrutSize,
    StrutSpec,
    antipodal_index,
    axis_direction_indices,
    golden_eval,
    golden_vector_from_ints,
    slot_directions,
    strut_displacement,
)
from .mesh import TriangleMesh
from .spatial import SurfaceQueryIndex

STRUCTURE_SCHEMA_VERSION = 1


class StructureError(ValueError):
    pass


class EmptyInitializationError(StructureError):
    pass


@dataclass
class Node:
    node_id: int
    position: GoldenVector
    slots: dict = field(default_factory=dict)  # direction index -> strut id

    @property
    def valence(self) -> int:
        return len(self.slots)


@dataclass
class Strut:
    strut_id: int
    node_a: int
    node_b: int
    spec: StrutSpec
    direction_index: int  # direction from node_a to node_b


class ZomeStructure:
    """Graph of balls and struts whose exact node offsets always equal strut
    displacements; origin_mm anchors the golden lattice in world space."""

    def __init__(self, b0_mm: float, origin_mm=(0.0, 0.0, 0.0)):
        self.b0_mm = float(b0_mm)
        self.origin_mm = np.asarray(origin_mm, dtype=np.float64)
        self.nodes: dict[int, Node] = {}
        self.struts: dict[int, Strut] = {}
        self._position_index: dict[tuple, int] = {}
        self._next_node_id = 0
        self._next_strut_id = 0

    # ------------------------------------------------------------- mutation

    def add_node(self, position: GoldenVector, node_id=None) -> int:
        key = position.key()
        if key in self._position_index:
            raise StructureError(f"node already exists at {key}")
        if node_id is None:
            node_id = self._next_node_id
        self._next_node_id = max(self._next_node_id, node_id + 1)
        self.nodes[node_id] = Node(node_id, position)
        self._position_index[key] = node_id
        return node_id

    def remove_node(self, node_id: int):
        node = self.nodes[node_id]
        if node.slots:
            raise StructureError("cannot remove a node with occupied slots")
        del self._position_index[node.position.key()]
        del self.nodes[node_id]

    def add_strut(self, node_a: int, node_b: int, spec: StrutSpec,
                  direction_index: int, strut_id=None) -> int:
        na, nb = self.nodes[node_a], self.nodes[node_b]
        direction = slot_directions()[direction_index]
        expected = strut_displacement(direction, spec)
        if (nb.position - na.position) != expected:
            raise StructureError(
                f"offset {node_a}->{node_b} does not equal displacement of "
                f"{spec.color.value}-{spec.size.value} along direction {direction_index}"
            )
        anti = antipodal_index(direction_index)
        if direction_index in na.slots or anti in nb.slots:
            raise StructureError("slot already occupied")
        if strut_id is None:
            strut_id = self._next_strut_id
        self._next_strut_id = max(self._next_strut_id, strut_id + 1)
        self.struts[strut_id] = Strut(strut_id, node_a, node_b, spec, direction_index)
        na.slots[direction_index] = strut_id
        nb.slots[anti] = strut_id
        return strut_id

    def remove_strut(self, strut_id: int):
        s = self.struts.pop(strut_id)
        del self.nodes[s.node_a].slots[s.direction_index]
        del self.nodes[s.node_b].slots[antipodal_index(s.direction_index)]

    # -------------------------------------------------------------- queries

    def node_at(self, position: GoldenVector):
        return self._position_index.get(position.key())

    def node_position_mm(self, node_id: int) -> np.ndarray:
        f = self.nodes[node_id].position.to_floats()
        return self.origin_mm + np.asarray(f) * self.b0_mm

    def node_positions_mm(self, node_ids=None) -> np.ndarray:
        ids = sorted(self.nodes) if node_ids is None else list(node_ids)
        if not ids:
            return np.empty((0, 3))
        return np.array([self.node_position_mm(i) for i in ids])

    def strut_endpoints_mm(self, strut_id: int):
        s = self.struts[strut_id]
        return self.node_position_mm(s.node_a), self.node_position_mm(s.node_b)

    def neighbors(self, node_id: int):
        out = []
        for strut_id in self.nodes[node_id].slots.values():
            s = self.struts[strut_id]
            out.append(s.node_b if s.node_a == node_id else s.node_a)
        return out

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            for n in self.neighbors(stack.pop()):
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return len(seen) == len(self.nodes)

    def element_count(self) -> int:
        return len(self.nodes) + len(self.struts)

    def validate(self):
        """Re-check all structural invariants; used after optimization."""
        for s in self.struts.values():
            na, nb = self.nodes[s.node_a], self.nodes[s.node_b]
            want = strut_displacement(slot_directions()[s.direction_index], s.spec)
            if (nb.position - na.position) != want:
                raise StructureError(f"strut {s.strut_id} offset mismatch")
            if na.slots.get(s.direction_index) != s.strut_id:
                raise StructureError(f"strut {s.strut_id} slot inconsistency at a")
            if nb.slots.get(antipodal_index(s.direction_index)) != s.strut_id:
                raise StructureError(f"strut {s.strut_id} slot inconsistency at b")
        for n in self.nodes.values():
            for d, sid in n.slots.items():
                if sid not in self.struts:
                    raise StructureError(f"node {n.node_id} references dead strut {sid}")
        if len(self._position_index) != len(self.nodes):
            raise StructureError("duplicate node positions")
        if not self.is_connected():
            raise StructureError("structure is not connected")
        return self

    def copy(self) -> "ZomeStructure":
        z = ZomeStructure(self.b0_mm, self.origin_mm.copy())
        for nid, n in self.nodes.items():
            z.nodes[nid] = Node(nid, n.position, dict(n.slots))
            z._position_index[n.position.key()] = nid
        for sid, s in self.struts.items():
            z.struts[sid] = Strut(sid, s.node_a, s.node_b, s.spec, s.direction_index)
        z._next_node_id = self._next_node_id
        z._next_strut_id = self._next_strut_id
        return z

    # ------------------------------------------------------- serialization

    def to_json_dict(self) -> dict:
        return {
            "schema_version": STRUCTURE_SCHEMA_VERSION,
            "b0_mm": self.b0_mm,
            "origin_mm": [float(v) for v in self.origin_mm],
            "nodes": [
                {"id": nid, "coords": list(self.nodes[nid].position.key())}
                for nid in sorted(self.nodes)
            ],
            "struts": [
                {
                    "id": sid,
                    "node_a": self.struts[sid].node_a,
                    "node_b": self.struts[sid].node_b,
                    "color": self.struts[sid].spec.color.value,
                    "size": self.struts[sid].spec.size.value,
                    "direction_index": self.struts[sid].direction_index,
                }
                for sid in sorted(self.struts)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ZomeStructure":
        if doc.get("schema_version") != STRUCTURE_SCHEMA_VERSION:
            raise StructureError(
                f"unsupported structure schema: {doc.get('schema_version')}"
            )
        z = cls(doc["b0_mm"], doc.get("origin_mm", (0, 0, 0)))
        for nd in doc["nodes"]:
            xa, xb, ya, yb, za, zb = nd["coords"]
            pos = GoldenVector(
                GoldenNumber(xa, xb), GoldenNumber(ya, yb), GoldenNumber(za, zb)
            )
            z.add_node(pos, node_id=nd["id"])
        for sd in doc["struts"]:
            spec = StrutSpec(StrutColor(sd["color"]), StrutSize(sd["size"]))
            z.add_strut(sd["node_a"], sd["node_b"], spec, sd["direction_index"],
                        strut_id=sd["id"])
        return z

    @classmethod
    def from_json(cls, text: str) -> "ZomeStructure":
        return cls.from_json_dict(json.loads(text))


# ----------------------------------------------------------- initialization


def init_structure(mesh: TriangleMesh, b0_mm: float, d_min_mm: float,
                   index: SurfaceQueryIndex = None) -> ZomeStructure:
    """Axis-aligned cube lattice with edge b0, anchored at the bbox center.

    A lattice cell is kept iff all 8 corners lie inside the mesh and each
    corner is at least d_min from the surface.  Blue-S struts join every pair
    of adjacent kept corners; only the largest connected component survives.
    """
    if b0_mm <= 0:
        raise StructureError("b0_mm must be positive")
    if index is None:
        index = SurfaceQueryIndex(mesh)
    lo, hi = mesh.bounds
    center = (lo + hi) / 2.0
    span = np.ceil((hi - lo) / (2 * b0_mm)).astype(int) + 1

    corner_ok = {}

    def ok(ijk):
        val = corner_ok.get(ijk)
        if val is None:
            p = center + np.asarray(ijk) * b0_mm
            val = index.is_inside(p) and index.distance(p) >= d_min_mm
            corner_ok[ijk] = val
        return val

    kept_corners = set()
    for i in range(-span[0], span[0]):
        for j in range(-span[1], span[1]):
            for k in range(-span[2], span[2]):
                cell = [(i + a, j + b, k + c)
                        for a in (0, 1) for b in (0, 1) for c in (0, 1)]
                if all(ok(c) for c in cell):
                    kept_corners.update(cell)
    if not kept_corners:
        raise EmptyInitializationError(
            f"no lattice cell fits inside the mesh at b0={b0_mm} mm"
        )

    z = ZomeStructure(b0_mm, origin_mm=center)
    ids = {}
    for ijk in sorted(kept_corners):
        ids[ijk] = z.add_node(golden_vector_from_ints(*ijk))

    axes = axis_direction_indices()
    blue_s = StrutSpec(StrutColor.BLUE, StrutSize.S)
    for ijk in sorted(kept_corners):
        for axis, didx in sorted(axes.items()):
            if sum(axis) != 1:  # only the three +axis directions (no duplicates)
                continue
            nb = (ijk[0] + axis[0], ijk[1] + axis[1], ijk[2] + axis[2])
            if nb in kept_corners:
                z.add_strut(ids[ijk], ids[nb], blue_s, didx)

    _keep_largest_component(z)
    return z.validate()


def _keep_largest_component(z: ZomeStructure):
    unseen = set(z.nodes)
    components = []
    while unseen:
        start = min(unseen)
        comp = {start}
        stack = [start]
        unseen.discard(start)
        while stack:
            for n in z.neighbors(stack.pop()):
                if n in unseen:
                    unseen.discard(n)
                    comp.add(n)
                    stack.append(n)
        components.append(comp)
    components.sort(key=lambda c: (-len(c), min(c)))
    keep = components[0]
    for sid in [s for s in z.struts if z.struts[s].node_a not in keep]:
        z.remove_strut(sid)
    for nid in [n for n in z.nodes if n not in keep]:
        z.remove_node(nid)


def classify_nodes(z: ZomeStructure):
    """(outer_ids, inner_ids): a node is outermost when at least one of its six
    axis-aligned lattice neighbor positions is vacant."""
    outer, inner = [], []
    axis_steps = [golden_vector_from_ints(*a) for a in
                  [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]]
    for nid in sorted(z.nodes):
        pos = z.nodes[nid].position
        if all(z.node_at(pos + step) is not None for step in axis_steps):
            inner.append(nid)
        else:
            outer.append(nid)
    return outer, inner
