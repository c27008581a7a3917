"""Simulated-annealing exploration of the Zometool structure space: six local
operators, collision validity, geometric cooling, and target-size estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .energy import EnergyWeights, FidelityCache, ForbiddenZone, energy_total
from .golden import (
    StrutSize,
    StrutSpec,
    antipodal_index,
    displacement_table,
    slot_directions,
    strut_displacement,
)
from .structure import StructureError, ZomeStructure

OP_KINDS = ("InsNode", "DelNode", "InsStrut", "DelStrut", "InsBridge", "DelBridge")


@dataclass(frozen=True)
class CollisionParams:
    ball_radius_mm: float = 9.2
    strut_radius_mm: float = 4.0
    clearance_mm: float = 1.0

    def __post_init__(self):
        if min(self.ball_radius_mm, self.strut_radius_mm, self.clearance_mm) <= 0:
            raise ValueError("collision parameters must be positive")


@dataclass(frozen=True)
class AnnealParams:
    t_init: float = 1.0
    t_end: float = 0.1
    cooling: float = 0.99
    iterations_per_step: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 < self.cooling < 1):
            raise ValueError("cooling factor must be in (0, 1)")
        if not (self.t_end < self.t_init):
            raise ValueError("t_end must be below t_init")


# ------------------------------------------------------------ geometry bits


def point_segments_distance(p, a, b):
    """Distances from point p to segments a[i]..b[i]."""
    p = np.asarray(p, dtype=np.float64)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom_safe = np.where(denom == 0, 1.0, denom)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom_safe, 0.0, 1.0)
    closest = a + ab * t[:, None]
    return np.linalg.norm(closest - p, axis=1)


def segment_segments_distance(p0, p1, a, b, eps=1e-12):
    """Distances from segment p0..p1 to each segment a[i]..b[i] (clamped
    closest-approach, Ericson 5.1.9 vectorized)."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d1 = (p1 - p0)[None, :]
    d2 = b - a
    r = p0[None, :] - a
    a11 = float(d1[0] @ d1[0])
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1 * np.ones_like(d2), r)
    bdot = np.einsum("ij,ij->i", np.broadcast_to(d1, d2.shape), d2)
    denom = a11 * e - bdot * bdot
    s = np.where(np.abs(denom) > eps, np.clip((bdot * f - c * e) / np.where(denom == 0, 1, denom), 0, 1), 0.0)
    e_safe = np.where(e < eps, 1.0, e)
    t = np.clip((bdot * s + f) / e_safe, 0.0, 1.0)
    s = np.clip((bdot * t - c) / (a11 if a11 > eps else 1.0), 0.0, 1.0)
    t = np.clip((bdot * s + f) / e_safe, 0.0, 1.0)
    c1 = p0[None, :] + d1 * s[:, None]
    c2 = a + d2 * t[:, None]
    return np.linalg.norm(c1 - c2, axis=1)


def _strut_arrays(z: ZomeStructure, strut_ids):
    a = np.array([z.node_position_mm(z.struts[s].node_a) for s in strut_ids])
    b = np.array([z.node_position_mm(z.struts[s].node_b) for s in strut_ids])
    return a, b


def collision_free(z: ZomeStructure, params: CollisionParams) -> bool:
    """Full pairwise validity: ball-ball, ball-strut, strut-strut clearances."""
    node_ids = sorted(z.nodes)
    pos = z.node_positions_mm(node_ids)
    min_bb = 2 * params.ball_radius_mm + params.clearance_mm
    if len(pos) > 1:
        tree = cKDTree(pos)
        pairs = tree.query_pairs(min_bb, output_type="ndarray")
        for i, j in pairs:
            if np.linalg.norm(pos[i] - pos[j]) < min_bb:
                return False
    strut_ids = sorted(z.struts)
    if not strut_ids:
        return True
    sa, sb = _strut_arrays(z, strut_ids)
    min_bs = params.ball_radius_mm + params.strut_radius_mm + params.clearance_mm
    for nidx, nid in enumerate(node_ids):
        d = point_segments_distance(pos[nidx], sa, sb)
        for k, sid in enumerate(strut_ids):
            s = z.struts[sid]
            if nid in (s.node_a, s.node_b):
                continue
            if d[k] < min_bs:
                return False
    min_ss = 2 * params.strut_radius_mm + params.clearance_mm
    for i, sid in enumerate(strut_ids):
        si = z.struts[sid]
        d = segment_segments_distance(sa[i], sb[i], sa[i + 1:], sb[i + 1:])
        for off, other in enumerate(strut_ids[i + 1:]):
            so = z.struts[other]
            if {si.node_a, si.node_b} & {so.node_a, so.node_b}:
                continue
            if d[off] < min_ss:
                return False
    return True


def _new_elements_collision_ok(z: ZomeStructure, params: CollisionParams,
                               new_node_ids=(), new_strut_ids=()) -> bool:
    """Check only the freshly added elements against the whole structure."""
    node_ids = sorted(z.nodes)
    pos_by_id = {nid: z.node_position_mm(nid) for nid in node_ids}
    strut_ids = sorted(z.struts)
    sa = sb = None
    if strut_ids:
        sa, sb = _strut_arrays(z, strut_ids)
    min_bb = 2 * params.ball_radius_mm + params.clearance_mm
    min_bs = params.ball_radius_mm + params.strut_radius_mm + params.clearance_mm
    min_ss = 2 * params.strut_radius_mm + params.clearance_mm

    for nid in new_node_ids:
        p = pos_by_id[nid]
        for other in node_ids:
            if other != nid and np.linalg.norm(pos_by_id[other] - p) < min_bb:
                return False
        if strut_ids:
            d = point_segments_distance(p, sa, sb)
            for k, sid in enumerate(strut_ids):
                s = z.struts[sid]
                if nid in (s.node_a, s.node_b):
                    continue
                if d[k] < min_bs:
                    return False

    for sid in new_strut_ids:
        s = z.struts[sid]
        p0, p1 = pos_by_id[s.node_a], pos_by_id[s.node_b]
        for other in node_ids:
            if other in (s.node_a, s.node_b):
                continue
            d = point_segments_distance(pos_by_id[other], p0[None, :], p1[None, :])
            if d[0] < min_bs:
                return False
        if strut_ids:
            d = segment_segments_distance(p0, p1, sa, sb)
            for k, other in enumerate(strut_ids):
                so = z.struts[other]
                if other == sid or {s.node_a, s.node_b} & {so.node_a, so.node_b}:
                    continue
                if d[k] < min_ss:
                    return False
    return True


# ------------------------------------------------------------ local operators


def _connected_excluding(z, start, goal, removed_strut_id, max_depth=None):
    """BFS shortest path length start->goal ignoring one strut; inf if cut."""
    frontier = [start]
    seen = {start}
    depth = 0
    while frontier:
        depth += 1
        if max_depth is not None and depth > max_depth:
            return math.inf
        nxt = []
        for nid in frontier:
            for d, sid in z.nodes[nid].slots.items():
                if sid == removed_strut_id:
                    continue
                s = z.struts[sid]
                other = s.node_b if s.node_a == nid else s.node_a
                if other == goal:
                    return depth
                if other not in seen:
                    seen.add(other)
                    nxt.append(other)
        frontier = nxt
    return math.inf


def _graph_distance(z, start, goal, cap):
    return _connected_excluding(z, start, goal, removed_strut_id=-1, max_depth=cap)


def _op_ins_node(z, rng, params):
    sites = [sid for sid in sorted(z.struts) if z.struts[sid].spec.size is StrutSize.L]
    if not sites:
        return None
    sid = sites[rng.integers(0, len(sites))]
    s = z.struts[sid]
    first_size = StrutSize.S if rng.integers(0, 2) == 0 else StrutSize.M
    second_size = StrutSize.M if first_size is StrutSize.S else StrutSize.S
    direction = slot_directions()[s.direction_index]
    mid_pos = z.nodes[s.node_a].position + strut_displacement(
        direction, StrutSpec(s.spec.color, first_size)
    )
    if z.node_at(mid_pos) is not None:
        return None
    z2 = z.copy()
    z2.remove_strut(sid)
    mid = z2.add_node(mid_pos)
    s1 = z2.add_strut(s.node_a, mid, StrutSpec(s.spec.color, first_size), s.direction_index)
    s2 = z2.add_strut(mid, s.node_b, StrutSpec(s.spec.color, second_size), s.direction_index)
    if not _new_elements_collision_ok(z2, params, new_node_ids=[mid],
                                      new_strut_ids=[s1, s2]):
        return None
    return z2


def _op_del_node(z, rng, params):
    sites = []
    for nid in sorted(z.nodes):
        node = z.nodes[nid]
        if node.valence != 2:
            continue
        (d1, sid1), (d2, sid2) = sorted(node.slots.items())
        if antipodal_index(d1) != d2:
            continue  # not collinear
        s1, s2 = z.struts[sid1], z.struts[sid2]
        if s1.spec.color is not s2.spec.color:
            continue
        if {s1.spec.size, s2.spec.size} != {StrutSize.S, StrutSize.M}:
            continue
        sites.append(nid)
    if not sites:
        return None
    nid = sites[rng.integers(0, len(sites))]
    node = z.nodes[nid]
    (d1, sid1), (d2, sid2) = sorted(node.slots.items())
    s1, s2 = z.struts[sid1], z.struts[sid2]
    x = s1.node_b if s1.node_a == nid else s1.node_a
    y = s2.node_b if s2.node_a == nid else s2.node_a
    # direction from x through nid to y
    dir_x_to_n = s1.direction_index if s1.node_a == x else antipodal_index(s1.direction_index)
    color = s1.spec.color
    z2 = z.copy()
    z2.remove_strut(sid1)
    z2.remove_strut(sid2)
    z2.remove_node(nid)
    try:
        z2.add_strut(x, y, StrutSpec(color, StrutSize.L), dir_x_to_n)
    except StructureError:
        return None
    return z2


def _insertion_candidates(z, rng, require_bridge):
    node_ids = sorted(z.nodes)
    a = node_ids[rng.integers(0, len(node_ids))]
    pos_a = z.nodes[a].position
    table = displacement_table()
    adjacent = set(z.neighbors(a))
    candidates = []
    for b in node_ids:
        if b == a or b in adjacent:
            continue
        offset = (z.nodes[b].position - pos_a).key()
        hit = table.get(offset)
        if hit is None:
            continue
        didx, spec = hit
        if didx in z.nodes[a].slots or antipodal_index(didx) in z.nodes[b].slots:
            continue
        if require_bridge and _graph_distance(z, a, b, cap=2) <= 2:
            continue
        candidates.append((a, b, didx, spec))
    return candidates


def _op_ins_strut(z, rng, params, require_bridge=False):
    candidates = _insertion_candidates(z, rng, require_bridge)
    if not candidates:
        return None
    a, b, didx, spec = candidates[rng.integers(0, len(candidates))]
    z2 = z.copy()
    sid = z2.add_strut(a, b, spec, didx)
    if not _new_elements_collision_ok(z2, params, new_strut_ids=[sid]):
        return None
    return z2


def _op_del_strut(z, rng, params, require_long_path=False):
    strut_ids = sorted(z.struts)
    if not strut_ids:
        return None
    sid = strut_ids[rng.integers(0, len(strut_ids))]
    s = z.struts[sid]
    path = _connected_excluding(z, s.node_a, s.node_b, sid)
    if math.isinf(path):
        return None  # would disconnect
    if require_long_path and path <= 2:
        return None
    z2 = z.copy()
    z2.remove_strut(sid)
    return z2


def apply_local_op(z: ZomeStructure, kind: str, rng,
                   params: CollisionParams) -> ZomeStructure | None:
    """One perturbation; returns the mutated copy or None when rejected
    (no applicable site, invalid geometry, disconnection, or collision)."""
    if kind == "InsNode":
        return _op_ins_node(z, rng, params)
    if kind == "DelNode":
        return _op_del_node(z, rng, params)
    if kind == "InsStrut":
        return _op_ins_strut(z, rng, params)
    if kind == "DelStrut":
        return _op_del_strut(z, rng, params)
    if kind == "InsBridge":
        return _op_ins_strut(z, rng, params, require_bridge=True)
    if kind == "DelBridge":
        return _op_del_strut(z, rng, params, require_long_path=True)
    raise ValueError(f"unknown operator kind: {kind}")


# ----------------------------------------------------------------- annealing


def metropolis_accept(delta_e: float, temperature: float, rng) -> bool:
    """Accept when a uniform draw falls below exp(-delta_e / T); improvements
    (delta_e < 0) always pass."""
    threshold = math.exp(min(-delta_e / temperature, 50.0))
    return rng.random() < threshold


def anneal(z_init: ZomeStructure, cache: FidelityCache, zone: ForbiddenZone,
           weights: EnergyWeights, target_tau: int, params: AnnealParams,
           collision: CollisionParams, trace=None) -> ZomeStructure:
    """Metropolis exploration with geometric cooling; collision-checked
    proposals; returns the best-energy state visited.

    The published loop tests CollisionFree on the pre-move state; the
    candidate state is what must be assemblable, so validity is enforced on
    the proposal (inside apply_local_op).
    """
    rng = np.random.default_rng(params.rng_seed)
    z = z_init.copy()
    energy = energy_total(z, cache, zone, weights, target_tau)
    best, best_energy = z.copy(), energy
    temperature = params.t_init
    iteration = 0
    while temperature >= params.t_end:
        iteration += 1
        kind = OP_KINDS[rng.integers(0, len(OP_KINDS))]
        proposal = apply_local_op(z, kind, rng, collision)
        accepted = False
        if proposal is not None:
            new_energy = energy_total(proposal, cache, zone, weights, target_tau)
            if metropolis_accept(new_energy - energy, temperature, rng):
                z, energy = proposal, new_energy
                accepted = True
                if energy < best_energy:
                    best, best_energy = z.copy(), energy
        if trace is not None:
            trace.append((iteration, temperature, energy, accepted))
        if iteration % params.iterations_per_step == 0:
            temperature *= params.cooling
    return best


# --------------------------------------------------------- target estimation


def shape_similarity(z: ZomeStructure, mesh, d_max_mm: float,
                     outer_ids=None) -> float:
    """Fraction of surface triangles whose centroid lies within d_max of some
    outermost node."""
    from .structure import classify_nodes

    if outer_ids is None:
        outer_ids, _ = classify_nodes(z)
    if not outer_ids:
        return 0.0
    tree = cKDTree(z.node_positions_mm(outer_ids))
    d, _ = tree.query(mesh.centroids)
    return float((d <= d_max_mm).mean())


class TauEstimationError(RuntimeError):
    def __init__(self, message, best_similarity, fallback_tau):
        super().__init__(message)
        self.best_similarity = best_similarity
        self.fallback_tau = fallback_tau


def estimate_target_tau(z_init: ZomeStructure, mesh, zone: ForbiddenZone,
                        collision: CollisionParams, similarity_threshold=0.9,
                        runs=10, rng_seed=0, max_ops_per_run=2000) -> int:
    """Target element count: 90% of the mean count at which random insertion
    growth first reaches the shape-similarity threshold."""
    insert_kinds = ("InsNode", "InsStrut", "InsBridge")
    counts = []
    best_similarity = 0.0
    for run in range(runs):
        rng = np.random.default_rng((rng_seed, run))
        z = z_init.copy()
        similarity = shape_similarity(z, mesh, zone.d_max)
        best_similarity = max(best_similarity, similarity)
        ops = 0
        stalled = 0
        while similarity < similarity_threshold and ops < max_ops_per_run:
            kind = insert_kinds[rng.integers(0, len(insert_kinds))]
            z2 = apply_local_op(z, kind, rng, collision)
            ops += 1
            if z2 is None:
                stalled += 1
                if stalled >= 30:  # no insertion site anywhere reachable
                    break
                continue
            stalled = 0
            z = z2
            similarity = shape_similarity(z, mesh, zone.d_max)
            best_similarity = max(best_similarity, similarity)
        if similarity < similarity_threshold:
            fallback = max(1, round(0.9 * z.element_count()))
            raise TauEstimationError(
                f"similarity threshold {similarity_threshold} unreachable "
                f"(best {best_similarity:.3f})",
                best_similarity, fallback,
            )
        counts.append(z.element_count())
    return max(1, round(0.9 * float(np.mean(counts))))
