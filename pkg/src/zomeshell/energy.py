"""Structure quality energies: fidelity with forbidden zone, strut-angle
regularity, node valence, and element-count simplicity."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .golden import antipodal_index, direction_angle_table
from .spatial import SurfaceQueryIndex
from .structure import ZomeStructure, classify_nodes


@dataclass(frozen=True)
class EnergyWeights:
    w_fid: float = 1.0
    w_reg: float = 100.0
    w_val: float = 1.0
    w_sim: float = 1.0

    def __post_init__(self):
        if min(self.w_fid, self.w_reg, self.w_val, self.w_sim) < 0:
            raise ValueError("energy weights must be non-negative")


@dataclass(frozen=True)
class ForbiddenZone:
    d_min: float = 16.0
    d_max: float = 47.3
    f_max: float = 70.0
    f_thick: float = 90.0

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ValueError("need 0 < d_min < d_max")
        if not (self.f_thick > self.f_max > 0):
            raise ValueError("need f_thick > f_max > 0")


def forbidden_zone_penalty(distance_mm: float, zone: ForbiddenZone) -> float:
    """Distance-band penalty: f_thick inside d_min, quadratic ramp from 0 at
    d_min to f_max at d_max, constant f_max beyond."""
    if distance_mm < zone.d_min:
        return zone.f_thick
    if distance_mm > zone.d_max:
        return zone.f_max
    u = (distance_mm - zone.d_min) / (zone.d_max - zone.d_min)
    return zone.f_max * u * u


class FidelityCache:
    """Per-exact-position cache of (surface distance, centroid distance);
    annealing revisits the same lattice positions constantly."""

    def __init__(self, index: SurfaceQueryIndex):
        self.index = index
        self._cache = {}

    def distances(self, z: ZomeStructure, node_id: int):
        key = z.nodes[node_id].position.key()
        val = self._cache.get(key)
        if val is None:
            p = z.node_position_mm(node_id)
            val = (self.index.distance(p), self.index.nearest_centroid_distance(p))
            self._cache[key] = val
        return val


def energy_fidelity(z: ZomeStructure, cache: FidelityCache, zone: ForbiddenZone,
                    outer_ids=None) -> float:
    """Mean squared surface distance of the outermost nodes, normalized by b0,
    amplified by the forbidden-zone penalty of each node."""
    if outer_ids is None:
        outer_ids, _ = classify_nodes(z)
    if not outer_ids:
        return 0.0
    total = 0.0
    for nid in outer_ids:
        surf_d, cen_d = cache.distances(z, nid)
        f = forbidden_zone_penalty(cen_d, zone)
        total += surf_d * surf_d * (1.0 + f)
    return total / (len(outer_ids) * z.b0_mm * z.b0_mm)


def energy_regularity(z: ZomeStructure) -> float:
    """Mean absolute deviation from 90 degrees of the angles each strut makes
    with the struts it shares a ball with.

    Uses |theta - pi/2| rather than the signed difference: a signed sum can go
    negative and would reward degenerate small angles.
    """
    angles = direction_angle_table()
    half_pi = math.pi / 2.0
    total = 0.0
    for s in z.struts.values():
        dev_sum = 0.0
        count = 0
        for node_id, out_dir in (
            (s.node_a, s.direction_index),
            (s.node_b, antipodal_index(s.direction_index)),
        ):
            for other_dir, other_sid in z.nodes[node_id].slots.items():
                if other_sid == s.strut_id:
                    continue
                dev_sum += abs(angles[out_dir][other_dir] - half_pi)
                count += 1
        if count:
            total += dev_sum / count
    return total


def energy_valence(z: ZomeStructure, inner_ids=None) -> float:
    """Quadratic penalty around the target valence 6, over internal nodes."""
    if inner_ids is None:
        _, inner_ids = classify_nodes(z)
    return sum((z.nodes[nid].valence - 6) ** 2 / 6.0 for nid in inner_ids)


def energy_simplicity(z: ZomeStructure, target_tau: int) -> float:
    """Squared deviation of the element count from the target, relative to it."""
    if target_tau <= 0:
        raise ValueError("target_tau must be positive")
    n = z.element_count()
    return (n - target_tau) ** 2 / target_tau


def energy_total(z: ZomeStructure, cache: FidelityCache, zone: ForbiddenZone,
                 weights: EnergyWeights, target_tau: int) -> float:
    outer_ids, inner_ids = classify_nodes(z)
    return (
        weights.w_fid * energy_fidelity(z, cache, zone, outer_ids)
        + weights.w_reg * energy_regularity(z)
        + weights.w_val * energy_valence(z, inner_ids)
        + weights.w_sim * energy_simplicity(z, target_tau)
    )


def energy_breakdown(z: ZomeStructure, cache: FidelityCache, zone: ForbiddenZone,
                     weights: EnergyWeights, target_tau: int) -> dict:
    outer_ids, inner_ids = classify_nodes(z)
    terms = {
        "fidelity": energy_fidelity(z, cache, zone, outer_ids),
        "regularity": energy_regularity(z),
        "valence": energy_valence(z, inner_ids),
        "simplicity": energy_simplicity(z, target_tau),
    }
    terms["total"] = (
        weights.w_fid * terms["fidelity"]
        + weights.w_reg * terms["regularity"]
        + weights.w_val * terms["valence"]
        + weights.w_sim * terms["simplicity"]
    )
    return terms
