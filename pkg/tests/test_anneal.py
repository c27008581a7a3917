import math

import numpy as np
import pytest

from zomeshell.anneal import (
    AnnealParams,
    CollisionParams,
    TauEstimationError,
    anneal,
    apply_local_op,
    collision_free,
    estimate_target_tau,
    metropolis_accept,
    point_segments_distance,
    segment_segments_distance,
    shape_similarity,
)
from zomeshell.energy import EnergyWeights, FidelityCache, ForbiddenZone
from zomeshell.golden import (
    GoldenNumber,
    GoldenVector,
    StrutColor,
    StrutSize,
    StrutSpec,
    axis_direction_indices,
    displacement_table,
    golden_vector_from_ints,
)
from zomeshell.spatial import SurfaceQueryIndex
from zomeshell.structure import ZomeStructure, init_structure

from conftest import make_box
from test_structure import B0, BLUE_S, make_grid_structure

COLL = CollisionParams()
BLUE_L = StrutSpec(StrutColor.BLUE, StrutSize.L)


def make_long_strut():
    """Two balls joined by a single Blue-L strut along +x."""
    z = ZomeStructure(B0)
    a = z.add_node(golden_vector_from_ints(0, 0, 0))
    phi_sq = GoldenVector(GoldenNumber(2, 2), GoldenNumber(0, 0), GoldenNumber(0, 0))
    b = z.add_node(phi_sq)
    z.add_strut(a, b, BLUE_L, axis_direction_indices()[(1, 0, 0)])
    return z


def make_square():
    """Unit square of four Blue-S struts."""
    z = ZomeStructure(B0)
    ids = [z.add_node(golden_vector_from_ints(*p))
           for p in [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]]
    axes = axis_direction_indices()
    z.add_strut(ids[0], ids[1], BLUE_S, axes[(1, 0, 0)])
    z.add_strut(ids[1], ids[2], BLUE_S, axes[(0, 1, 0)])
    z.add_strut(ids[3], ids[2], BLUE_S, axes[(1, 0, 0)])
    z.add_strut(ids[0], ids[3], BLUE_S, axes[(0, 1, 0)])
    return z


def make_triangle():
    """Blue-S base plus two Yellow-S legs through (1/2, 1/2, 1/2)."""
    z = ZomeStructure(B0)
    a = z.add_node(golden_vector_from_ints(0, 0, 0))
    b = z.add_node(golden_vector_from_ints(1, 0, 0))
    half = GoldenVector(GoldenNumber(1, 0), GoldenNumber(1, 0), GoldenNumber(1, 0))
    c = z.add_node(half)
    z.add_strut(a, b, BLUE_S, axis_direction_indices()[(1, 0, 0)])
    table = displacement_table()
    didx, spec = table[half.key()]
    z.add_strut(a, c, spec, didx)
    didx2, spec2 = table[(half - z.nodes[b].position).key()]
    z.add_strut(b, c, spec2, didx2)
    return z


def first_success(z, kind, tries=64, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(tries):
        out = apply_local_op(z, kind, rng, COLL)
        if out is not None:
            return out
    return None


class TestDistances:
    def test_point_to_segment(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[10.0, 0.0, 0.0]])
        assert point_segments_distance([5, 3, 0], a, b)[0] == pytest.approx(3.0)
        assert point_segments_distance([-4, 0, 3], a, b)[0] == pytest.approx(5.0)

    def test_segment_to_segments(self):
        a = np.array([[0.0, 0.0, 5.0], [20.0, 0.0, 0.0]])
        b = np.array([[10.0, 0.0, 5.0], [20.0, 10.0, 0.0]])
        d = segment_segments_distance([0, 0, 0], [10, 0, 0], a, b)
        assert d[0] == pytest.approx(5.0)  # parallel overlap
        assert d[1] == pytest.approx(10.0)  # endpoint to endpoint

    def test_crossing_segments(self):
        a = np.array([[5.0, -5.0, 1.0]])
        b = np.array([[5.0, 5.0, 1.0]])
        d = segment_segments_distance([0, 0, 0], [10, 0, 0], a, b)
        assert d[0] == pytest.approx(1.0)


class TestCollision:
    def test_lattice_is_collision_free(self):
        assert collision_free(make_grid_structure(3), COLL)

    def test_close_balls_collide(self):
        z = ZomeStructure(B0)
        z.add_node(golden_vector_from_ints(0, 0, 0))
        g = GoldenNumber(-2, 2)  # PHI - 1
        g4 = g * g * g * g  # about 0.146, i.e. 6.9 mm at b0
        z.add_node(GoldenVector(GoldenNumber(0, 0), g4, GoldenNumber(0, 0)))
        assert not collision_free(z, COLL)

    def test_touching_threshold_respects_clearance(self):
        params = CollisionParams(ball_radius_mm=9.2, strut_radius_mm=4.0,
                                 clearance_mm=40.0)
        # adjacent lattice balls are 47.3 mm apart < 2*9.2 + 40
        assert not collision_free(make_grid_structure(2), params)


class TestOperators:
    def test_ins_node_splits_long_strut(self):
        z = make_long_strut()
        z2 = first_success(z, "InsNode")
        assert z2 is not None
        assert len(z2.nodes) == 3 and len(z2.struts) == 2
        sizes = {s.spec.size for s in z2.struts.values()}
        assert sizes == {StrutSize.S, StrutSize.M}
        z2.validate()

    def test_del_node_merges_back(self):
        z2 = first_success(make_long_strut(), "InsNode")
        z3 = first_success(z2, "DelNode")
        assert z3 is not None
        assert len(z3.nodes) == 2 and len(z3.struts) == 1
        assert next(iter(z3.struts.values())).spec == BLUE_L
        z3.validate()

    def test_ins_node_needs_long_strut(self):
        rng = np.random.default_rng(0)
        assert apply_local_op(make_square(), "InsNode", rng, COLL) is None

    def test_del_node_needs_collinear_mixed_pair(self):
        rng = np.random.default_rng(0)
        assert apply_local_op(make_square(), "DelNode", rng, COLL) is None

    def test_ins_strut_closes_chain(self):
        z = make_square()
        z.remove_strut(3)  # leave an open chain of 3 struts
        z2 = first_success(z, "InsStrut")
        assert z2 is not None
        assert len(z2.struts) == 4
        z2.validate()

    def test_ins_bridge_requires_distance_over_two(self):
        z = make_square()
        z.remove_strut(3)
        # the only candidate pair is 3 hops apart, so InsBridge also applies
        z2 = first_success(z, "InsBridge")
        assert z2 is not None and len(z2.struts) == 4
        # on the closed square every non-adjacent pair is 2 hops: no bridge
        rng = np.random.default_rng(0)
        for _ in range(32):
            assert apply_local_op(make_square(), "InsBridge", rng, COLL) is None

    def test_del_strut_keeps_connectivity(self):
        z2 = first_success(make_square(), "DelStrut")
        assert z2 is not None
        assert len(z2.struts) == 3
        z2.validate()

    def test_del_strut_refuses_to_disconnect(self):
        z = make_square()
        z.remove_strut(3)
        rng = np.random.default_rng(0)
        for _ in range(32):
            assert apply_local_op(z, "DelStrut", rng, COLL) is None

    def test_del_bridge_requires_long_alternative(self):
        z2 = first_success(make_square(), "DelBridge")
        assert z2 is not None  # alternative path has 3 hops
        rng = np.random.default_rng(0)
        for _ in range(32):  # triangle alternatives are 2 hops
            assert apply_local_op(make_triangle(), "DelBridge", rng, COLL) is None

    def test_unknown_kind_raises(self):
        with pytest.raises(ValueError):
            apply_local_op(make_square(), "Wiggle", np.random.default_rng(0), COLL)


class TestMetropolis:
    def test_improvements_always_accepted(self):
        rng = np.random.default_rng(7)
        assert all(metropolis_accept(-0.1, 0.5, rng) for _ in range(1000))

    def test_acceptance_rate_matches_boltzmann(self):
        rng = np.random.default_rng(123)
        n = 100_000
        hits = sum(metropolis_accept(0.5, 1.0, rng) for _ in range(n))
        p = math.exp(-0.5)
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) <= 3 * sigma

    def test_cold_system_rejects_uphill(self):
        rng = np.random.default_rng(0)
        assert not any(metropolis_accept(5.0, 0.01, rng) for _ in range(1000))


@pytest.fixture(scope="module")
def cube_setup():
    mesh = make_box(160.0)
    index = SurfaceQueryIndex(mesh)
    z = init_structure(mesh, b0_mm=B0, d_min_mm=16.0, index=index)
    return mesh, index, z


class TestAnneal:
    def test_short_run_returns_valid_structure(self, cube_setup):
        _, index, z = cube_setup
        params = AnnealParams(t_init=1.0, t_end=0.9, cooling=0.95,
                              iterations_per_step=20, rng_seed=1)
        trace = []
        best = anneal(z, FidelityCache(index), ForbiddenZone(), EnergyWeights(),
                      target_tau=73, params=params, collision=COLL, trace=trace)
        best.validate()
        assert collision_free(best, COLL)
        assert len(trace) >= 40
        assert all(t[1] >= 0.9 for t in trace)

    def test_determinism(self, cube_setup):
        _, index, z = cube_setup
        params = AnnealParams(t_init=1.0, t_end=0.9, cooling=0.95,
                              iterations_per_step=20, rng_seed=42)

        def run():
            return anneal(z, FidelityCache(index), ForbiddenZone(),
                          EnergyWeights(), target_tau=73, params=params,
                          collision=COLL).to_json()

        assert run() == run()

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            AnnealParams(cooling=1.5)
        with pytest.raises(ValueError):
            AnnealParams(t_init=0.1, t_end=1.0)


class TestTauEstimation:
    def test_similarity_bounds(self, ):
        mesh = make_box(160.0)
        z = init_structure(mesh, b0_mm=B0, d_min_mm=16.0)
        s = shape_similarity(z, mesh, d_max_mm=47.3)
        assert 0.0 < s <= 1.0
        assert shape_similarity(z, mesh, d_max_mm=1e6) == 1.0

    def test_trivial_threshold_uses_initial_count(self):
        mesh = make_box(160.0)
        z = init_structure(mesh, b0_mm=B0, d_min_mm=16.0)
        tau = estimate_target_tau(z, mesh, ForbiddenZone(), COLL,
                                  similarity_threshold=0.0, runs=3)
        assert tau == round(0.9 * z.element_count())

    def test_unreachable_threshold_raises_with_fallback(self):
        mesh = make_box(160.0)
        z = init_structure(mesh, b0_mm=B0, d_min_mm=16.0)
        # a tiny coverage radius keeps most centroids uncovered, and the pure
        # cube lattice offers no growth site that could change that
        tight = ForbiddenZone(d_min=1.0, d_max=2.0, f_max=70.0, f_thick=90.0)
        with pytest.raises(TauEstimationError) as exc:
            estimate_target_tau(z, mesh, tight, COLL,
                                similarity_threshold=0.9, runs=1,
                                max_ops_per_run=40)
        assert exc.value.fallback_tau >= 1
        assert 0.0 <= exc.value.best_similarity < 0.9
