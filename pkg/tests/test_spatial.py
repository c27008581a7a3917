import numpy as np
import pytest

from conftest import make_box, make_uv_sphere
from zomeshell.spatial import SurfaceQueryIndex, closest_points_on_triangles


def brute_force_nearest(p, mesh):
    tri = mesh.vertices[mesh.triangles]
    pts = closest_points_on_triangles(p, tri)
    d = np.linalg.norm(pts - p, axis=1)
    k = int(np.argmin(d))  # argmin takes the first (lowest id) on ties
    return pts[k], float(d[k]), k


def winding_number_inside(p, mesh):
    """Solid-angle winding oracle (van Oosterom & Strackee)."""
    tri = mesh.vertices[mesh.triangles] - np.asarray(p)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    la = np.linalg.norm(a, axis=1)
    lb = np.linalg.norm(b, axis=1)
    lc = np.linalg.norm(c, axis=1)
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = (
        la * lb * lc
        + np.einsum("ij,ij->i", a, b) * lc
        + np.einsum("ij,ij->i", b, c) * la
        + np.einsum("ij,ij->i", a, c) * lb
    )
    omega = 2 * np.arctan2(num, den)
    return abs(omega.sum() / (4 * np.pi)) > 0.5


@pytest.fixture(scope="module")
def cube_index():
    return SurfaceQueryIndex(make_box(1.0))


def test_nearest_at_cube_center(cube_index):
    _, d, _ = cube_index.nearest_surface([0, 0, 0])
    assert d == pytest.approx(0.5, abs=1e-12)


def test_nearest_at_vertex(cube_index):
    _, d, _ = cube_index.nearest_surface([0.5, 0.5, 0.5])
    assert d == pytest.approx(0.0, abs=1e-12)


def test_nearest_matches_brute_force():
    mesh = make_uv_sphere(5.0, segments=24, rings=16)
    index = SurfaceQueryIndex(mesh)
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = rng.uniform(-8, 8, size=3)
        _, d, tid = index.nearest_surface(p)
        _, bd, btid = brute_force_nearest(p, mesh)
        assert abs(d - bd) < 1e-9
        assert tid == btid


def test_nearest_centroid_matches_brute_force():
    mesh = make_uv_sphere(5.0, segments=16, rings=10)
    index = SurfaceQueryIndex(mesh)
    rng = np.random.default_rng(4)
    for _ in range(100):
        p = rng.uniform(-8, 8, size=3)
        d = index.nearest_centroid_distance(p)
        bd = np.linalg.norm(mesh.centroids - p, axis=1).min()
        assert abs(d - bd) < 1e-9


def test_nearest_centroid_at_centroid():
    mesh = make_box(2.0)
    index = SurfaceQueryIndex(mesh)
    assert index.nearest_centroid_distance(mesh.centroids[0]) == pytest.approx(0.0)


def test_cube_center_centroid_distance():
    mesh = make_box(1.0)
    index = SurfaceQueryIndex(mesh)
    want = np.linalg.norm(mesh.centroids, axis=1).min()
    assert index.nearest_centroid_distance([0, 0, 0]) == pytest.approx(want)


def test_inside_cube_center(cube_index):
    assert cube_index.is_inside([0, 0, 0])


def test_outside_bbox(cube_index):
    assert not cube_index.is_inside([10, 0, 0])


def test_inside_matches_winding_oracle():
    mesh = make_uv_sphere(5.0, segments=20, rings=14)
    index = SurfaceQueryIndex(mesh)
    rng = np.random.default_rng(11)
    points = rng.uniform(-7, 7, size=(1000, 3))
    for p in points:
        assert index.is_inside(p) == winding_number_inside(p, mesh)
