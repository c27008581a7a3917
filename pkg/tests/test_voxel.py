import numpy as np
import pytest

from conftest import make_box, make_uv_sphere
from zomeshell.mesh import MeshError
from zomeshell.spatial import SurfaceQueryIndex
from zomeshell.voxel import VoxelBudgetError, boundary_surface, erode, voxelize


def test_voxelize_cube_block():
    grid = voxelize(make_box(100.0, center=(50, 50, 50)), 10.0)
    assert grid.occupied_count() == 1000
    occ = grid.occupancy
    # padding layers are empty
    assert not occ[0].any() and not occ[-1].any()
    assert occ[1:-1, 1:-1, 1:-1].all()


def test_voxelize_volume_vs_analytic_sphere():
    mesh = make_uv_sphere(32.0, segments=48, rings=32)
    grid = voxelize(mesh, 64.0 / 30)
    voxel_volume = grid.occupied_count() * grid.cell_size**3
    assert voxel_volume == pytest.approx(4 / 3 * np.pi * 32**3, rel=0.10)


def test_voxelize_budget():
    with pytest.raises(VoxelBudgetError):
        voxelize(make_box(100.0), 0.1, cell_budget=1000)


def test_voxelize_empty_region():
    grid = voxelize(make_box(10.0), 1.0)
    # corner regions far outside the box are empty
    assert not grid.occupancy[0, :, :].any()


def test_erode_zero_is_identity():
    grid = voxelize(make_box(20.0), 2.0)
    index = SurfaceQueryIndex(make_box(20.0))
    assert (erode(grid, 0.0, index=index).occupancy == grid.occupancy).all()


def test_erode_cube_16mm():
    # 100mm cube, cell 10: cell-center surface distances are 5, 15, 25, ...
    # erode 16 removes the two outer layers, leaving a 6x6x6 core.
    mesh = make_box(100.0, center=(50, 50, 50))
    grid = voxelize(mesh, 10.0)
    eroded = erode(grid, 16.0, index=SurfaceQueryIndex(mesh))
    assert eroded.occupied_count() == 6**3


def test_erode_one_layer():
    mesh = make_box(100.0, center=(50, 50, 50))
    grid = voxelize(mesh, 10.0)
    eroded = erode(grid, 10.0, index=SurfaceQueryIndex(mesh))
    assert eroded.occupied_count() == 8**3


def test_erode_everything():
    mesh = make_box(20.0)
    grid = voxelize(mesh, 2.0)
    eroded = erode(grid, 100.0, index=SurfaceQueryIndex(mesh))
    assert eroded.occupied_count() == 0


def test_boundary_surface_single_cell():
    mesh = make_box(1.0)
    grid = voxelize(mesh, 1.0)
    assert grid.occupied_count() == 1
    surf = boundary_surface(grid)
    assert len(surf.triangles) == 12
    assert surf.is_watertight()
    assert surf.signed_volume() == pytest.approx(1.0)


def test_boundary_surface_two_cells():
    mesh = make_box((2.0, 1.0, 1.0))
    grid = voxelize(mesh, 1.0)
    assert grid.occupied_count() == 2
    surf = boundary_surface(grid)
    # 2 cubes, shared face removed: 10 quads = 20 triangles
    assert len(surf.triangles) == 20
    assert surf.is_watertight()
    assert surf.signed_volume() == pytest.approx(2.0)


def test_boundary_surface_euler_genus0():
    mesh = make_uv_sphere(10.0, segments=24, rings=16)
    grid = voxelize(mesh, 1.5)
    surf = boundary_surface(grid)
    assert surf.is_watertight()
    v = len(surf.vertices)
    e = len({(min(a, b), max(a, b)) for a, b in surf.directed_edges()})
    f = len(surf.triangles)
    assert v - e + f == 2


def test_boundary_surface_diagonal_cells_manifold():
    """Two cells sharing only an edge must still give a valid 2-manifold."""
    from zomeshell.voxel import VoxelGrid

    occ = np.zeros((4, 4, 3), dtype=bool)
    occ[1, 1, 1] = True
    occ[2, 2, 1] = True
    grid = VoxelGrid(np.zeros(3), 1.0, occ)
    surf = boundary_surface(grid)
    assert len(surf.triangles) == 24
    assert surf.is_watertight()
    assert surf.signed_volume() == pytest.approx(2.0)


def test_boundary_surface_empty_grid():
    from zomeshell.voxel import VoxelGrid

    grid = VoxelGrid(np.zeros(3), 1.0, np.zeros((3, 3, 3), dtype=bool))
    with pytest.raises(MeshError):
        boundary_surface(grid)


def test_voxelize_boundary_surface_idempotent():
    mesh = make_uv_sphere(8.0, segments=20, rings=14)
    grid = voxelize(mesh, 1.6)
    surf = boundary_surface(grid)
    grid2 = voxelize(surf, 1.6)
    # same occupancy pattern (up to the padded origin shift)
    occ1 = np.argwhere(grid.occupancy)
    occ2 = np.argwhere(grid2.occupancy)
    c1 = grid.cell_centers(occ1)
    c2 = grid2.cell_centers(occ2)
    s1 = {tuple(np.round(c, 6)) for c in c1}
    s2 = {tuple(np.round(c, 6)) for c in c2}
    assert s1 == s2
