import math

import numpy as np
import pytest

from zomeshell.mesh import TriangleMesh


def make_box(size, center=(0.0, 0.0, 0.0)):
    """Axis-aligned box as a 12-triangle watertight mesh."""
    sx, sy, sz = (size, size, size) if np.isscalar(size) else size
    cx, cy, cz = center
    h = np.array([sx, sy, sz]) / 2.0
    corners = np.array(
        [[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float
    ) * h + [cx, cy, cz]
    # index bits: x<<2 | y<<1 | z
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append([a, b, c])
        tris.append([a, c, d])
    return TriangleMesh(corners, tris)


def make_uv_sphere(radius, segments=40, rings=26, center=(0.0, 0.0, 0.0)):
    """Lat-long sphere; segments*2*(rings-2) + 2*segments triangles."""
    verts = [np.array(center) + [0, 0, radius]]
    for r in range(1, rings):
        phi = math.pi * r / rings
        for s in range(segments):
            theta = 2 * math.pi * s / segments
            verts.append(
                np.array(center)
                + radius
                * np.array(
                    [
                        math.sin(phi) * math.cos(theta),
                        math.sin(phi) * math.sin(theta),
                        math.cos(phi),
                    ]
                )
            )
    verts.append(np.array(center) + [0, 0, -radius])
    top, bottom = 0, len(verts) - 1

    def ring_vert(r, s):
        return 1 + (r - 1) * segments + (s % segments)

    tris = []
    for s in range(segments):
        tris.append([top, ring_vert(1, s), ring_vert(1, s + 1)])
    for r in range(1, rings - 1):
        for s in range(segments):
            a = ring_vert(r, s)
            b = ring_vert(r, s + 1)
            c = ring_vert(r + 1, s)
            d = ring_vert(r + 1, s + 1)
            tris.append([a, d, b])
            tris.append([a, c, d])
    for s in range(segments):
        tris.append([bottom, ring_vert(rings - 1, s + 1), ring_vert(rings - 1, s)])
    return TriangleMesh(np.asarray(verts), np.asarray(tris))


@pytest.fixture(scope="session")
def unit_cube():
    return make_box(1.0)


@pytest.fixture(scope="session")
def sphere_150mm():
    return make_uv_sphere(150.0, segments=40, rings=26)


def write_obj_text(mesh, path):
    from zomeshell.mesh import save_obj

    save_obj(mesh, path)
    return path
