import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llab.mesh import (MeshError, MeshResourceError, check_mesh, is_connected, read_mesh,
                       triangulate_disk, write_mesh)


def polygon_area(mesh):
    # boundary nodes sorted by angle form the inscribed polygon
    b = mesh.nodes[mesh.boundary] - np.asarray(mesh.center)
    b = b[np.argsort(np.arctan2(b[:, 1], b[:, 0]))]
    x, y = b.T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def test_area_equals_inscribed_polygon(unit_mesh):
    assert unit_mesh.areas.sum() == pytest.approx(polygon_area(unit_mesh), rel=1e-12)
    assert unit_mesh.areas.sum() == pytest.approx(np.pi, rel=5e-3)


def test_structure(unit_mesh):
    check_mesh(unit_mesh)
    assert is_connected(unit_mesh)
    assert np.all(unit_mesh.signed_areas > 0)
    assert unit_mesh.edge_lengths().max() < 2 * unit_mesh.h


def test_refinement_patch_grades_toward_point():
    y = (0.3, -0.2)
    m = triangulate_disk(1.0, 0.05, refine=[y])
    check_mesh(m)
    d = np.linalg.norm(m.nodes - np.asarray(y), axis=1)
    near = np.sort(d)[1]
    assert d.min() < 1e-12
    assert near < 0.05 / 4


def test_offset_center():
    m = triangulate_disk(2.0, 0.2, center=(1.0, -1.0))
    check_mesh(m)
    r = np.linalg.norm(m.nodes - [1.0, -1.0], axis=1)
    assert r.max() == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(r[m.boundary], 2.0)


def test_invalid_parameters():
    with pytest.raises(MeshError):
        triangulate_disk(-1.0, 0.1)
    with pytest.raises(MeshError):
        triangulate_disk(1.0, 2.0)
    with pytest.raises(MeshResourceError):
        triangulate_disk(1.0, 1e-4)


def test_round_trip(tmp_path, coarse_mesh):
    path = tmp_path / "disk.mesh"
    write_mesh(coarse_mesh, path)
    m = read_mesh(path, h=coarse_mesh.h)
    assert np.array_equal(m.nodes, coarse_mesh.nodes)
    assert np.array_equal(m.triangles, coarse_mesh.triangles)
    assert np.array_equal(m.boundary, coarse_mesh.boundary)


def test_read_rejects_bad_index(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("nodes 3\n0 0 0\n1 0 1\n0 1 1\ntriangles 1\n0 1 7\n")
    with pytest.raises(MeshError):
        read_mesh(path)


def test_interpolation_is_exact_for_linear(unit_mesh, rng):
    x, y = unit_mesh.nodes.T
    u = 2 * x - 3 * y + 0.5
    pts = 0.9 * (rng.random((200, 2)) - 0.5)
    assert np.allclose(unit_mesh.interpolate(u, pts), 2 * pts[:, 0] - 3 * pts[:, 1] + 0.5,
                       atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(radius=st.floats(0.5, 3.0), ratio=st.floats(0.04, 0.25),
       cx=st.floats(-2, 2), cy=st.floats(-2, 2))
def test_random_disks_are_valid(radius, ratio, cx, cy):
    m = triangulate_disk(radius, ratio * radius, center=(cx, cy))
    check_mesh(m)
    assert m.areas.sum() == pytest.approx(polygon_area(m), rel=1e-10)
