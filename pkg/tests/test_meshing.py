import numpy as np
import pytest

from conftest import field_from, make_icosphere, sphere_sdf, torus_sdf, two_ball_sdf
from cortexkit.errors import DegenerateInputError, UsageError, ValidationError
from cortexkit.meshing import (
    TriangleMesh,
    diagnostics,
    laplacian_smooth,
    marching_cubes,
    merge_meshes,
    sample_surface_points,
)


def test_mesh_validation():
    verts = np.zeros((3, 3))
    verts[1, 0] = 1.0
    verts[2, 1] = 1.0
    TriangleMesh(verts, [[0, 1, 2]])  # fine
    with pytest.raises(ValidationError):
        TriangleMesh(verts, [[0, 1, 3]])
    with pytest.raises(ValidationError):
        TriangleMesh(verts, [[0, 1, -1]])
    with pytest.raises(UsageError):
        TriangleMesh(verts[:, :2], [[0, 1, 2]])


def test_icosphere_fixture_is_sound():
    mesh = make_icosphere(radius=2.0, center=(1, 2, 3), subdivisions=2)
    d = diagnostics(mesh)
    assert d.is_closed and d.is_oriented
    assert d.euler_characteristic == 2 and d.genus == 0
    assert d.component_count == 1
    # all faces wound outward
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    outward = ((centroids - (1, 2, 3)) * mesh.face_normals()).sum(axis=1)
    assert (outward > 0).all()


def test_marching_cubes_sphere_geometry():
    fld = field_from(sphere_sdf((15.0, 15.0, 15.0), 8.0), dims=(31, 31, 31))
    mesh = marching_cubes(fld, 0.0)
    d = diagnostics(mesh)
    assert d.is_closed and d.is_oriented and d.genus == 0 and d.component_count == 1
    radii = np.linalg.norm(mesh.vertices - 15.0, axis=1)
    assert np.abs(radii - 8.0).max() < 0.15  # linear interp on an exact field
    # normals point along increasing field values (outward here)
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    outward = ((centroids - 15.0) * mesh.face_normals()).sum(axis=1)
    assert (outward > 0).all()


def test_marching_cubes_levels_move_surface():
    fld = field_from(sphere_sdf((15.0, 15.0, 15.0), 8.0), dims=(31, 31, 31))
    inner = marching_cubes(fld, -2.0)
    outer = marching_cubes(fld, 2.0)
    assert np.linalg.norm(inner.vertices - 15.0, axis=1).max() < 6.3
    assert np.linalg.norm(outer.vertices - 15.0, axis=1).min() > 9.7


def test_marching_cubes_torus_genus():
    fld = field_from(torus_sdf((16.0, 16.0, 10.0), 7.0, 3.0), dims=(33, 33, 21))
    d = diagnostics(marching_cubes(fld, 0.0))
    assert d.is_closed and d.is_oriented
    assert d.euler_characteristic == 0 and d.genus == 1


def test_marching_cubes_two_components():
    fld = field_from(two_ball_sdf((8, 10, 10), 4.0, (22, 10, 10), 4.0), dims=(31, 21, 21))
    d = diagnostics(marching_cubes(fld, 0.0))
    assert d.component_count == 2
    assert d.euler_characteristic == 4  # two spheres
    assert d.genus == 0


def test_marching_cubes_respects_geometry():
    fld = field_from(
        sphere_sdf((10.0, 21.0, 6.0), 4.0),
        dims=(21, 43, 13),
        spacing=(1.0, 0.5, 1.0),
        origin=(0.0, 10.5, 0.0),
    )
    mesh = marching_cubes(fld, 0.0)
    radii = np.linalg.norm(mesh.vertices - (10.0, 21.0, 6.0), axis=1)
    assert np.abs(radii - 4.0).max() < 0.2


def test_marching_cubes_rejects_inactive_fields():
    flat = field_from(lambda x, y, z: np.ones_like(x), dims=(8, 8, 8))
    with pytest.raises(DegenerateInputError):
        marching_cubes(flat, 0.0)


def test_laplacian_smooth_contracts_sphere():
    mesh = make_icosphere(radius=5.0, subdivisions=2)
    out = laplacian_smooth(mesh, iterations=5, step=0.5)
    assert out.n_vertices == mesh.n_vertices
    r_in = np.linalg.norm(mesh.vertices, axis=1)
    r_out = np.linalg.norm(out.vertices, axis=1)
    assert (r_out < r_in).all()
    assert r_out.min() > 4.0  # gentle, not collapsing
    same = laplacian_smooth(mesh, iterations=0, step=0.5)
    np.testing.assert_array_equal(same.vertices, mesh.vertices)
    with pytest.raises(UsageError):
        laplacian_smooth(mesh, iterations=3, step=1.5)


def test_sample_surface_points_single_triangle():
    mesh = TriangleMesh([[0, 0, 0], [2, 0, 0], [0, 2, 0]], [[0, 1, 2]])
    pts = sample_surface_points(mesh, 500, np.random.default_rng(0))
    assert pts.shape == (500, 3)
    assert (pts[:, 2] == 0).all()
    assert (pts[:, 0] >= 0).all() and (pts[:, 1] >= 0).all()
    assert (pts[:, 0] + pts[:, 1] <= 2 + 1e-12).all()


def test_sample_surface_points_area_weighted():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [10, 10, 0], [13, 10, 0], [10, 13, 0]]
    faces = [[0, 1, 2], [3, 4, 5]]  # areas 0.5 and 4.5
    mesh = TriangleMesh(verts, faces)
    pts = sample_surface_points(mesh, 20000, np.random.default_rng(3))
    frac_big = (pts[:, 0] > 5).mean()
    assert abs(frac_big - 0.9) < 0.02
    # integer seeds accepted too
    pts2 = sample_surface_points(mesh, 100, 7)
    pts3 = sample_surface_points(mesh, 100, 7)
    np.testing.assert_array_equal(pts2, pts3)


def test_merge_meshes():
    a = make_icosphere(radius=1.0, subdivisions=1)
    b = make_icosphere(radius=1.0, center=(5, 0, 0), subdivisions=1)
    m = merge_meshes([a, b])
    assert m.n_vertices == a.n_vertices + b.n_vertices
    assert m.n_faces == a.n_faces + b.n_faces
    d = diagnostics(m)
    assert d.component_count == 2 and d.euler_characteristic == 4


def test_diagnostics_open_and_unoriented():
    open_mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    d = diagnostics(open_mesh)
    assert not d.is_closed
    assert d.genus is None
    # two faces sharing an edge with inconsistent winding
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    bad = TriangleMesh(verts, [[0, 1, 2], [1, 3, 2], [2, 3, 1]])
    assert not diagnostics(bad).is_oriented
