import numpy as np
import pytest

from cortexkit.errors import DataFormatError, UsageError
from cortexkit.mesh_io import load_mesh, load_obj, load_ply, save_mesh, save_obj, save_ply
from cortexkit.meshing import TriangleMesh


def test_ply_roundtrip_is_byte_stable(tmp_path, icosphere):
    mesh = icosphere(radius=2.5, subdivisions=1)
    p1 = str(tmp_path / "a.ply")
    p2 = str(tmp_path / "b.ply")
    save_ply(p1, mesh)
    back = load_ply(p1)
    save_ply(p2, back)
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()
    np.testing.assert_array_equal(back.faces, mesh.faces)
    # float32 storage: exact for float32-representable coordinates
    np.testing.assert_allclose(back.vertices, mesh.vertices, rtol=1e-6)


def test_ply_rejects_foreign_layouts(tmp_path, icosphere):
    mesh = icosphere(radius=1.0, subdivisions=0)
    path = str(tmp_path / "m.ply")
    save_ply(path, mesh)
    blob = (tmp_path / "m.ply").read_bytes()

    (tmp_path / "ascii.ply").write_bytes(blob.replace(b"binary_little_endian", b"ascii"))
    with pytest.raises(DataFormatError, match="little-endian"):
        load_ply(str(tmp_path / "ascii.ply"))

    (tmp_path / "layout.ply").write_bytes(blob.replace(b"property float x", b"property double x"))
    with pytest.raises(DataFormatError, match="vertex layout"):
        load_ply(str(tmp_path / "layout.ply"))

    (tmp_path / "notply").write_bytes(b"solid whatever\n")
    with pytest.raises(DataFormatError, match="not a PLY"):
        load_ply(str(tmp_path / "notply"))


def test_ply_rejects_truncation_and_quads(tmp_path, icosphere):
    mesh = icosphere(radius=1.0, subdivisions=0)
    path = str(tmp_path / "m.ply")
    save_ply(path, mesh)
    blob = (tmp_path / "m.ply").read_bytes()
    header_end = blob.find(b"end_header\n") + len(b"end_header\n")

    (tmp_path / "tv.ply").write_bytes(blob[: header_end + mesh.n_vertices * 12 - 4])
    with pytest.raises(DataFormatError, match="truncated vertex"):
        load_ply(str(tmp_path / "tv.ply"))

    (tmp_path / "tf.ply").write_bytes(blob[:-4])
    with pytest.raises(DataFormatError, match="truncated face"):
        load_ply(str(tmp_path / "tf.ply"))

    quad = bytearray(blob)
    quad[header_end + mesh.n_vertices * 12] = 4  # first face list count
    (tmp_path / "quad.ply").write_bytes(bytes(quad))
    with pytest.raises(DataFormatError, match="non-triangular"):
        load_ply(str(tmp_path / "quad.ply"))


def test_obj_roundtrip_exact(tmp_path, icosphere):
    # repr-formatted text keeps the full double precision
    mesh = icosphere(radius=np.pi, subdivisions=1)
    path = str(tmp_path / "m.obj")
    save_obj(path, mesh)
    back = load_obj(path)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.faces, mesh.faces)


def test_obj_rejects_malformed(tmp_path):
    (tmp_path / "v.obj").write_text("v 1.0 2.0\nf 1 2 3\n")
    with pytest.raises(DataFormatError, match="vertex line"):
        load_obj(str(tmp_path / "v.obj"))
    (tmp_path / "q.obj").write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n")
    with pytest.raises(DataFormatError, match="triangles"):
        load_obj(str(tmp_path / "q.obj"))


def test_mesh_dispatch_by_extension(tmp_path):
    mesh = TriangleMesh(
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        np.array([[0, 1, 2]], dtype=np.int32),
    )
    for name in ("m.ply", "m.obj"):
        path = str(tmp_path / name)
        save_mesh(path, mesh)
        back = load_mesh(path)
        assert back.n_faces == 1
    with pytest.raises(UsageError, match="ply or .obj"):
        save_mesh(str(tmp_path / "m.stl"), mesh)
    with pytest.raises(UsageError, match="ply or .obj"):
        load_mesh(str(tmp_path / "m.stl"))
