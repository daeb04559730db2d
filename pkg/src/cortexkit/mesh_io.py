"""Mesh file I/O.

The canonical on-disk format is binary little-endian PLY with float32
vertex positions and ``uchar count + int32`` face lists; writing and
re-reading a file reproduces it byte for byte. ASCII OBJ is provided for
interop with viewers and keeps full double precision in text.
"""

from __future__ import annotations

import numpy as np

from .errors import DataFormatError, UsageError
from .meshing import TriangleMesh

_PLY_HEADER = """ply
format binary_little_endian 1.0
comment cortexkit surface
element vertex {nv}
property float x
property float y
property float z
element face {nf}
property list uchar int vertex_indices
end_header
"""


def save_ply(path: str, mesh: TriangleMesh) -> None:
    header = _PLY_HEADER.format(nv=mesh.n_vertices, nf=mesh.n_faces)
    verts = np.asarray(mesh.vertices, dtype="<f4")
    faces = np.zeros((mesh.n_faces,), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
    faces["n"] = 3
    faces["idx"] = mesh.faces
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(verts.tobytes())
        f.write(faces.tobytes())


def load_ply(path: str) -> TriangleMesh:
    with open(path, "rb") as f:
        blob = f.read()
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply") or end < 0:
        raise DataFormatError(f"{path}: not a PLY file")
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    body = blob[end + len(b"end_header\n") :]

    fmt = next((ln.split()[1] for ln in header if ln.startswith("format ")), None)
    if fmt != "binary_little_endian":
        raise DataFormatError(f"{path}: only binary little-endian PLY is supported, got {fmt}")

    counts: dict[str, int] = {}
    props: dict[str, list[str]] = {}
    current = None
    for ln in header:
        parts = ln.split()
        if not parts:
            continue
        if parts[0] == "element":
            current = parts[1]
            counts[current] = int(parts[2])
            props[current] = []
        elif parts[0] == "property" and current is not None:
            props[current].append(" ".join(parts[1:]))
    if props.get("vertex") != ["float x", "float y", "float z"]:
        raise DataFormatError(f"{path}: unsupported vertex layout {props.get('vertex')}")
    if props.get("face") not in (["list uchar int vertex_indices"], ["list uchar int32 vertex_indices"]):
        raise DataFormatError(f"{path}: unsupported face layout {props.get('face')}")
    nv, nf = counts.get("vertex", 0), counts.get("face", 0)

    need = nv * 12
    if len(body) < need:
        raise DataFormatError(f"{path}: truncated vertex data")
    verts = np.frombuffer(body[:need], dtype="<f4").reshape(nv, 3)
    faces_raw = body[need:]
    rec = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
    if len(faces_raw) < nf * rec.itemsize:
        raise DataFormatError(f"{path}: truncated face data")
    recs = np.frombuffer(faces_raw[: nf * rec.itemsize], dtype=rec)
    if nf and not (recs["n"] == 3).all():
        raise DataFormatError(f"{path}: non-triangular faces are not supported")
    return TriangleMesh(verts.astype(np.float64), recs["idx"].astype(np.int32))


def save_obj(path: str, mesh: TriangleMesh) -> None:
    with open(path, "w") as f:
        f.write("# cortexkit surface\n")
        for x, y, z in mesh.vertices.tolist():
            f.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.faces + 1:
            f.write(f"f {a} {b} {c}\n")


def load_obj(path: str) -> TriangleMesh:
    verts = []
    faces = []
    with open(path) as f:
        for ln_no, ln in enumerate(f, 1):
            parts = ln.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    if len(parts) < 4:
                        raise DataFormatError(f"{path}:{ln_no}: malformed vertex line")
                    verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
                elif parts[0] == "f":
                    if len(parts) != 4:
                        raise DataFormatError(f"{path}:{ln_no}: only triangles are supported")
                    faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
            except ValueError as e:
                raise DataFormatError(f"{path}:{ln_no}: {e}") from e
    return TriangleMesh(
        np.asarray(verts, dtype=np.float64).reshape(-1, 3),
        np.asarray(faces, dtype=np.int32).reshape(-1, 3),
    )


def save_mesh(path: str, mesh: TriangleMesh) -> None:
    if path.endswith(".ply"):
        save_ply(path, mesh)
    elif path.endswith(".obj"):
        save_obj(path, mesh)
    else:
        raise UsageError(f"unknown mesh format for {path!r} (use .ply or .obj)")


def load_mesh(path: str) -> TriangleMesh:
    if path.endswith(".ply"):
        return load_ply(path)
    if path.endswith(".obj"):
        return load_obj(path)
    raise UsageError(f"unknown mesh format for {path!r} (use .ply or .obj)")
