"""Triangle meshes: level-set extraction, smoothing, diagnostics, sampling.

Extraction walks the voxel cells of a scalar field and emits the iso
surface with vertices welded through global cell-edge keys, so the mesh is
watertight wherever the surface stays off the grid boundary. A voxel is
inside when its value is strictly below the level. Triangles wind so that
normals point toward increasing field values; for signed distance fields
(negative inside) that is outward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from . import mc_tables
from ._kernels import kernels
from .errors import DegenerateInputError, UsageError, ValidationError
from .grid import ScalarField


class TriangleMesh:
    """Vertices (V, 3) float64 in world mm and faces (F, 3) int32."""

    __slots__ = ("vertices", "faces")

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise UsageError(f"vertices must be (V, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise UsageError(f"faces must be (F, 3), got {self.faces.shape}")
        if not np.isfinite(self.vertices).all():
            raise ValidationError("mesh has non-finite vertices")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValidationError("face indices out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, each row sorted, rows lexicographic."""
        if not self.faces.size:
            return np.zeros((0, 2), dtype=np.int32)
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def face_normals(self, normalize: bool = True) -> np.ndarray:
        v = self.vertices
        f = self.faces
        n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        if normalize:
            lens = np.linalg.norm(n, axis=1)
            n = n / np.where(lens > 0, lens, 1.0)[:, None]
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalize=False), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            raise DegenerateInputError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def with_vertices(self, vertices) -> "TriangleMesh":
        return TriangleMesh(vertices, self.faces)


@dataclass(frozen=True)
class MeshDiagnostics:
    vertex_count: int
    edge_count: int
    face_count: int
    euler_characteristic: int
    component_count: int
    is_closed: bool
    is_oriented: bool
    genus: int | None  # total handle count across components; None when open


def diagnostics(mesh: TriangleMesh) -> MeshDiagnostics:
    """Combinatorial surface checks.

    ``is_closed``: every edge borders exactly two faces. ``is_oriented``:
    each directed half edge appears exactly once (so the two faces at an
    edge traverse it oppositely). ``genus`` is derived from the Euler
    characteristic and only reported for closed oriented meshes.
    """
    v_count = mesh.n_vertices
    f = mesh.faces
    if not f.size:
        return MeshDiagnostics(v_count, 0, 0, v_count, v_count, False, False, None)
    halves = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(halves, axis=1)
    edges, edge_face_count = np.unique(und, axis=0, return_counts=True)
    e_count = len(edges)
    f_count = len(f)
    euler = v_count - e_count + f_count
    closed = bool((edge_face_count == 2).all())
    directed_count = np.unique(halves, axis=0, return_counts=True)[1]
    oriented = bool((directed_count == 1).all())
    adj = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(v_count, v_count)
    )
    n_comp = int(connected_components(adj, directed=False)[0])
    genus = None
    if closed and oriented:
        g2 = 2 * n_comp - euler
        if g2 >= 0 and g2 % 2 == 0:
            genus = g2 // 2
    return MeshDiagnostics(v_count, e_count, f_count, euler, n_comp, closed, oriented, genus)


def marching_cubes(fld: ScalarField, iso: float) -> TriangleMesh:
    """Extract the level surface of a scalar field at ``iso``.

    Raises DegenerateInputError when no cell straddles the level (all
    values on one side) or the grid has fewer than 2 voxels on an axis.
    """
    values = fld.data
    grid = fld.grid
    nx, ny, nz = values.shape
    if min(nx, ny, nz) < 2:
        raise DegenerateInputError("grid too small to carry a surface")
    inside = (values < iso).astype(np.uint8)
    cfg = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.uint8)
    for bit in range(8):
        dx, dy, dz = mc_tables.CORNER_OFFSET[bit]
        cfg |= inside[dx : dx + nx - 1, dy : dy + ny - 1, dz : dz + nz - 1] << np.uint8(bit)
    active = mc_tables.TRI_COUNT[cfg] > 0
    ax, ay, az = np.nonzero(active)
    if not len(ax):
        raise DegenerateInputError(f"no cell crosses the level {iso}")
    keys = kernels.mc_emit(
        ax.astype(np.int64),
        ay.astype(np.int64),
        az.astype(np.int64),
        cfg[active].astype(np.int32),
        ny,
        nz,
    )
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
    faces = inverse.reshape(-1, 3).astype(np.int32)

    axis = (uniq % 3).astype(np.int64)
    lin = uniq // 3
    gz = lin % nz
    gy = (lin // nz) % ny
    gx = lin // (nz * ny)
    v0 = values[gx, gy, gz]
    v1 = values[gx + (axis == 0), gy + (axis == 1), gz + (axis == 2)]
    t = (iso - v0) / (v1 - v0)
    pos = np.stack([gx, gy, gz], axis=1).astype(np.float64)
    pos[np.arange(len(uniq)), axis] += t
    spacing = np.asarray(grid.spacing)
    origin = np.asarray(grid.origin)
    return TriangleMesh(origin + pos * spacing, faces)


def laplacian_smooth(mesh: TriangleMesh, iterations: int = 5, step: float = 0.5) -> TriangleMesh:
    """Uniform-weight Laplacian smoothing: v <- v + step * (nbr mean - v)."""
    if iterations < 0:
        raise UsageError("iterations must be non-negative")
    if not 0.0 <= step <= 1.0:
        raise UsageError(f"step must lie in [0, 1], got {step}")
    if iterations == 0 or not mesh.faces.size:
        return TriangleMesh(mesh.vertices, mesh.faces)
    edges = mesh.edges()
    n = mesh.n_vertices
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    deg = np.asarray(adj.sum(axis=1)).ravel()
    scale = 1.0 / np.where(deg > 0, deg, 1.0)
    moves = deg > 0
    v = mesh.vertices.copy()
    for _ in range(iterations):
        mean = adj @ v * scale[:, None]
        v = np.where(moves[:, None], v + step * (mean - v), v)
    return TriangleMesh(v, mesh.faces)


def sample_surface_points(mesh: TriangleMesh, n: int, seed) -> np.ndarray:
    """Draw ``n`` points uniformly by area from the mesh surface.

    ``seed`` may be anything ``np.random.default_rng`` accepts, including a
    Generator (used as is, which lets callers manage streams).
    """
    if n < 0:
        raise UsageError("sample count must be non-negative")
    areas = mesh.face_areas()
    total = float(areas.sum())
    if total <= 0.0:
        raise DegenerateInputError("mesh has no positive-area faces to sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(len(areas), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tri = mesh.vertices[mesh.faces[idx]]
    return tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])


def merge_meshes(meshes) -> TriangleMesh:
    """Concatenate meshes into one, offsetting face indices."""
    meshes = list(meshes)
    if not meshes:
        raise UsageError("nothing to merge")
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriangleMesh(np.concatenate(verts), np.concatenate(faces))
