import numpy as np
import pytest

from cortexkit.grid import ScalarField, VoxelGrid
from cortexkit.meshing import TriangleMesh

_PHI = (1.0 + 5.0**0.5) / 2.0

_ICO_VERTS = np.array(
    [
        (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
        (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
        (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
    ],
    dtype=np.float64,
)

_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    dtype=np.int64,
)


def _subdivide(verts, faces):
    verts = list(map(tuple, verts))
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            verts.append(tuple((np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.asarray(verts, dtype=np.float64), np.asarray(out, dtype=np.int64)


def make_icosphere(radius=1.0, center=(0.0, 0.0, 0.0), subdivisions=2) -> TriangleMesh:
    """Outward-oriented, closed genus-0 triangulation of a sphere."""
    verts, faces = _ICO_VERTS.copy(), _ICO_FACES.copy()
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return TriangleMesh(np.asarray(center) + radius * verts, faces)


def field_from(fn, dims=(32, 32, 32), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> ScalarField:
    """Evaluate fn(x, y, z) on voxel centers (world mm) as a scalar field."""
    axes = [origin[i] + np.arange(dims[i]) * spacing[i] for i in range(3)]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    return ScalarField(VoxelGrid(fn(x, y, z).astype(np.float64), spacing, origin))


def sphere_sdf(center, radius):
    cx, cy, cz = center

    def fn(x, y, z):
        return np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) - radius

    return fn


def torus_sdf(center, ring_radius, tube_radius):
    """Distance to a torus with its axis along z."""
    cx, cy, cz = center

    def fn(x, y, z):
        q = np.sqrt((x - cx) ** 2 + (y - cy) ** 2) - ring_radius
        return np.sqrt(q**2 + (z - cz) ** 2) - tube_radius

    return fn


def two_ball_sdf(c1, r1, c2, r2):
    f1, f2 = sphere_sdf(c1, r1), sphere_sdf(c2, r2)

    def fn(x, y, z):
        return np.minimum(f1(x, y, z), f2(x, y, z))

    return fn


@pytest.fixture
def icosphere():
    return make_icosphere


@pytest.fixture
def rng():
    return np.random.default_rng(20260825)


@pytest.fixture
def sphere_field():
    def make(dims=(24, 24, 24)):
        c = tuple((d - 1) / 2.0 for d in dims)
        return field_from(sphere_sdf(c, min(dims) / 3.5), dims)

    return make


@pytest.fixture
def torus_field():
    def make(dims=(32, 32, 20)):
        c = tuple((d - 1) / 2.0 for d in dims)
        return field_from(torus_sdf(c, dims[0] / 4.0, dims[2] / 6.0), dims)

    return make


@pytest.fixture
def two_ball_field():
    def make(dims=(24, 24, 24)):
        cy, cz = (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0
        r = dims[0] / 6.5
        c1 = (dims[0] / 3.0, cy, cz)
        c2 = (2.0 * dims[0] / 3.0, cy, cz)
        return field_from(two_ball_sdf(c1, r, c2, r), dims)

    return make
