"""Uniform voxel grids and the field-level operations built on them.

Conventions used throughout the package:

* grids are axis-aligned with strictly positive per-axis spacing in mm;
* ``data`` is indexed ``[i, j, k]`` for the x/y/z axes, one value per voxel
  (vector fields carry a trailing component axis of size 3);
* the world coordinate of voxel ``(i, j, k)`` is
  ``origin + (i * sx, j * sy, k * sz)`` -- origins address voxel centers;
* serialization flattens x-fastest (Fortran order over ``(nx, ny, nz)``).

Signed distance fields are negative inside the generating mask and positive
outside, so lowering an iso-value moves the extracted surface inward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, UsageError, ValidationError

# Nine-class label convention: 0 background, then per hemisphere
# white matter / cortex / amygdala-hippocampus / lateral ventricle.
LABEL_NAMES = {
    0: "background",
    1: "lh_white_matter",
    2: "lh_cortex",
    3: "lh_amygdala_hippocampus",
    4: "lh_ventricle",
    5: "rh_white_matter",
    6: "rh_cortex",
    7: "rh_amygdala_hippocampus",
    8: "rh_ventricle",
}
MAX_LABEL = 8

_HEMI_LABELS = {
    "lh": {"white_matter": 1, "cortex": 2, "amygdala_hippocampus": 3, "ventricle": 4},
    "rh": {"white_matter": 5, "cortex": 6, "amygdala_hippocampus": 7, "ventricle": 8},
}


def pial_label_set(hemisphere: str) -> frozenset[int]:
    """Union of white matter, cortex, and ventricle for one hemisphere."""
    h = _HEMI_LABELS[hemisphere]
    return frozenset({h["white_matter"], h["cortex"], h["ventricle"]})


def white_label_set(hemisphere: str) -> frozenset[int]:
    """Union of white matter and ventricle for one hemisphere."""
    h = _HEMI_LABELS[hemisphere]
    return frozenset({h["white_matter"], h["ventricle"]})


@dataclass
class VoxelGrid:
    """Dense uniform grid: geometry plus one (or three) values per voxel."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim not in (3, 4):
            raise UsageError(f"grid data must be 3D or 3D+components, got shape {self.data.shape}")
        if self.data.ndim == 4 and self.data.shape[3] != 3:
            raise UsageError(f"vector grids need 3 components, got {self.data.shape[3]}")
        if min(self.data.shape[:3]) < 1:
            raise UsageError(f"grid dims must be positive, got {self.data.shape[:3]}")
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise UsageError(f"spacing must be three positive values, got {self.spacing}")
        if len(self.origin) != 3:
            raise UsageError(f"origin must have three components, got {self.origin}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape[:3]

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def voxel_to_world(self, ijk) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(ijk, dtype=np.float64) * np.asarray(self.spacing)

    def world_to_voxel(self, xyz) -> np.ndarray:
        return (np.asarray(xyz, dtype=np.float64) - np.asarray(self.origin)) / np.asarray(self.spacing)

    def world_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin, dtype=np.float64)
        hi = lo + (np.asarray(self.dims) - 1) * np.asarray(self.spacing)
        return lo, hi

    def same_geometry(self, other: "VoxelGrid") -> bool:
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
        )

    def with_data(self, data: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(data, self.spacing, self.origin)


@dataclass
class LabelVolume:
    """Integer segmentation map with values restricted to 0..8."""

    grid: VoxelGrid

    def __post_init__(self):
        data = self.grid.data
        if not np.issubdtype(data.dtype, np.integer):
            raise ValidationError(f"label volume must be integer-typed, got {data.dtype}")
        bad = (data < 0) | (data > MAX_LABEL)
        if bad.any():
            idx = tuple(int(v) for v in np.argwhere(bad)[0])
            raise ValidationError(
                f"label {int(data[idx])} at voxel {idx} outside the allowed range 0..{MAX_LABEL}"
            )


@dataclass
class BinaryMask:
    """Boolean voxel mask; remembers the label set it was derived from."""

    grid: VoxelGrid
    source_labels: frozenset[int] | None = None

    def __post_init__(self):
        if self.grid.data.dtype != np.bool_:
            self.grid = self.grid.with_data(self.grid.data.astype(bool))


@dataclass
class ScalarField:
    """Real-valued voxel field (mm for distance fields)."""

    grid: VoxelGrid

    def __post_init__(self):
        data = self.grid.data
        if data.ndim != 3:
            raise UsageError(f"scalar field must be 3D, got shape {data.shape}")
        if data.dtype != np.float64:
            self.grid = self.grid.with_data(data.astype(np.float64))
        if not np.isfinite(self.grid.data).all():
            raise ValidationError("scalar field contains non-finite values")

    @property
    def data(self) -> np.ndarray:
        return self.grid.data


def build_mask(labels: LabelVolume, label_set) -> BinaryMask:
    """Voxelwise membership mask: true where the label is in ``label_set``."""
    label_set = frozenset(int(v) for v in label_set)
    if not label_set:
        raise UsageError("label_set must be nonempty")
    if not label_set <= set(range(MAX_LABEL + 1)):
        raise UsageError(f"label_set {sorted(label_set)} not a subset of 0..{MAX_LABEL}")
    data = np.isin(labels.grid.data, sorted(label_set))
    return BinaryMask(labels.grid.with_data(data), source_labels=label_set)


_CONNECTIVITY_ORDER = {6: 1, 18: 2, 26: 3}


def largest_component(mask: BinaryMask, connectivity: int = 26) -> BinaryMask:
    """Keep only the connected component with the most voxels.

    Ties are broken by the smallest linear (x-fastest) voxel index contained
    in the component. An all-false mask is returned unchanged.
    """
    if connectivity not in _CONNECTIVITY_ORDER:
        raise UsageError(f"connectivity must be 6, 18, or 26, got {connectivity}")
    data = mask.grid.data
    if not data.any():
        return BinaryMask(mask.grid.with_data(data.copy()), mask.source_labels)
    structure = ndimage.generate_binary_structure(3, _CONNECTIVITY_ORDER[connectivity])
    labeled, n = ndimage.label(data, structure=structure)
    counts = np.bincount(labeled.ravel())
    counts[0] = 0
    best = counts.max()
    candidates = np.flatnonzero(counts == best)
    if len(candidates) > 1:
        # x-fastest linear order decides the winner
        flat = labeled.ravel(order="F")
        first = {int(c): int(np.argmax(flat == c)) for c in candidates}
        winner = min(candidates, key=lambda c: first[int(c)])
    else:
        winner = candidates[0]
    return BinaryMask(mask.grid.with_data(labeled == winner), mask.source_labels)


def signed_distance(mask: BinaryMask) -> ScalarField:
    """Exact Euclidean signed distance in mm, negative inside the mask.

    Inside voxels carry minus the distance to the nearest outside voxel
    center; outside voxels carry the distance to the nearest inside voxel
    center.
    """
    data = mask.grid.data
    n_true = int(data.sum())
    if n_true == 0 or n_true == data.size:
        raise DegenerateInputError("signed distance needs both inside and outside voxels")
    spacing = mask.grid.spacing
    d_out = ndimage.distance_transform_edt(~data, sampling=spacing)
    d_in = ndimage.distance_transform_edt(data, sampling=spacing)
    return ScalarField(mask.grid.with_data(d_out - d_in))


def gaussian_kernel_1d(sigma: float, spacing: float) -> np.ndarray:
    """Sampled, normalized Gaussian with radius ceil(3*sigma/spacing)."""
    radius = int(np.ceil(3.0 * sigma / spacing))
    x = np.arange(-radius, radius + 1, dtype=np.float64) * spacing
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(fld: ScalarField, sigma: float) -> ScalarField:
    """Separable Gaussian filter with edge replication at the boundary."""
    if sigma < 0:
        raise UsageError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return fld
    out = fld.data
    for axis in range(3):
        kernel = gaussian_kernel_1d(sigma, fld.grid.spacing[axis])
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="nearest")
    return ScalarField(fld.grid.with_data(out))


def _clamped_voxel_coords(grid: VoxelGrid, points: np.ndarray) -> np.ndarray:
    coords = (points - np.asarray(grid.origin)) / np.asarray(grid.spacing)
    hi = np.asarray(grid.dims, dtype=np.float64) - 1.0
    return np.clip(coords, 0.0, hi)


def trilinear_sample(fld, points) -> np.ndarray:
    """Trilinear interpolation at world-mm points, clamped to the grid box.

    Accepts a ScalarField, an object with a ``grid`` attribute holding
    vector data, or a bare VoxelGrid. Returns shape ``(n,)`` for scalar
    grids and ``(n, 3)`` for vector grids; a single point yields a scalar
    or a 3-vector.
    """
    grid = fld.grid if hasattr(fld, "grid") else fld
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    single = np.asarray(points).ndim == 1
    coords = _clamped_voxel_coords(grid, pts)
    values = _trilinear_on_coords(grid.data, coords)
    return values[0] if single else values


def _trilinear_on_coords(data: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Trilinear interpolation at (possibly fractional) voxel coordinates."""
    dims = np.asarray(data.shape[:3])
    base = np.floor(coords).astype(np.intp)
    np.clip(base, 0, np.maximum(dims - 2, 0), out=base)
    frac = coords - base

    i, j, k = base[:, 0], base[:, 1], base[:, 2]
    i1 = np.minimum(i + 1, dims[0] - 1)
    j1 = np.minimum(j + 1, dims[1] - 1)
    k1 = np.minimum(k + 1, dims[2] - 1)
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    if data.ndim == 4:
        fx, fy, fz = fx[:, None], fy[:, None], fz[:, None]

    c000 = data[i, j, k]
    c100 = data[i1, j, k]
    c010 = data[i, j1, k]
    c110 = data[i1, j1, k]
    c001 = data[i, j, k1]
    c101 = data[i1, j, k1]
    c011 = data[i, j1, k1]
    c111 = data[i1, j1, k1]

    c00 = c000 + (c100 - c000) * fx
    c10 = c010 + (c110 - c010) * fx
    c01 = c001 + (c101 - c001) * fx
    c11 = c011 + (c111 - c011) * fx
    c0 = c00 + (c10 - c00) * fy
    c1 = c01 + (c11 - c01) * fy
    return c0 + (c1 - c0) * fz
