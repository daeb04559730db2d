"""Synthetic two-hemisphere label phantoms.

Each hemisphere is a smoothly perturbed ellipsoid shell pair (cortex over
white matter) with a deep ventricle and, optionally, a medial-temporal lump
that straddles the outer boundary, mimicking the structures that are
deliberately excluded from the surface unions. The radial perturbation is
band limited and amplitude capped, which gives an analytic guarantee: the
two outer regions stay at least ``gap_mm`` apart across the midline.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .grid import LabelVolume, VoxelGrid

_AXES = (1.0, 0.92, 0.97)  # mild anisotropy, x kept at 1 for the gap math
_WHITE_FRACTION = 0.72
_VENTRICLE_FRACTION = 0.22
_BUMP_AMPLITUDE = 0.08
_MARGIN_MM = 3.0
_MIN_RADIUS_MM = 5.0


def _bump_coefficients(rng: np.random.Generator) -> np.ndarray:
    """Six coefficients with |sum| bound so the radial bump stays within
    +-_BUMP_AMPLITUDE for any direction."""
    raw = rng.uniform(-1.0, 1.0, size=6)
    total = np.abs(raw).sum()
    if total == 0.0:
        return raw
    return raw * (_BUMP_AMPLITUDE / total)


def _bump(coords_unit: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Low-order direction-dependent radius perturbation; every basis term
    is bounded by 1 on the unit sphere."""
    dx, dy, dz = coords_unit[..., 0], coords_unit[..., 1], coords_unit[..., 2]
    return (
        coeffs[0] * dx * dy
        + coeffs[1] * dy * dz
        + coeffs[2] * dx * dz
        + coeffs[3] * (dx * dx - dy * dy)
        + coeffs[4] * (dy * dy - dz * dz)
        + coeffs[5] * dx * dy * dz
    )


def _stamp_hemisphere(labels, pos, center, r0, coeffs, base_label, with_medial, ah_dir):
    rel = (pos - center) / (r0 * np.asarray(_AXES))
    rho = np.sqrt(np.sum(rel * rel, axis=-1))
    safe = np.maximum(rho, 1e-12)
    direction = rel / safe[..., None]
    radius = 1.0 + _bump(direction, coeffs)

    wm, cortex, ah, ventricle = base_label, base_label + 1, base_label + 2, base_label + 3
    labels[rho <= radius] = cortex
    labels[rho <= _WHITE_FRACTION * radius] = wm

    vent_rel = (pos - center) / (r0 * _VENTRICLE_FRACTION * np.array([1.0, 0.8, 0.9]))
    labels[np.sum(vent_rel * vent_rel, axis=-1) <= 1.0] = ventricle

    if with_medial:
        d = np.asarray(ah_dir, dtype=np.float64)
        d = d / np.linalg.norm(d)
        surface_r = r0 * (1.0 + _bump(d[None, :], coeffs)[0])
        ah_center = center + d * surface_r * np.asarray(_AXES)
        ah_radius = max(0.12 * r0, 1.6)
        ah_rel = pos - ah_center
        ball = np.sum(ah_rel * ah_rel, axis=-1) <= ah_radius * ah_radius
        labels[ball & (labels != ventricle)] = ah


def two_hemisphere_phantom(
    dims=(64, 64, 64),
    spacing=(1.0, 1.0, 1.0),
    gap_mm: float = 1.0,
    seed: int = 0,
    with_medial_structures: bool = True,
) -> LabelVolume:
    """Build a labeled volume with two non-touching hemisphere blobs.

    The outer (cortex) regions are guaranteed to stay ``gap_mm`` apart in
    the continuum, independent of the seed; downstream smoothing and
    level-set extraction only move surfaces inward, so the guarantee
    carries through the pipeline.
    """
    dims = tuple(int(d) for d in dims)
    spacing = tuple(float(s) for s in spacing)
    if len(dims) != 3 or min(dims) < 8:
        raise UsageError(f"dims must be three values of at least 8, got {dims}")
    if gap_mm <= 0:
        raise UsageError("gap_mm must be positive")
    extent = np.array([(d - 1) * s for d, s in zip(dims, spacing)])
    half = extent / 2.0
    r_max = min(
        (half[0] - _MARGIN_MM - gap_mm / 2.0) / 2.0,
        half[1] - _MARGIN_MM,
        half[2] - _MARGIN_MM,
    )
    r0 = r_max / (1.0 + _BUMP_AMPLITUDE)
    if r0 < _MIN_RADIUS_MM:
        raise UsageError(
            f"volume too small for two hemispheres with gap {gap_mm} mm (radius would be {r0:.1f} mm)"
        )
    offset = r_max + gap_mm / 2.0

    rng = np.random.default_rng(seed)
    coeffs_l = _bump_coefficients(rng)
    coeffs_r = _bump_coefficients(rng)

    grids = np.meshgrid(*(np.arange(d) * s for d, s in zip(dims, spacing)), indexing="ij")
    pos = np.stack(grids, axis=-1)
    mid = extent / 2.0
    center_l = np.array([mid[0] - offset, mid[1], mid[2]])
    center_r = np.array([mid[0] + offset, mid[1], mid[2]])

    labels = np.zeros(dims, dtype=np.uint8)
    _stamp_hemisphere(
        labels, pos, center_l, r0, coeffs_l, 1, with_medial_structures, (-0.55, 0.55, -0.65)
    )
    _stamp_hemisphere(
        labels, pos, center_r, r0, coeffs_r, 5, with_medial_structures, (0.55, 0.55, -0.65)
    )
    return LabelVolume(VoxelGrid(labels, spacing, (0.0, 0.0, 0.0)))
