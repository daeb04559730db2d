import numpy as np
import pytest
from scipy import ndimage

from cortexkit.errors import UsageError
from cortexkit.grid import build_mask, largest_component, pial_label_set
from cortexkit.phantom import two_hemisphere_phantom


def test_phantom_has_all_structures():
    vol = two_hemisphere_phantom(seed=3)
    data = vol.grid.data
    assert data.dtype == np.uint8
    present = set(np.unique(data).tolist())
    assert present == set(range(9))
    # both hemispheres carry a sensible amount of tissue
    for label in range(1, 9):
        assert (data == label).sum() >= 10


@pytest.mark.parametrize("gap_mm", [0.4, 1.0, 2.0])
def test_phantom_hemisphere_gap(gap_mm):
    for seed in range(3):
        vol = two_hemisphere_phantom(gap_mm=gap_mm, seed=seed)
        lh = build_mask(vol, pial_label_set("lh")).grid.data
        rh = build_mask(vol, pial_label_set("rh")).grid.data
        assert lh.any() and rh.any()
        dist = ndimage.distance_transform_edt(~lh, sampling=vol.grid.spacing)
        assert dist[rh].min() >= gap_mm


def test_phantom_gap_with_anisotropic_spacing():
    vol = two_hemisphere_phantom(dims=(64, 48, 48), spacing=(1.0, 1.25, 1.25), gap_mm=1.5, seed=7)
    lh = build_mask(vol, pial_label_set("lh")).grid.data
    rh = build_mask(vol, pial_label_set("rh")).grid.data
    dist = ndimage.distance_transform_edt(~lh, sampling=vol.grid.spacing)
    assert dist[rh].min() >= 1.5


def test_phantom_medial_structures_toggle():
    with_ah = two_hemisphere_phantom(seed=5).grid.data
    without = two_hemisphere_phantom(seed=5, with_medial_structures=False).grid.data
    assert {3, 7} <= set(np.unique(with_ah).tolist())
    assert not ({3, 7} & set(np.unique(without).tolist()))
    # ventricles are not part of the toggle
    assert (without == 4).any() and (without == 8).any()


def test_phantom_medial_lump_dents_the_union():
    # excluding the lump from the pial union leaves a surface dent, not
    # an internal cavity: the mask must stay a single connected piece
    vol = two_hemisphere_phantom(seed=5)
    plain = two_hemisphere_phantom(seed=5, with_medial_structures=False)
    mask = build_mask(vol, pial_label_set("lh")).grid.data
    full = build_mask(plain, pial_label_set("lh")).grid.data
    assert (mask & ~full).sum() == 0  # subset of the undented shape
    assert (full & ~mask).sum() > 0  # and strictly smaller
    kept = largest_component(build_mask(vol, pial_label_set("lh")))
    assert kept.grid.data.sum() == mask.sum()


def test_phantom_determinism():
    a = two_hemisphere_phantom(seed=11).grid.data
    b = two_hemisphere_phantom(seed=11).grid.data
    c = two_hemisphere_phantom(seed=12).grid.data
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_phantom_rejects_bad_requests():
    with pytest.raises(UsageError, match="at least 8"):
        two_hemisphere_phantom(dims=(4, 64, 64))
    with pytest.raises(UsageError, match="positive"):
        two_hemisphere_phantom(gap_mm=0.0)
    with pytest.raises(UsageError, match="too small"):
        two_hemisphere_phantom(dims=(16, 16, 16))
