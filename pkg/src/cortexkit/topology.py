"""Topology correction of signed distance fields.

The corrector only ever raises values. Voxels are swept from the global
minimum outward and accepted in nondecreasing key order, with a voxel held
back while accepting it would change the topology of the accepted set
(6-connected foreground against 26-connected background). The result is a
field whose every sublevel set is a single handle-free, cavity-free blob,
which is what makes downstream surface extraction produce one closed
genus-zero mesh at any threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import kernels
from ._kernels._purepy import MASK26, N26_DELTAS
from .errors import ConvergenceError, DegenerateInputError
from .grid import BinaryMask, ScalarField

POP_BUDGET_PER_VOXEL = 50


def neighborhood_pattern(data: np.ndarray, voxel: tuple[int, int, int]) -> int:
    """26-bit foreground pattern around a voxel; outside the grid counts as
    background. Bit order follows the C-order scan of the 3x3x3 block."""
    x, y, z = (int(v) for v in voxel)
    nx, ny, nz = data.shape
    pattern = 0
    for b, (dx, dy, dz) in enumerate(N26_DELTAS):
        px, py, pz = x + dx, y + dy, z + dz
        if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz and data[px, py, pz]:
            pattern |= 1 << b
    return pattern


def is_simple_point(mask, voxel: tuple[int, int, int]) -> bool:
    """Whether toggling ``voxel`` preserves the topology of the mask.

    Foreground is taken 6-connected, background 26-connected, matching both
    the march and the surface extractor's treatment of diagonal contacts.
    The voxel's own state does not matter, only its neighborhood.
    """
    data = mask.grid.data if isinstance(mask, BinaryMask) else np.asarray(mask).astype(bool)
    if data.ndim != 3:
        raise ValueError("mask must be a 3D boolean array or BinaryMask")
    pattern = neighborhood_pattern(data, voxel)
    return kernels.simple_point_pattern(~pattern & MASK26)


@dataclass(frozen=True)
class TopologyCorrectionResult:
    field: ScalarField
    modified_voxel_count: int
    seed: tuple[int, int, int]
    pops: int


def topology_correct(fld: ScalarField, max_pops: int | None = None) -> TopologyCorrectionResult:
    """Raise values of ``fld`` until every sublevel set is a topological ball.

    The input must have at least one negative voxel (a seed interior).
    Raises ConvergenceError if the march exceeds its pop budget, which a
    smooth distance field never does.
    """
    data = fld.data
    if not (data.min() < 0):
        raise DegenerateInputError("topology correction needs a negative (interior) voxel to seed from")
    if max_pops is None:
        max_pops = POP_BUDGET_PER_VOXEL * data.size + 1000
    corrected, seed_idx, pops, status = kernels.topology_march(data, int(max_pops))
    if status != 0:
        raise ConvergenceError(
            f"topology march spent {pops} pops without finishing (budget {max_pops})"
        )
    seed = tuple(int(v) for v in np.unravel_index(seed_idx, data.shape))
    modified = int(np.count_nonzero(corrected != data))
    return TopologyCorrectionResult(
        field=ScalarField(fld.grid.with_data(corrected)),
        modified_voxel_count=modified,
        seed=seed,
        pops=int(pops),
    )
