"""Topology-safe cortical surface extraction, deformation and evaluation.

The heavy kernels (topology march, surface emission, triangle contact
tests) run on a compiled extension when available and transparently fall
back to a pure numpy implementation; both produce bit-identical results.
``BACKEND_NAME`` tells which one is active, and ``CORTEXKIT_BACKEND``
(``native`` or ``pure``) forces the choice.
"""

from ._kernels import BACKEND_NAME
from ._version import __version__
from .collision import (
    SURFACES,
    Bvh,
    ExtractionConfig,
    ExtractionResult,
    IntersectionReport,
    adaptive_threshold_extraction,
    mesh_pair_intersections,
    self_intersection_fraction,
    self_intersection_pairs,
    tri_tri_intersect,
)
from .deform import (
    DeformationField,
    VelocityField,
    band_limited_svf,
    compose,
    constant_svf,
    jacobian_determinant,
    linear_svf,
    min_interior_jacobian,
    multiscale_deform,
    radial_svf,
    rotation_svf,
    scaling_and_squaring,
    warp_mesh,
)
from .errors import (
    ConvergenceError,
    CortexkitError,
    DataFormatError,
    DegenerateInputError,
    UsageError,
    ValidationError,
)
from .grid import (
    BinaryMask,
    LabelVolume,
    ScalarField,
    VoxelGrid,
    build_mask,
    gaussian_smooth,
    largest_component,
    pial_label_set,
    signed_distance,
    trilinear_sample,
    white_label_set,
)
from .mesh_io import load_mesh, save_mesh
from .meshing import (
    MeshDiagnostics,
    TriangleMesh,
    diagnostics,
    laplacian_smooth,
    marching_cubes,
    merge_meshes,
    sample_surface_points,
)
from .metrics import (
    MetricsReport,
    average_surface_distance,
    chamfer_distance,
    compare_surfaces,
    edge_loss,
    hausdorff_distance,
    mesh_loss,
    normal_consistency_loss,
)
from .phantom import two_hemisphere_phantom
from .pipeline import PipelineConfig, init_surfaces
from .topology import TopologyCorrectionResult, is_simple_point, topology_correct
from .volume_io import (
    load_label_volume,
    load_scalar_field,
    load_vector_grid,
    read_nifti,
    save_label_volume,
    save_scalar_field,
    save_vector_grid,
    write_nifti,
)

__all__ = [
    "BACKEND_NAME",
    "__version__",
    "SURFACES",
    "Bvh",
    "ExtractionConfig",
    "ExtractionResult",
    "IntersectionReport",
    "adaptive_threshold_extraction",
    "mesh_pair_intersections",
    "self_intersection_fraction",
    "self_intersection_pairs",
    "tri_tri_intersect",
    "DeformationField",
    "VelocityField",
    "band_limited_svf",
    "compose",
    "constant_svf",
    "jacobian_determinant",
    "linear_svf",
    "min_interior_jacobian",
    "multiscale_deform",
    "radial_svf",
    "rotation_svf",
    "scaling_and_squaring",
    "warp_mesh",
    "ConvergenceError",
    "CortexkitError",
    "DataFormatError",
    "DegenerateInputError",
    "UsageError",
    "ValidationError",
    "BinaryMask",
    "LabelVolume",
    "ScalarField",
    "VoxelGrid",
    "build_mask",
    "gaussian_smooth",
    "largest_component",
    "pial_label_set",
    "signed_distance",
    "trilinear_sample",
    "white_label_set",
    "load_mesh",
    "save_mesh",
    "MeshDiagnostics",
    "TriangleMesh",
    "diagnostics",
    "laplacian_smooth",
    "marching_cubes",
    "merge_meshes",
    "sample_surface_points",
    "MetricsReport",
    "average_surface_distance",
    "chamfer_distance",
    "compare_surfaces",
    "edge_loss",
    "hausdorff_distance",
    "mesh_loss",
    "normal_consistency_loss",
    "two_hemisphere_phantom",
    "PipelineConfig",
    "init_surfaces",
    "TopologyCorrectionResult",
    "is_simple_point",
    "topology_correct",
    "load_label_volume",
    "load_scalar_field",
    "load_vector_grid",
    "read_nifti",
    "save_label_volume",
    "save_scalar_field",
    "save_vector_grid",
    "write_nifti",
]
