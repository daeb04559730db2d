"""End-to-end stages and their on-disk manifests.

Every stage writes a JSON manifest (``schema_version`` "1") describing its
configuration and results, so later runs can be merged into one report and
diffed. Wall-clock timings live only in the returned manifest dicts, never
in the files: everything written to disk is bit-reproducible for a given
config and seed.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ._kernels import BACKEND_NAME
from ._version import __version__
from .collision import (
    CROSS_PAIRS,
    PRIMARY_PAIRS,
    SURFACES,
    ExtractionConfig,
    adaptive_threshold_extraction,
    mesh_pair_intersections,
    self_intersection_fraction,
)
from .deform import VelocityField, multiscale_deform
from .errors import DataFormatError, UsageError
from .grid import (
    LabelVolume,
    build_mask,
    gaussian_smooth,
    largest_component,
    pial_label_set,
    signed_distance,
    white_label_set,
)
from .mesh_io import load_mesh, save_mesh
from .metrics import DEFAULT_SAMPLES, DEFAULT_WEIGHTS, compare_surfaces
from .topology import topology_correct
from .volume_io import load_label_volume, load_vector_grid

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs shared by the pipeline stages.

    Level offsets and steps are mm along the signed distance axis (negative
    is inside). ``threads`` only parallelizes nearest-neighbor queries in
    the metrics stage; everything else is deterministic single-threaded.
    """

    sigma: float = 1.0
    connectivity: int = 26
    lambda_pial_init: float = -0.1
    pial_step: float = -0.05
    wm_offset: float = -0.1
    wm_step: float = -0.1
    max_iterations: int = 20
    smooth_iterations: int = 5
    smooth_step: float = 0.5
    squaring_steps: int = 7
    n_samples: int = DEFAULT_SAMPLES
    percentile: float = 100.0
    seed: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise DataFormatError(f"config {path} must hold a JSON object")
        return cls.from_dict(d)

    def replace(self, **overrides) -> "PipelineConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **clean) if clean else self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(
            lambda_pial_init=self.lambda_pial_init,
            pial_step=self.pial_step,
            wm_offset=self.wm_offset,
            wm_step=self.wm_step,
            max_iterations=self.max_iterations,
            smooth_iterations=self.smooth_iterations,
            smooth_step=self.smooth_step,
        )


def write_json(path: str, obj) -> None:
    """Atomic JSON write (temp file + rename), timings stripped."""
    obj = {k: v for k, v in obj.items() if k != "timings"} if isinstance(obj, dict) else obj
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    os.replace(tmp, path)


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataFormatError(f"{path} must hold a JSON object")
    return doc


def make_manifest(stage: str, config: PipelineConfig, results: dict, warnings, timings) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "cortexkit",
        "tool_version": __version__,
        "backend": BACKEND_NAME,
        "stage": stage,
        "config": config.to_dict(),
        "results": results,
        "warnings": list(warnings),
        "timings": {k: round(float(v), 6) for k, v in timings.items()},
    }


class _Timer:
    def __init__(self):
        self.timings = {}

    @contextmanager
    def section(self, name: str):
        t0 = time.perf_counter()
        yield
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


def _as_labels(labels) -> LabelVolume:
    if isinstance(labels, LabelVolume):
        return labels
    return load_label_volume(str(labels))


def corrected_fields(labels: LabelVolume, config: PipelineConfig, timer: _Timer | None = None):
    """Mask, distance, smooth and topology-correct all four surface fields.

    Returns (fields, per-surface info dict). The medial lump labels never
    enter the unions, so a dented outer boundary stays a dent rather than
    becoming a cavity.
    """
    timer = timer or _Timer()
    fields = {}
    info = {}
    for name in SURFACES:
        hemi, kind = name.split("_")
        label_set = pial_label_set(hemi) if kind == "pial" else white_label_set(hemi)
        with timer.section("mask"):
            mask = build_mask(labels, label_set)
            comp = largest_component(mask, config.connectivity)
        with timer.section("distance"):
            sdf = signed_distance(comp)
            smooth = gaussian_smooth(sdf, config.sigma)
        with timer.section("topology"):
            corr = topology_correct(smooth)
        fields[name] = corr.field
        info[name] = {
            "mask_voxels": int(np.count_nonzero(mask.grid.data)),
            "component_voxels": int(np.count_nonzero(comp.grid.data)),
            "corrected_voxels": corr.modified_voxel_count,
            "march_pops": corr.pops,
        }
    return fields, info


def init_surfaces(labels, config: PipelineConfig | None = None):
    """Labels in, four collision-free surfaces out.

    Returns (ExtractionResult, manifest dict); writing files is the
    caller's business.
    """
    config = config or PipelineConfig()
    timer = _Timer()
    labels = _as_labels(labels)
    fields, info = corrected_fields(labels, config, timer)
    with timer.section("extract"):
        result = adaptive_threshold_extraction(fields, config.extraction())
    surfaces = {}
    for name, mesh in result.meshes.items():
        d = result.diagnostics[name]
        surfaces[name] = dict(
            info[name],
            vertices=mesh.n_vertices,
            faces=mesh.n_faces,
            euler_characteristic=d.euler_characteristic,
            genus=d.genus,
        )
    results = {
        "lambda_pial": result.lambda_pial,
        "lambda_white": result.lambda_white,
        "pial_iterations": result.pial_iterations,
        "white_iterations": result.white_iterations,
        "pair_contacts": {r.pair: r.contacts for r in result.reports},
        "surfaces": surfaces,
    }
    manifest = make_manifest("init-surfaces", config, results, [], timer.timings)
    return result, manifest


def run_init_surfaces(labels, out_dir: str, config: PipelineConfig | None = None) -> dict:
    result, manifest = init_surfaces(labels, config)
    os.makedirs(out_dir, exist_ok=True)
    for name, mesh in result.meshes.items():
        save_mesh(os.path.join(out_dir, name + ".ply"), mesh)
    write_json(os.path.join(out_dir, "init_surfaces.json"), manifest)
    return manifest


def _find_mesh(directory: str, name: str):
    for ext in (".ply", ".obj"):
        path = os.path.join(directory, name + ext)
        if os.path.exists(path):
            return load_mesh(path)
    raise UsageError(f"no mesh named {name}.ply or {name}.obj in {directory}")


def load_surfaces(directory: str) -> dict:
    return {name: _find_mesh(directory, name) for name in SURFACES}


def run_deform(mesh_dir: str, svf_paths, out_dir: str, config: PipelineConfig | None = None) -> dict:
    """Warp the four surfaces through composed stationary velocity levels.

    ``svf_paths`` are ordered coarse to fine; the first level is applied
    first. Non-diffeomorphic levels produce warnings, not errors.
    """
    config = config or PipelineConfig()
    svf_paths = list(svf_paths)
    if not svf_paths:
        raise UsageError("need at least one velocity field")
    timer = _Timer()
    with timer.section("load"):
        meshes = load_surfaces(mesh_dir)
        levels = [VelocityField(load_vector_grid(p)) for p in svf_paths]
    with timer.section("deform"):
        result = multiscale_deform(meshes, levels, config.squaring_steps)
    os.makedirs(out_dir, exist_ok=True)
    with timer.section("save"):
        for name, mesh in result.meshes.items():
            save_mesh(os.path.join(out_dir, name + ".ply"), mesh)
    results = {
        "levels": [os.path.basename(p) for p in svf_paths],
        "level_min_jacobian": [float(v) for v in result.level_min_jacobian],
        "surfaces": {n: {"vertices": m.n_vertices, "faces": m.n_faces} for n, m in result.meshes.items()},
    }
    manifest = make_manifest("deform", config, results, result.warnings, timer.timings)
    write_json(os.path.join(out_dir, "deform.json"), manifest)
    return manifest


def run_metrics(pred_dir: str, ref_dir: str, out_path: str, config: PipelineConfig | None = None) -> dict:
    """Distance/regularity metrics plus the weighted combined loss."""
    config = config or PipelineConfig()
    timer = _Timer()
    with timer.section("load"):
        pred = load_surfaces(pred_dir)
        ref = load_surfaces(ref_dir)
    with timer.section("metrics"):
        report = compare_surfaces(
            pred,
            ref,
            n_samples=config.n_samples,
            seed=config.seed,
            percentile=config.percentile,
            workers=config.threads,
        )
    # the combined loss reuses the per-surface terms already measured
    w_cd, w_edge, w_nc = DEFAULT_WEIGHTS
    loss_surfaces = {}
    total = 0.0
    for name, m in report.surfaces.items():
        loss = w_cd * m["chamfer"] + w_edge * m["edge"] + w_nc * m["normal_consistency"]
        loss_surfaces[name] = loss
        total += loss
    results = {
        "metrics": report.surfaces,
        "loss": {"surfaces": loss_surfaces, "total": total, "weights": list(DEFAULT_WEIGHTS)},
    }
    manifest = make_manifest("metrics", config, results, [], timer.timings)
    write_json(out_path, manifest)
    return manifest


def run_collide(mesh_dir: str, out_path: str, config: PipelineConfig | None = None, all_pairs: bool = False) -> dict:
    """Contact report for the standard surface pairs (a reporting tool:
    finding contacts is a result, not an error)."""
    config = config or PipelineConfig()
    timer = _Timer()
    with timer.section("load"):
        meshes = load_surfaces(mesh_dir)
    pairs = PRIMARY_PAIRS + (CROSS_PAIRS if all_pairs else ())
    with timer.section("pairs"):
        reports = [mesh_pair_intersections(meshes[a], meshes[b], f"{a}:{b}") for a, b in pairs]
    with timer.section("self"):
        selfs = {}
        for name, mesh in meshes.items():
            percent, ids = self_intersection_fraction(mesh)
            selfs[name] = {"percent": percent, "faces": len(ids)}
    results = {
        "pairs": [r.to_dict() for r in reports],
        "self": selfs,
        "total_contacts": int(sum(r.contacts for r in reports)),
    }
    manifest = make_manifest("collide", config, results, [], timer.timings)
    write_json(out_path, manifest)
    return manifest


def run_report(paths, out_path: str) -> dict:
    """Merge stage manifests into one report, dropping timings.

    All inputs must carry the schema version this build writes; anything
    else is a data format error.
    """
    paths = list(paths)
    if not paths:
        raise UsageError("need at least one manifest to merge")
    merged = {"schema_version": SCHEMA_VERSION, "tool": "cortexkit", "reports": {}}
    for path in paths:
        doc = read_json(path)
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DataFormatError(
                f"{path}: schema_version {version!r} does not match {SCHEMA_VERSION!r}"
            )
        doc = {k: v for k, v in doc.items() if k != "timings"}
        key = str(doc.get("stage") or os.path.basename(path))
        while key in merged["reports"]:
            key += "+"
        merged["reports"][key] = doc
    write_json(out_path, merged)
    return merged
