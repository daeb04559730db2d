"""Triangle collision detection and collision-driven surface extraction.

Candidate face pairs come from an axis-aligned bounding box tree (median
split, small leaves); the exact test is a segment-level triangle-triangle
intersection where single-point grazing contact does not count. A brute
force all-pairs path exists solely so the tree can be validated against it.

``adaptive_threshold_extraction`` turns four topology-corrected distance
fields into four meshes that are mutually intersection-free: the two outer
levels are pulled inward together until the hemispheres separate, then the
two inner levels are pulled inward until neither inner surface touches its
own outer surface or the other inner surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels
from .errors import ConvergenceError, DegenerateInputError, UsageError
from .grid import ScalarField
from .meshing import MeshDiagnostics, TriangleMesh, diagnostics, laplacian_smooth, marching_cubes

MIN_FACE_AREA = 1e-12  # faces at or below this are ignored by the predicates

SURFACES = ("lh_pial", "rh_pial", "lh_white", "rh_white")
PRIMARY_PAIRS = (
    ("lh_pial", "rh_pial"),
    ("lh_white", "rh_white"),
    ("lh_pial", "lh_white"),
    ("rh_pial", "rh_white"),
)
CROSS_PAIRS = (("lh_pial", "rh_white"), ("rh_pial", "lh_white"))


def tri_tri_intersect(t1, t2):
    """Exact test for one pair; returns (hit, segment) with segment (2, 3).

    Degenerate (zero-area) triangles are a usage error here; the batch
    paths silently skip them instead.
    """
    t1 = np.asarray(t1, dtype=np.float64).reshape(1, 3, 3)
    t2 = np.asarray(t2, dtype=np.float64).reshape(1, 3, 3)
    for name, t in (("first", t1), ("second", t2)):
        n = np.cross(t[0, 1] - t[0, 0], t[0, 2] - t[0, 0])
        if 0.5 * float(np.linalg.norm(n)) <= MIN_FACE_AREA:
            raise UsageError(f"{name} triangle is degenerate")
    hits, segs = kernels.tri_pair_intersections(t1, t2)
    if not hits[0]:
        return False, None
    return True, segs[0].reshape(2, 3)


class Bvh:
    """Static AABB tree over mesh faces; leaves hold at most 4 faces."""

    LEAF_SIZE = 4

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        f = mesh.n_faces
        tri = mesh.vertices[mesh.faces] if f else np.zeros((0, 3, 3))
        self.tri_lo = tri.min(axis=1) if f else np.zeros((0, 3))
        self.tri_hi = tri.max(axis=1) if f else np.zeros((0, 3))
        centroid = tri.mean(axis=1) if f else np.zeros((0, 3))
        self.order = np.arange(f)
        lo, hi, left, right, start, count = [], [], [], [], [], []
        if f:
            stack = [(0, f)]
            # reserve slots so children can be appended after their parent
            slots = [-1]
            while stack:
                s, e = stack.pop()
                node = slots.pop()
                if node < 0:
                    node = len(lo)
                    lo.append(None); hi.append(None)
                    left.append(-1); right.append(-1)
                    start.append(0); count.append(0)
                sub = self.order[s:e]
                lo[node] = self.tri_lo[sub].min(axis=0)
                hi[node] = self.tri_hi[sub].max(axis=0)
                if e - s <= self.LEAF_SIZE:
                    start[node] = s
                    count[node] = e - s
                    continue
                axis = int(np.argmax(centroid[sub].max(axis=0) - centroid[sub].min(axis=0)))
                self.order[s:e] = sub[np.argsort(centroid[sub, axis], kind="stable")]
                mid = (s + e) // 2
                for child_range in ((mid, e), (s, mid)):
                    child = len(lo)
                    lo.append(None); hi.append(None)
                    left.append(-1); right.append(-1)
                    start.append(0); count.append(0)
                    stack.append(child_range)
                    slots.append(child)
                left[node] = len(lo) - 1
                right[node] = len(lo) - 2
        self.lo = np.asarray(lo, dtype=np.float64).reshape(-1, 3)
        self.hi = np.asarray(hi, dtype=np.float64).reshape(-1, 3)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)

    def _leaf_faces(self, rows_start, rows_count, other=None, other_start=None, other_count=None):
        """Expand (leaf, leaf) row lists into face index pairs."""
        tree_b = self if other is None else other
        ca = rows_count
        cb = other_count
        rep = ca * cb
        total = int(rep.sum())
        if total == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        ridx = np.repeat(np.arange(len(rep)), rep)
        offs = np.cumsum(rep) - rep
        rank = np.arange(total) - offs[ridx]
        ia = rank // cb[ridx]
        ib = rank - ia * cb[ridx]
        fa = self.order[rows_start[ridx] + ia]
        fb = tree_b.order[other_start[ridx] + ib]
        return fa, fb


def _aabb_overlap(ta: Bvh, a, tb: Bvh, b):
    return np.all(ta.lo[a] <= tb.hi[b], axis=1) & np.all(tb.lo[b] <= ta.hi[a], axis=1)


def bvh_pair_candidates(ta: Bvh, tb: Bvh):
    """Face pairs (fa, fb) whose boxes overlap, one tree against another."""
    if not len(ta.lo) or not len(tb.lo):
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    a = np.zeros(1, dtype=np.int64)
    b = np.zeros(1, dtype=np.int64)
    out_a, out_b = [], []
    while len(a):
        keep = _aabb_overlap(ta, a, tb, b)
        a, b = a[keep], b[keep]
        if not len(a):
            break
        leaf_a = ta.left[a] < 0
        leaf_b = tb.left[b] < 0
        both = leaf_a & leaf_b
        if both.any():
            fa, fb = ta._leaf_faces(
                ta.start[a[both]], ta.count[a[both]], tb, tb.start[b[both]], tb.count[b[both]]
            )
            out_a.append(fa)
            out_b.append(fb)
        rest = ~both
        a, b = a[rest], b[rest]
        la, lb = leaf_a[rest], leaf_b[rest]
        # descend a where a is internal, b where b is internal; internal
        # on both sides expands into all four child combinations
        na_list, nb_list = [], []
        int_a = ~la
        int_b = ~lb
        only_a = int_a & lb
        only_b = la & int_b
        both_i = int_a & int_b
        if only_a.any():
            na_list += [ta.left[a[only_a]], ta.right[a[only_a]]]
            nb_list += [b[only_a], b[only_a]]
        if only_b.any():
            na_list += [a[only_b], a[only_b]]
            nb_list += [tb.left[b[only_b]], tb.right[b[only_b]]]
        if both_i.any():
            al, ar = ta.left[a[both_i]], ta.right[a[both_i]]
            bl, br = tb.left[b[both_i]], tb.right[b[both_i]]
            na_list += [al, al, ar, ar]
            nb_list += [bl, br, bl, br]
        a = np.concatenate(na_list) if na_list else np.zeros(0, np.int64)
        b = np.concatenate(nb_list) if nb_list else np.zeros(0, np.int64)
    if not out_a:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(out_a), np.concatenate(out_b)


def bvh_self_candidates(tree: Bvh):
    """Unordered face pairs (fa < fb) with overlapping boxes within one tree."""
    if not len(tree.lo):
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    a = np.zeros(1, dtype=np.int64)
    b = np.zeros(1, dtype=np.int64)
    out_a, out_b = [], []
    while len(a):
        same = a == b
        diff = ~same
        keep = same.copy()
        if diff.any():
            keep[diff] = _aabb_overlap(tree, a[diff], tree, b[diff])
        a, b = a[keep], b[keep]
        if not len(a):
            break
        leaf_a = tree.left[a] < 0
        leaf_b = tree.left[b] < 0
        same = a == b
        # identical leaf: internal combinations i < j
        sl = same & leaf_a
        if sl.any():
            for node in a[sl]:
                s = int(tree.start[node])
                c = int(tree.count[node])
                faces = tree.order[s : s + c]
                ii, jj = np.triu_indices(c, k=1)
                out_a.append(faces[ii])
                out_b.append(faces[jj])
        # distinct leaves: full product (face subsets are disjoint)
        dl = (~same) & leaf_a & leaf_b
        if dl.any():
            fa, fb = tree._leaf_faces(
                tree.start[a[dl]], tree.count[a[dl]], tree, tree.start[b[dl]], tree.count[b[dl]]
            )
            out_a.append(fa)
            out_b.append(fb)
        na_list, nb_list = [], []
        si = same & ~leaf_a
        if si.any():
            l, r = tree.left[a[si]], tree.right[a[si]]
            na_list += [l, l, r]
            nb_list += [l, r, r]
        rest = (~same) & ~(leaf_a & leaf_b)
        if rest.any():
            ra, rb = a[rest], b[rest]
            la, lb = leaf_a[rest], leaf_b[rest]
            only_a = ~la & lb
            only_b = la & ~lb
            both_i = ~la & ~lb
            if only_a.any():
                na_list += [tree.left[ra[only_a]], tree.right[ra[only_a]]]
                nb_list += [rb[only_a], rb[only_a]]
            if only_b.any():
                na_list += [ra[only_b], ra[only_b]]
                nb_list += [tree.left[rb[only_b]], tree.right[rb[only_b]]]
            if both_i.any():
                al, ar = tree.left[ra[both_i]], tree.right[ra[both_i]]
                bl, br = tree.left[rb[both_i]], tree.right[rb[both_i]]
                na_list += [al, al, ar, ar]
                nb_list += [bl, br, bl, br]
        a = np.concatenate(na_list) if na_list else np.zeros(0, np.int64)
        b = np.concatenate(nb_list) if nb_list else np.zeros(0, np.int64)
    if not out_a:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    fa = np.concatenate(out_a)
    fb = np.concatenate(out_b)
    swap = fa > fb
    fa2 = np.where(swap, fb, fa)
    fb2 = np.where(swap, fa, fb)
    return fa2, fb2


def _share_vertex(faces_a: np.ndarray, faces_b: np.ndarray) -> np.ndarray:
    shared = np.zeros(len(faces_a), dtype=bool)
    for i in range(3):
        for j in range(3):
            shared |= faces_a[:, i] == faces_b[:, j]
    return shared


def _proper_faces(mesh: TriangleMesh) -> np.ndarray:
    return mesh.face_areas() > MIN_FACE_AREA


def self_intersection_pairs(mesh: TriangleMesh, method: str = "bvh"):
    """Intersecting face pairs of one mesh, excluding neighbors that share a
    vertex and excluding degenerate faces. Returns (fa, fb, segments)."""
    if method == "bvh":
        fa, fb = bvh_self_candidates(Bvh(mesh))
    elif method == "bruteforce":
        fa, fb = np.triu_indices(mesh.n_faces, k=1)
        fa = fa.astype(np.int64)
        fb = fb.astype(np.int64)
    else:
        raise UsageError(f"unknown method {method!r}, expected 'bvh' or 'bruteforce'")
    keep = ~_share_vertex(mesh.faces[fa], mesh.faces[fb])
    proper = _proper_faces(mesh)
    keep &= proper[fa] & proper[fb]
    fa, fb = fa[keep], fb[keep]
    if not len(fa):
        return fa, fb, np.zeros((0, 6))
    tri = mesh.vertices[mesh.faces]
    hits, segs = kernels.tri_pair_intersections(tri[fa], tri[fb])
    hit = hits.astype(bool)
    return fa[hit], fb[hit], segs[hit]


def self_intersection_fraction(mesh: TriangleMesh, method: str = "bvh"):
    """Percent of faces involved in at least one self intersection, plus the
    sorted ids of those faces."""
    fa, fb, _ = self_intersection_pairs(mesh, method=method)
    ids = np.unique(np.concatenate([fa, fb])) if len(fa) else np.zeros(0, np.int64)
    percent = 100.0 * len(ids) / mesh.n_faces if mesh.n_faces else 0.0
    return percent, ids


@dataclass(frozen=True)
class IntersectionReport:
    """Contact summary for an ordered surface pair.

    ``contacts`` counts intersecting face pairs (one contact segment each);
    ``faces_a``/``faces_b`` count distinct faces of either mesh involved.
    """

    pair: str
    faces_a: int
    faces_b: int
    percent_a: float
    percent_b: float
    contacts: int

    def to_dict(self) -> dict:
        return {
            "pair": self.pair,
            "faces_a": self.faces_a,
            "faces_b": self.faces_b,
            "percent_a": self.percent_a,
            "percent_b": self.percent_b,
            "contacts": self.contacts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntersectionReport":
        return cls(
            pair=str(d["pair"]),
            faces_a=int(d["faces_a"]),
            faces_b=int(d["faces_b"]),
            percent_a=float(d["percent_a"]),
            percent_b=float(d["percent_b"]),
            contacts=int(d["contacts"]),
        )


def mesh_pair_intersections(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, pair: str = "a:b", method: str = "bvh"
) -> IntersectionReport:
    """Count intersecting triangle pairs between two meshes."""
    if method == "bvh":
        fa, fb = bvh_pair_candidates(Bvh(mesh_a), Bvh(mesh_b))
    elif method == "bruteforce":
        fa, fb = np.meshgrid(np.arange(mesh_a.n_faces), np.arange(mesh_b.n_faces), indexing="ij")
        fa = fa.ravel().astype(np.int64)
        fb = fb.ravel().astype(np.int64)
    else:
        raise UsageError(f"unknown method {method!r}, expected 'bvh' or 'bruteforce'")
    keep = _proper_faces(mesh_a)[fa] & _proper_faces(mesh_b)[fb]
    fa, fb = fa[keep], fb[keep]
    if len(fa):
        hits, _ = kernels.tri_pair_intersections(
            mesh_a.vertices[mesh_a.faces[fa]], mesh_b.vertices[mesh_b.faces[fb]]
        )
        hit = hits.astype(bool)
        fa, fb = fa[hit], fb[hit]
    ua = np.unique(fa)
    ub = np.unique(fb)
    return IntersectionReport(
        pair=pair,
        faces_a=int(len(ua)),
        faces_b=int(len(ub)),
        percent_a=100.0 * len(ua) / mesh_a.n_faces if mesh_a.n_faces else 0.0,
        percent_b=100.0 * len(ub) / mesh_b.n_faces if mesh_b.n_faces else 0.0,
        contacts=int(len(fa)),
    )


@dataclass(frozen=True)
class ExtractionConfig:
    """Level-set extraction schedule.

    The outer surfaces start slightly inside the zero level and both outer
    levels move inward together while the hemispheres touch. Inner levels
    start a fixed offset below the final outer level and move in larger
    steps. Distances are mm (fields are signed distances, negative inside).
    """

    lambda_pial_init: float = -0.1
    pial_step: float = -0.05
    wm_offset: float = -0.1
    wm_step: float = -0.1
    max_iterations: int = 20
    smooth_iterations: int = 5
    smooth_step: float = 0.5


@dataclass(frozen=True)
class ExtractionResult:
    meshes: dict
    lambda_pial: float
    lambda_white: float
    pial_iterations: int
    white_iterations: int
    reports: tuple
    diagnostics: dict


def _extract(fld: ScalarField, level: float, cfg: ExtractionConfig) -> TriangleMesh:
    mesh = marching_cubes(fld, level)
    return laplacian_smooth(mesh, cfg.smooth_iterations, cfg.smooth_step)


def adaptive_threshold_extraction(
    fields: dict, config: ExtractionConfig | None = None, check_cross_pairs: bool = True
) -> ExtractionResult:
    """Extract four mutually intersection-free surfaces from corrected fields.

    ``fields`` maps the four surface names (lh_pial, rh_pial, lh_white,
    rh_white) to topology-corrected signed distance fields. Raises
    ConvergenceError (with the offending reports attached) when the level
    schedule runs out of iterations or the final cross-checks fail.
    """
    cfg = config or ExtractionConfig()
    missing = [s for s in SURFACES if s not in fields]
    if missing:
        raise UsageError(f"missing fields for surfaces {missing}")

    lam_p = cfg.lambda_pial_init
    lh_p = rh_p = None
    report = None
    for it in range(cfg.max_iterations):
        lh_p = _extract(fields["lh_pial"], lam_p, cfg)
        rh_p = _extract(fields["rh_pial"], lam_p, cfg)
        report = mesh_pair_intersections(lh_p, rh_p, "lh_pial:rh_pial")
        if report.contacts == 0:
            break
        lam_p += cfg.pial_step
    else:
        raise ConvergenceError(
            f"outer surfaces still touch after {cfg.max_iterations} level steps",
            reports=[report],
        )
    pial_iterations = it + 1

    lam_w = lam_p + cfg.wm_offset
    lh_w = rh_w = None
    bad = None
    for it in range(cfg.max_iterations):
        lh_w = _extract(fields["lh_white"], lam_w, cfg)
        rh_w = _extract(fields["rh_white"], lam_w, cfg)
        checks = [
            mesh_pair_intersections(lh_w, rh_w, "lh_white:rh_white"),
            mesh_pair_intersections(lh_p, lh_w, "lh_pial:lh_white"),
            mesh_pair_intersections(rh_p, rh_w, "rh_pial:rh_white"),
        ]
        bad = [r for r in checks if r.contacts]
        if not bad:
            break
        lam_w += cfg.wm_step
    else:
        raise ConvergenceError(
            f"inner surfaces still touch after {cfg.max_iterations} level steps",
            reports=bad,
        )
    white_iterations = it + 1

    meshes = {"lh_pial": lh_p, "rh_pial": rh_p, "lh_white": lh_w, "rh_white": rh_w}
    pairs = PRIMARY_PAIRS + (CROSS_PAIRS if check_cross_pairs else ())
    reports = tuple(
        mesh_pair_intersections(meshes[a], meshes[b], f"{a}:{b}") for a, b in pairs
    )
    diag = {name: diagnostics(m) for name, m in meshes.items()}
    problems = [r for r in reports if r.contacts]
    for name, d in diag.items():
        if not (d.is_closed and d.is_oriented and d.genus == 0 and d.component_count == 1):
            problems.append(name)
    for name, m in meshes.items():
        sif, _ = self_intersection_fraction(m)
        if sif > 0.0:
            problems.append(f"{name} self-intersects ({sif:.3f}%)")
    if problems:
        raise ConvergenceError(
            f"extraction finished but validation failed: {problems}",
            reports=[r for r in problems if isinstance(r, IntersectionReport)] or None,
        )
    return ExtractionResult(
        meshes=meshes,
        lambda_pial=lam_p,
        lambda_white=lam_w,
        pial_iterations=pial_iterations,
        white_iterations=white_iterations,
        reports=reports,
        diagnostics=diag,
    )
