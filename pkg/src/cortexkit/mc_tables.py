"""Marching-cubes case tables, generated and validated at import time.

Rather than hand-copying a 256-entry triangle table, the cases are derived
from a per-face rule. A cell corner ``c = dx + 2*dy + 4*dz`` is *inside*
when its value is below the iso level. On each cell face the contour
segments pair up the cut face-edges; the ambiguous diagonal case is always
resolved by cutting off each inside corner separately. Because the rule
depends only on the four corner states of the face, both cells sharing a
face emit the same segment, so the extracted surface is watertight by
construction (every cut cell edge has segment degree 2, giving closed loops
per cell).

Loops are oriented so triangle normals point from the inside region toward
increasing values, then fan-triangulated. The construction asserts degree,
loop closure, decisive orientation and non-flipped fans for all 256 cases.

Exported arrays (all int32):

- ``CORNER_OFFSET``  (8, 3)   corner -> voxel offset
- ``EDGE_CORNER_A/B`` (12,)   edge endpoints, ``B = A + 2**axis``
- ``EDGE_AXIS``      (12,)    axis the edge runs along
- ``EDGE_LOWER_OFFSET`` (12, 3) offset of the edge's lower corner
- ``TRI_COUNT``      (256,)   triangles per configuration
- ``TRI_TABLE``      (256, 3*max) edge indices, -1 padded
"""

from __future__ import annotations

import numpy as np

CORNER_OFFSET = np.array(
    [[(c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)], dtype=np.int32
)

# the 12 cell edges in lexicographic corner-pair order
_EDGES = [(0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 3), (2, 6), (3, 7), (4, 5), (4, 6), (5, 7), (6, 7)]
EDGE_CORNER_A = np.array([a for a, _ in _EDGES], dtype=np.int32)
EDGE_CORNER_B = np.array([b for _, b in _EDGES], dtype=np.int32)
EDGE_AXIS = np.array([int(b - a).bit_length() - 1 for a, b in _EDGES], dtype=np.int32)
EDGE_LOWER_OFFSET = CORNER_OFFSET[EDGE_CORNER_A].copy()

_EDGE_INDEX = {frozenset(e): i for i, e in enumerate(_EDGES)}


def _faces() -> list[tuple[int, int, int, int]]:
    """Six faces as cyclically ordered corner quads."""
    out = []
    for axis in range(3):
        a1, a2 = [a for a in range(3) if a != axis]
        for side in (0, 1):
            quad = []
            for u, v in ((0, 0), (1, 0), (1, 1), (0, 1)):
                coord = [0, 0, 0]
                coord[axis] = side
                coord[a1] = u
                coord[a2] = v
                quad.append(coord[0] + 2 * coord[1] + 4 * coord[2])
            out.append(tuple(quad))
    return out


_FACES = _faces()


def _face_segments(quad: tuple[int, int, int, int], inside: list[bool]) -> list[tuple[int, int]]:
    """Contour segments on one face, as pairs of cell-edge indices."""
    s = [inside[c] for c in quad]
    cut = []
    for i in range(4):
        if s[i] != s[(i + 1) % 4]:
            cut.append(_EDGE_INDEX[frozenset((quad[i], quad[(i + 1) % 4]))])
    if not cut:
        return []
    if len(cut) == 2:
        return [(cut[0], cut[1])]
    # diagonal case: wrap a segment around each inside corner
    segs = []
    for i in range(4):
        if s[i] and not s[(i + 1) % 4] and not s[(i - 1) % 4]:
            e_prev = _EDGE_INDEX[frozenset((quad[(i - 1) % 4], quad[i]))]
            e_next = _EDGE_INDEX[frozenset((quad[i], quad[(i + 1) % 4]))]
            segs.append((e_prev, e_next))
    assert len(segs) == 2
    return segs


def _loops(segments: list[tuple[int, int]]) -> list[list[int]]:
    """Split the segment graph into closed loops of cell-edge indices."""
    adj: dict[int, list[int]] = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for edge, nbrs in adj.items():
        assert len(nbrs) == 2, f"cut edge {edge} has degree {len(nbrs)}"
    loops = []
    seen: set[int] = set()
    for start in sorted(adj):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        prev, cur = start, min(adj[start])
        while cur != start:
            loop.append(cur)
            seen.add(cur)
            nxt = [n for n in adj[cur] if n != prev]
            assert len(nxt) == 1
            prev, cur = cur, nxt[0]
        assert len(loop) >= 3
        loops.append(loop)
    return loops


def _orient_and_fan(loop: list[int], inside: list[bool]) -> list[tuple[int, int, int]]:
    mids = np.array(
        [(CORNER_OFFSET[EDGE_CORNER_A[e]] + CORNER_OFFSET[EDGE_CORNER_B[e]]) / 2.0 for e in loop]
    )
    normal = np.zeros(3)
    for i in range(len(loop)):
        normal += np.cross(mids[i], mids[(i + 1) % len(mids)])
    out_pts, in_pts = [], []
    for e in loop:
        a, b = EDGE_CORNER_A[e], EDGE_CORNER_B[e]
        ins, outs = (a, b) if inside[a] else (b, a)
        in_pts.append(CORNER_OFFSET[ins])
        out_pts.append(CORNER_OFFSET[outs])
    ref = np.mean(out_pts, axis=0) - np.mean(in_pts, axis=0)
    d = float(np.dot(normal, ref))
    assert abs(d) > 1e-9, "ambiguous loop orientation"
    if d < 0:
        loop = loop[::-1]
        mids = mids[::-1]
        normal = -normal
    # fan from the first apex whose triangles all agree with the loop normal
    for shift in range(len(loop)):
        tris = [
            (loop[shift], loop[(shift + i) % len(loop)], loop[(shift + i + 1) % len(loop)])
            for i in range(1, len(loop) - 1)
        ]
        ok = True
        for t in tris:
            pts = mids[[loop.index(v) for v in t]]
            if np.dot(np.cross(pts[1] - pts[0], pts[2] - pts[0]), normal) <= 1e-12:
                ok = False
                break
        if ok:
            return tris
    raise AssertionError("no valid fan apex for loop")


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    per_config: list[list[tuple[int, int, int]]] = []
    for config in range(256):
        inside = [bool(config >> c & 1) for c in range(8)]
        segments = []
        for quad in _FACES:
            segments.extend(_face_segments(quad, inside))
        tris: list[tuple[int, int, int]] = []
        for loop in _loops(segments):
            tris.extend(_orient_and_fan(loop, inside))
        cut = {e for e in range(12) if inside[EDGE_CORNER_A[e]] != inside[EDGE_CORNER_B[e]]}
        used = {v for t in tris for v in t}
        assert used == cut, f"config {config}: triangles use edges {used}, cut edges are {cut}"
        per_config.append(tris)
    assert not per_config[0] and not per_config[255]
    max_tris = max(len(t) for t in per_config)
    table = np.full((256, 3 * max_tris), -1, dtype=np.int32)
    counts = np.zeros(256, dtype=np.int32)
    for config, tris in enumerate(per_config):
        counts[config] = len(tris)
        flat = [v for t in tris for v in t]
        table[config, : len(flat)] = flat
    return table, counts


TRI_TABLE, TRI_COUNT = _build_tables()
MAX_TRIS = TRI_TABLE.shape[1] // 3
