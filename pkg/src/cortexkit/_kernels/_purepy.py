"""Pure numpy/python kernels.

This module is both the fallback backend and the reference the compiled
extension is checked against: the two must agree bit for bit. When editing
arithmetic here, keep the expression order identical in ``_native.pyx``
(and vice versa); the build disables FP contraction for the same reason.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..mc_tables import EDGE_AXIS, EDGE_LOWER_OFFSET, TRI_COUNT, TRI_TABLE

BACKEND = "pure"

# ---------------------------------------------------------------------------
# neighborhood tables for the digital-topology tests
#
# Bit b of a pattern is the b-th entry of the 3x3x3 neighborhood in C order
# with the center skipped; set bits are foreground.

N26_DELTAS = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
)
MASK26 = (1 << 26) - 1

_POS = {d: b for b, d in enumerate(N26_DELTAS)}
_N18_MASK = 0
_FACE_MASK = 0
for _d, _b in _POS.items():
    _s = abs(_d[0]) + abs(_d[1]) + abs(_d[2])
    if _s <= 2:
        _N18_MASK |= 1 << _b
    if _s == 1:
        _FACE_MASK |= 1 << _b


def _adjacency_masks():
    adj26 = [0] * 26
    adj6_18 = [0] * 26
    for b, p in enumerate(N26_DELTAS):
        for c, q in enumerate(N26_DELTAS):
            if b == c:
                continue
            d = (abs(p[0] - q[0]), abs(p[1] - q[1]), abs(p[2] - q[2]))
            if max(d) == 1:
                adj26[b] |= 1 << c
            if sum(d) == 1 and (_N18_MASK >> b & 1) and (_N18_MASK >> c & 1):
                adj6_18[b] |= 1 << c
    return adj26, adj6_18


_ADJ26, _ADJ6_18 = _adjacency_masks()


def _flood(start_bit: int, members: int, adj) -> int:
    """Members reachable from start_bit through the given adjacency masks."""
    frontier = 1 << start_bit
    visited = 0
    while frontier:
        visited |= frontier
        grow = 0
        f = frontier
        while f:
            low = f & -f
            grow |= adj[low.bit_length() - 1]
            f ^= low
        frontier = grow & members & ~visited
    return visited


_simple_cache: dict[int, bool] = {}


def simple_point_pattern(pattern: int) -> bool:
    """Simple-point test for 26-connected foreground / 6-connected background.

    ``pattern`` holds the 26 neighbor states (set = foreground). True when
    the foreground neighbors form one 26-component and the background
    face/edge neighbors form one 6-component that reaches a face neighbor.
    The dual convention (6-connected foreground) is this test applied to the
    complemented pattern.
    """
    pattern &= MASK26
    cached = _simple_cache.get(pattern)
    if cached is not None:
        return cached
    ok = False
    if pattern != 0:
        fg_seen = _flood((pattern & -pattern).bit_length() - 1, pattern, _ADJ26)
        if fg_seen == pattern:
            bg18 = ~pattern & _N18_MASK
            anchors = bg18 & _FACE_MASK
            if anchors:
                bg_seen = _flood((anchors & -anchors).bit_length() - 1, bg18, _ADJ6_18)
                ok = anchors & ~bg_seen == 0
    _simple_cache[pattern] = ok
    return ok


# ---------------------------------------------------------------------------
# topology march


def topology_march(values: np.ndarray, max_pops: int):
    """Monotone front march that raises values until every sublevel set is a
    6-connected, handle-free, cavity-free ball.

    Starting from the global minimum, voxels are accepted in key order where
    a voxel's key is its value clamped below by the last accepted key. A
    voxel is only accepted while it is a simple point of the accepted set
    (6-connected foreground, 26-connected background); otherwise it is
    parked, since its verdict cannot change until another of its neighbors
    is accepted, and re-queued exactly when that happens. Voxels still
    parked once the heap drains line a closed pocket (which smooth distance
    fields do not produce) and are flushed in value order without the
    topology test.

    Returns ``(corrected, seed_index, pops, status)`` with status 0 on
    success and 1 when ``max_pops`` was exhausted.
    """
    nx, ny, nz = values.shape
    flat = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    corrected = flat.copy()
    n = flat.size
    accepted = bytearray(n)
    discovered = bytearray(n)
    parked = bytearray(n)
    syx = ny * nz

    seed = int(np.argmin(flat))
    heap = [(float(flat[seed]), seed)]
    discovered[seed] = 1
    last = -np.inf
    first = True
    flush = False
    parked_count = 0
    pops = 0

    while True:
        if not heap:
            if parked_count == 0:
                break
            flush = True
            for idx in range(n):
                if parked[idx]:
                    parked[idx] = 0
                    v = flat[idx]
                    heapq.heappush(heap, (v if v > last else last, idx))
            parked_count = 0
        pops += 1
        if pops > max_pops:
            return corrected.reshape(values.shape), seed, pops, 1
        key, idx = heapq.heappop(heap)
        if accepted[idx]:
            continue
        x = idx // syx
        rem = idx - x * syx
        y = rem // nz
        z = rem - y * nz
        interior = 0 < x < nx - 1 and 0 < y < ny - 1 and 0 < z < nz - 1
        if not first and not flush:
            pattern = 0
            if interior:
                for b, (dx, dy, dz) in enumerate(N26_DELTAS):
                    if accepted[idx + (dx * syx + dy * nz + dz)]:
                        pattern |= 1 << b
            else:
                for b, (dx, dy, dz) in enumerate(N26_DELTAS):
                    px, py, pz = x + dx, y + dy, z + dz
                    if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                        if accepted[px * syx + py * nz + pz]:
                            pattern |= 1 << b
            # 6-connected foreground: dual of the (26, 6) pattern test
            if not simple_point_pattern(~pattern & MASK26):
                parked[idx] = 1
                parked_count += 1
                continue
        accepted[idx] = 1
        if flush:
            v = flat[idx]
            key = v if v > last else last
        corrected[idx] = key
        last = key
        first = False
        for dx, dy, dz in N26_DELTAS:
            px, py, pz = x + dx, y + dy, z + dz
            if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                nidx = px * syx + py * nz + pz
                if not discovered[nidx]:
                    discovered[nidx] = 1
                    v = flat[nidx]
                    heapq.heappush(heap, (v if v > last else last, nidx))
                elif parked[nidx]:
                    parked[nidx] = 0
                    parked_count -= 1
                    v = flat[nidx]
                    heapq.heappush(heap, (v if v > last else last, nidx))
    return corrected.reshape(values.shape), seed, pops, 0


# ---------------------------------------------------------------------------
# case-table surface extraction


def mc_emit(cx: np.ndarray, cy: np.ndarray, cz: np.ndarray, configs: np.ndarray, ny: int, nz: int) -> np.ndarray:
    """Emit triangles for active cells as global edge keys, shape (T, 3).

    Cells must already be in canonical C order; triangles follow the case
    table, so the output order is canonical. The key of a cell edge is
    ``(linear index of its lower voxel) * 3 + axis``, which is what welds
    shared vertices across cells.
    """
    counts = TRI_COUNT[configs]
    total = int(counts.sum())
    if total == 0:
        return np.zeros((0, 3), dtype=np.int64)
    cell_of_tri = np.repeat(np.arange(len(configs)), counts)
    starts = np.cumsum(counts) - counts
    rank = np.arange(total) - starts[cell_of_tri]
    cols = 3 * rank[:, None] + np.arange(3)
    edges = TRI_TABLE[configs[cell_of_tri][:, None], cols]
    off = EDGE_LOWER_OFFSET[edges]
    gx = cx[cell_of_tri].astype(np.int64)[:, None] + off[:, :, 0]
    gy = cy[cell_of_tri].astype(np.int64)[:, None] + off[:, :, 1]
    gz = cz[cell_of_tri].astype(np.int64)[:, None] + off[:, :, 2]
    return ((gx * ny + gy) * nz + gz) * 3 + EDGE_AXIS[edges]


# ---------------------------------------------------------------------------
# triangle-pair intersection batch

PLANE_EPS = 1e-10  # scaled by the plane normal length
LINE_EPS = 1e-10  # scaled by the intersection direction length
AREA_EPS = 1e-12  # projected overlap area for coplanar pairs

_CHUNK = 1 << 15


def _signs(d: np.ndarray, eps: np.ndarray) -> np.ndarray:
    s = np.zeros(d.shape, dtype=np.int8)
    s[d > eps[:, None]] = 1
    s[d < -eps[:, None]] = -1
    return s


def _chord(tri: np.ndarray, d: np.ndarray, s: np.ndarray):
    """Two points where a triangle meets the other plane, or invalid.

    Candidate slots are scanned in a fixed order (vertices 0..2, then edges
    01, 12, 20); a chord exists only when exactly two slots fire, which
    excludes single-point grazing contact.
    """
    m = len(tri)
    cand = np.zeros((m, 6, 3))
    valid = np.zeros((m, 6), dtype=bool)
    for i in range(3):
        valid[:, i] = s[:, i] == 0
        cand[:, i] = tri[:, i]
    for slot, (i, j) in enumerate(((0, 1), (1, 2), (2, 0)), start=3):
        crossing = s[:, i] * s[:, j] == -1
        valid[:, slot] = crossing
        denom = d[:, i] - d[:, j]
        denom = np.where(denom != 0.0, denom, 1.0)
        t = d[:, i] / denom
        cand[:, slot] = tri[:, i] + t[:, None] * (tri[:, j] - tri[:, i])
    ok = valid.sum(axis=1) == 2
    order = np.cumsum(valid, axis=1)
    rows = np.arange(m)
    p1 = cand[rows, np.argmax(valid & (order == 1), axis=1)]
    p2 = cand[rows, np.argmax(valid & (order == 2), axis=1)]
    return ok, p1, p2


def _cross_cols(ux, uy, uz, vx, vy, vz):
    return uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx


def _tri_chunk(pa: np.ndarray, pb: np.ndarray, hits: np.ndarray, segs: np.ndarray) -> list[int]:
    m = len(pa)
    a0, a1, a2 = pa[:, 0], pa[:, 1], pa[:, 2]
    b0, b1, b2 = pb[:, 0], pb[:, 1], pb[:, 2]

    e1, e2 = b1 - b0, b2 - b0
    n2x, n2y, n2z = _cross_cols(e1[:, 0], e1[:, 1], e1[:, 2], e2[:, 0], e2[:, 1], e2[:, 2])
    n2len = np.sqrt(n2x * n2x + n2y * n2y + n2z * n2z)
    f1, f2 = a1 - a0, a2 - a0
    n1x, n1y, n1z = _cross_cols(f1[:, 0], f1[:, 1], f1[:, 2], f2[:, 0], f2[:, 1], f2[:, 2])
    n1len = np.sqrt(n1x * n1x + n1y * n1y + n1z * n1z)
    proper = (n1len > 0.0) & (n2len > 0.0)

    da = np.stack(
        [
            (pa[:, i, 0] - b0[:, 0]) * n2x + (pa[:, i, 1] - b0[:, 1]) * n2y + (pa[:, i, 2] - b0[:, 2]) * n2z
            for i in range(3)
        ],
        axis=1,
    )
    db = np.stack(
        [
            (pb[:, i, 0] - a0[:, 0]) * n1x + (pb[:, i, 1] - a0[:, 1]) * n1y + (pb[:, i, 2] - a0[:, 2]) * n1z
            for i in range(3)
        ],
        axis=1,
    )
    sa = _signs(da, PLANE_EPS * n2len)
    sb = _signs(db, PLANE_EPS * n1len)

    coplanar = proper & np.all(sa == 0, axis=1)

    ok_a, a_p1, a_p2 = _chord(pa, da, sa)
    ok_b, b_p1, b_p2 = _chord(pb, db, sb)

    dx, dy, dz = _cross_cols(n1x, n1y, n1z, n2x, n2y, n2z)
    dlen = np.sqrt(dx * dx + dy * dy + dz * dz)

    ta1 = a_p1[:, 0] * dx + a_p1[:, 1] * dy + a_p1[:, 2] * dz
    ta2 = a_p2[:, 0] * dx + a_p2[:, 1] * dy + a_p2[:, 2] * dz
    tb1 = b_p1[:, 0] * dx + b_p1[:, 1] * dy + b_p1[:, 2] * dz
    tb2 = b_p2[:, 0] * dx + b_p2[:, 1] * dy + b_p2[:, 2] * dz
    a_lo = np.where(ta1 <= ta2, ta1, ta2)
    a_hi = np.where(ta1 <= ta2, ta2, ta1)
    b_lo = np.where(tb1 <= tb2, tb1, tb2)
    b_hi = np.where(tb1 <= tb2, tb2, tb1)
    a_lo_pt = np.where((ta1 <= ta2)[:, None], a_p1, a_p2)
    a_hi_pt = np.where((ta1 <= ta2)[:, None], a_p2, a_p1)
    b_lo_pt = np.where((tb1 <= tb2)[:, None], b_p1, b_p2)
    b_hi_pt = np.where((tb1 <= tb2)[:, None], b_p2, b_p1)

    lo = np.where(a_lo >= b_lo, a_lo, b_lo)
    hi = np.where(a_hi <= b_hi, a_hi, b_hi)
    cross_hit = proper & ~coplanar & ok_a & ok_b & (hi - lo > LINE_EPS * dlen)

    hits[cross_hit] = 1
    if cross_hit.any():
        lo_pt = np.where((a_lo >= b_lo)[:, None], a_lo_pt, b_lo_pt)
        hi_pt = np.where((a_hi <= b_hi)[:, None], a_hi_pt, b_hi_pt)
        segs[cross_hit, 0:3] = lo_pt[cross_hit]
        segs[cross_hit, 3:6] = hi_pt[cross_hit]
    return np.nonzero(coplanar)[0].tolist()


def coplanar_pair(a, b, nx, ny, nz):
    """Overlap test and widest contact segment for coplanar triangles.

    Scalar, rarely taken path; shared verbatim by the compiled backend so
    both agree bitwise. The triangles are projected along the dominant
    normal axis, clipped (Sutherland-Hodgman), and the overlap counts only
    if its projected area exceeds AREA_EPS. The reported segment is the
    farthest point pair of the clipped polygon, lifted back to the plane.
    """
    anx, any_, anz = abs(nx), abs(ny), abs(nz)
    if anx >= any_ and anx >= anz:
        k, u, v, nk = 0, 1, 2, nx
    elif any_ >= anz:
        k, u, v, nk = 1, 0, 2, ny
    else:
        k, u, v, nk = 2, 0, 1, nz

    def project(tri):
        poly = [(tri[i][u], tri[i][v]) for i in range(3)]
        area2 = 0.0
        for i in range(3):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % 3]
            area2 += x0 * y1 - x1 * y0
        if area2 < 0.0:
            poly.reverse()
        return poly

    subject = project(a)
    clipper = project(b)
    for ci in range(3):
        cx0, cy0 = clipper[ci]
        cx1, cy1 = clipper[(ci + 1) % 3]
        ex, ey = cx1 - cx0, cy1 - cy0
        out = []
        for si in range(len(subject)):
            sx0, sy0 = subject[si]
            sx1, sy1 = subject[(si + 1) % len(subject)]
            d0 = ex * (sy0 - cy0) - ey * (sx0 - cx0)
            d1 = ex * (sy1 - cy0) - ey * (sx1 - cx0)
            if d0 >= 0.0:
                out.append((sx0, sy0))
                if d1 < 0.0:
                    t = d0 / (d0 - d1)
                    out.append((sx0 + t * (sx1 - sx0), sy0 + t * (sy1 - sy0)))
            elif d1 >= 0.0:
                t = d0 / (d0 - d1)
                out.append((sx0 + t * (sx1 - sx0), sy0 + t * (sy1 - sy0)))
        subject = out
        if not subject:
            return False, None
    area2 = 0.0
    for i in range(len(subject)):
        x0, y0 = subject[i]
        x1, y1 = subject[(i + 1) % len(subject)]
        area2 += x0 * y1 - x1 * y0
    if area2 < 0.0:
        area2 = -area2
    if 0.5 * area2 <= AREA_EPS:
        return False, None

    best = -1.0
    bi = bj = 0
    for i in range(len(subject)):
        for j in range(i + 1, len(subject)):
            ddx = subject[i][0] - subject[j][0]
            ddy = subject[i][1] - subject[j][1]
            d2 = ddx * ddx + ddy * ddy
            if d2 > best:
                best, bi, bj = d2, i, j

    base = nx * a[0][0] + ny * a[0][1] + nz * a[0][2]
    nu = (nx, ny, nz)[u]
    nv = (nx, ny, nz)[v]

    def lift(p):
        w = (base - nu * p[0] - nv * p[1]) / nk
        pt = [0.0, 0.0, 0.0]
        pt[u] = p[0]
        pt[v] = p[1]
        pt[k] = w
        return pt

    return True, lift(subject[bi]) + lift(subject[bj])


def tri_pair_intersections(pa: np.ndarray, pb: np.ndarray):
    """Batch segment-or-overlap intersection test for triangle pairs.

    ``pa``/``pb`` are (P, 3, 3) vertex arrays. Returns hit flags (uint8)
    and, per hit, the two endpoints of the contact segment as (P, 6).
    Grazing contact at a single point does not count; degenerate (zero
    normal) triangles never report a hit and must be filtered by callers
    who care.
    """
    pa = np.ascontiguousarray(pa, dtype=np.float64)
    pb = np.ascontiguousarray(pb, dtype=np.float64)
    p = len(pa)
    hits = np.zeros(p, dtype=np.uint8)
    segs = np.zeros((p, 6), dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for s in range(0, p, _CHUNK):
            e = min(s + _CHUNK, p)
            cop = _tri_chunk(pa[s:e], pb[s:e], hits[s:e], segs[s:e])
            for i in cop:
                a = pa[s + i]
                b = pb[s + i]
                f1x, f1y, f1z = a[1, 0] - a[0, 0], a[1, 1] - a[0, 1], a[1, 2] - a[0, 2]
                f2x, f2y, f2z = a[2, 0] - a[0, 0], a[2, 1] - a[0, 1], a[2, 2] - a[0, 2]
                cnx, cny, cnz = _cross_cols(f1x, f1y, f1z, f2x, f2y, f2z)
                hit, seg = coplanar_pair(a.tolist(), b.tolist(), cnx, cny, cnz)
                if hit:
                    hits[s + i] = 1
                    segs[s + i] = seg
    return hits, segs
