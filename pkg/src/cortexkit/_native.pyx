# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels.

Mirrors ``cortexkit._kernels._purepy`` operation for operation; the test
suite asserts bit-identical outputs, so any arithmetic change must be made
in both places. Neighborhood tables and epsilons are imported from the pure
module so the two cannot drift apart. The rare coplanar triangle path calls
straight into the pure implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

from cortexkit.mc_tables import EDGE_AXIS, EDGE_LOWER_OFFSET, TRI_COUNT, TRI_TABLE
from cortexkit._kernels import _purepy

BACKEND = "native"

# ---------------------------------------------------------------------------
# digital topology

cdef unsigned int _MASK26 = (1 << 26) - 1
cdef unsigned int _N18 = 0
cdef unsigned int _FACE = 0
cdef unsigned int _ADJ26[26]
cdef unsigned int _ADJ6[26]
cdef int _DX[26]
cdef int _DY[26]
cdef int _DZ[26]


def _init_tables():
    global _N18, _FACE
    _N18 = _purepy._N18_MASK
    _FACE = _purepy._FACE_MASK
    for b in range(26):
        _ADJ26[b] = _purepy._ADJ26[b]
        _ADJ6[b] = _purepy._ADJ6_18[b]
        _DX[b] = _purepy.N26_DELTAS[b][0]
        _DY[b] = _purepy.N26_DELTAS[b][1]
        _DZ[b] = _purepy.N26_DELTAS[b][2]


_init_tables()


cdef unsigned int _flood(int start, unsigned int members, unsigned int* adj) nogil:
    cdef unsigned int visited = 1u << start
    cdef unsigned int frontier = visited
    cdef unsigned int grow
    cdef int b
    while frontier:
        grow = 0
        for b in range(26):
            if frontier >> b & 1u:
                grow |= adj[b]
        frontier = grow & members & ~visited
        visited |= frontier
    return visited


cdef bint _simple(unsigned int pattern) nogil:
    cdef unsigned int p = pattern & _MASK26
    cdef unsigned int bg18, anchors, seen
    cdef int b, start
    if p == 0:
        return False
    start = 0
    for b in range(26):
        if p >> b & 1u:
            start = b
            break
    seen = _flood(start, p, _ADJ26)
    if seen != p:
        return False
    bg18 = ~p & _N18
    anchors = bg18 & _FACE
    if anchors == 0:
        return False
    for b in range(26):
        if anchors >> b & 1u:
            start = b
            break
    seen = _flood(start, bg18, _ADJ6)
    return (anchors & ~seen) == 0


def simple_point_pattern(pattern):
    """(26, 6) simple-point test on a 26-bit foreground pattern."""
    return bool(_simple(<unsigned int> (pattern & _MASK26)))


# ---------------------------------------------------------------------------
# topology march

cdef inline void _heap_push(double* hk, long* hi, Py_ssize_t* size, double key, long idx) nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    cdef double tk
    cdef long ti
    size[0] += 1
    hk[i] = key
    hi[i] = idx
    while i > 0:
        parent = (i - 1) >> 1
        if hk[parent] < hk[i] or (hk[parent] == hk[i] and hi[parent] < hi[i]):
            break
        tk = hk[parent]; hk[parent] = hk[i]; hk[i] = tk
        ti = hi[parent]; hi[parent] = hi[i]; hi[i] = ti
        i = parent


cdef inline void _heap_pop(double* hk, long* hi, Py_ssize_t* size, double* key, long* idx) nogil:
    cdef Py_ssize_t i = 0, child
    cdef Py_ssize_t n = size[0] - 1
    cdef double tk
    cdef long ti
    key[0] = hk[0]
    idx[0] = hi[0]
    hk[0] = hk[n]
    hi[0] = hi[n]
    size[0] = n
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and (
            hk[child + 1] < hk[child] or (hk[child + 1] == hk[child] and hi[child + 1] < hi[child])
        ):
            child += 1
        if hk[child] < hk[i] or (hk[child] == hk[i] and hi[child] < hi[i]):
            tk = hk[child]; hk[child] = hk[i]; hk[i] = tk
            ti = hi[child]; hi[child] = hi[i]; hi[i] = ti
            i = child
        else:
            break


def topology_march(values, long long max_pops):
    """See the pure backend; same algorithm, same returns, C heap."""
    shape = values.shape
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] corrected = flat.copy()
    cdef Py_ssize_t n = flat.shape[0]
    cdef int nx = shape[0], ny = shape[1], nz = shape[2]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] accepted = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] discovered = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] parked = np.zeros(n, dtype=np.uint8)
    cdef double* fv = <double*> cnp.PyArray_DATA(flat)
    cdef double* cv = <double*> cnp.PyArray_DATA(corrected)
    cdef unsigned char* acc = <unsigned char*> cnp.PyArray_DATA(accepted)
    cdef unsigned char* disc = <unsigned char*> cnp.PyArray_DATA(discovered)
    cdef unsigned char* prk = <unsigned char*> cnp.PyArray_DATA(parked)

    cdef double* hk = <double*> malloc((n + 1) * sizeof(double))
    cdef long* hi = <long*> malloc((n + 1) * sizeof(long))
    if hk == NULL or hi == NULL:
        free(hk); free(hi)
        raise MemoryError()

    cdef Py_ssize_t heap_size = 0
    cdef long seed = 0, idx, nidx, j
    cdef Py_ssize_t i
    cdef long long pops = 0, parked_count = 0
    cdef int status = 0
    cdef bint first = True, flush = False
    cdef double last = -np.inf
    cdef double key, v
    cdef int x, y, z, px, py, pz, b
    cdef long rem, syx = <long> ny * nz
    cdef unsigned int pattern
    cdef bint interior

    for i in range(1, n):
        if fv[i] < fv[seed]:
            seed = i
    _heap_push(hk, hi, &heap_size, fv[seed], seed)
    disc[seed] = 1

    try:
        with nogil:
            while True:
                if heap_size == 0:
                    if parked_count == 0:
                        break
                    flush = True
                    for j in range(n):
                        if prk[j]:
                            prk[j] = 0
                            v = fv[j]
                            _heap_push(hk, hi, &heap_size, v if v > last else last, j)
                    parked_count = 0
                pops += 1
                if pops > max_pops:
                    status = 1
                    break
                _heap_pop(hk, hi, &heap_size, &key, &idx)
                if acc[idx]:
                    continue
                x = <int> (idx // syx)
                rem = idx - x * syx
                y = <int> (rem // nz)
                z = <int> (rem - y * nz)
                interior = 0 < x < nx - 1 and 0 < y < ny - 1 and 0 < z < nz - 1
                if not first and not flush:
                    pattern = 0
                    if interior:
                        for b in range(26):
                            if acc[idx + (_DX[b] * syx + _DY[b] * nz + _DZ[b])]:
                                pattern |= 1u << b
                    else:
                        for b in range(26):
                            px = x + _DX[b]; py = y + _DY[b]; pz = z + _DZ[b]
                            if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                                if acc[px * syx + py * nz + pz]:
                                    pattern |= 1u << b
                    if not _simple(~pattern & _MASK26):
                        # park: the verdict cannot change until one of the
                        # 26 neighbors is accepted, which re-queues it
                        prk[idx] = 1
                        parked_count += 1
                        continue
                acc[idx] = 1
                if flush:
                    v = fv[idx]
                    key = v if v > last else last
                cv[idx] = key
                last = key
                first = False
                for b in range(26):
                    px = x + _DX[b]; py = y + _DY[b]; pz = z + _DZ[b]
                    if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                        nidx = px * syx + py * nz + pz
                        if not disc[nidx]:
                            disc[nidx] = 1
                            v = fv[nidx]
                            _heap_push(hk, hi, &heap_size, v if v > last else last, nidx)
                        elif prk[nidx]:
                            prk[nidx] = 0
                            parked_count -= 1
                            v = fv[nidx]
                            _heap_push(hk, hi, &heap_size, v if v > last else last, nidx)
    finally:
        free(hk)
        free(hi)
    return corrected.reshape(shape), int(seed), int(pops), status


# ---------------------------------------------------------------------------
# case-table surface extraction

_TRI_TABLE32 = np.ascontiguousarray(TRI_TABLE, dtype=np.int32)
_TRI_COUNT32 = np.ascontiguousarray(TRI_COUNT, dtype=np.int32)
_EDGE_AXIS32 = np.ascontiguousarray(EDGE_AXIS, dtype=np.int32)
_EDGE_OFF32 = np.ascontiguousarray(EDGE_LOWER_OFFSET, dtype=np.int32)


def mc_emit(cx, cy, cz, configs, int ny, int nz):
    """Same contract as the pure backend: triangle edge keys, shape (T, 3)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cx64 = np.ascontiguousarray(cx, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cy64 = np.ascontiguousarray(cy, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cz64 = np.ascontiguousarray(cz, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cfg = np.ascontiguousarray(configs, dtype=np.int32)
    cdef int[:, ::1] table = _TRI_TABLE32
    cdef int[::1] count = _TRI_COUNT32
    cdef int[::1] axis = _EDGE_AXIS32
    cdef int[:, ::1] off = _EDGE_OFF32
    cdef Py_ssize_t ncell = cfg.shape[0]
    cdef Py_ssize_t i, t, k
    cdef long long total = 0
    for i in range(ncell):
        total += count[cfg[i]]
    out = np.zeros((total, 3), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] keys = out
    cdef Py_ssize_t row = 0
    cdef int c, e, ntri
    cdef long long gx, gy, gz
    for i in range(ncell):
        c = cfg[i]
        ntri = count[c]
        for t in range(ntri):
            for k in range(3):
                e = table[c, 3 * t + k]
                gx = cx64[i] + off[e, 0]
                gy = cy64[i] + off[e, 1]
                gz = cz64[i] + off[e, 2]
                keys[row, k] = ((gx * ny + gy) * nz + gz) * 3 + axis[e]
            row += 1
    return out


# ---------------------------------------------------------------------------
# triangle-pair intersection batch

cdef double PLANE_EPS = _purepy.PLANE_EPS
cdef double LINE_EPS = _purepy.LINE_EPS


cdef inline int _sign(double d, double eps) nogil:
    if d > eps:
        return 1
    if d < -eps:
        return -1
    return 0


cdef bint _chord_c(double* t0, double* t1, double* t2,
                   double d0, double d1, double d2,
                   int s0, int s1, int s2,
                   double* p1, double* p2) nogil:
    """First two candidate points in slot order v0,v1,v2,e01,e12,e20."""
    cdef double* pts[2]
    cdef int c = 0, k
    cdef double t
    pts[0] = p1
    pts[1] = p2
    if s0 == 0:
        for k in range(3):
            pts[c][k] = t0[k]
        c += 1
    if s1 == 0:
        for k in range(3):
            pts[c][k] = t1[k]
        c += 1
    if s2 == 0:
        for k in range(3):
            pts[c][k] = t2[k]
        c += 1
    if s0 * s1 == -1 and c < 2:
        t = d0 / (d0 - d1)
        for k in range(3):
            pts[c][k] = t0[k] + t * (t1[k] - t0[k])
        c += 1
    if s1 * s2 == -1 and c < 2:
        t = d1 / (d1 - d2)
        for k in range(3):
            pts[c][k] = t1[k] + t * (t2[k] - t1[k])
        c += 1
    if s2 * s0 == -1 and c < 2:
        t = d2 / (d2 - d0)
        for k in range(3):
            pts[c][k] = t2[k] + t * (t0[k] - t2[k])
        c += 1
    return c == 2


def tri_pair_intersections(pa, pb):
    """Same contract and semantics as the pure backend."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] a = np.ascontiguousarray(pa, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] b = np.ascontiguousarray(pb, dtype=np.float64)
    cdef Py_ssize_t p = a.shape[0]
    hits_arr = np.zeros(p, dtype=np.uint8)
    segs_arr = np.zeros((p, 6), dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hits = hits_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=2] segs = segs_arr
    cdef Py_ssize_t i
    cdef double* A
    cdef double* B
    cdef double e1x, e1y, e1z, e2x, e2y, e2z
    cdef double n1x, n1y, n1z, n2x, n2y, n2z, n1len, n2len
    cdef double da0, da1, da2, db0, db1, db2, epsa, epsb
    cdef int sa0, sa1, sa2, sb0, sb1, sb2
    cdef double ap1[3]
    cdef double ap2[3]
    cdef double bp1[3]
    cdef double bp2[3]
    cdef double dx, dy, dz, dlen
    cdef double ta1, ta2, tb1, tb2, a_lo, a_hi, b_lo, b_hi, lo, hi
    cdef double* a_lo_pt
    cdef double* a_hi_pt
    cdef double* b_lo_pt
    cdef double* b_hi_pt
    cdef double* lo_pt
    cdef double* hi_pt
    cdef int k
    coplanar_rows = []

    for i in range(p):
        A = <double*> cnp.PyArray_DATA(a) + 9 * i
        B = <double*> cnp.PyArray_DATA(b) + 9 * i
        e1x = B[3] - B[0]; e1y = B[4] - B[1]; e1z = B[5] - B[2]
        e2x = B[6] - B[0]; e2y = B[7] - B[1]; e2z = B[8] - B[2]
        n2x = e1y * e2z - e1z * e2y
        n2y = e1z * e2x - e1x * e2z
        n2z = e1x * e2y - e1y * e2x
        n2len = sqrt(n2x * n2x + n2y * n2y + n2z * n2z)
        e1x = A[3] - A[0]; e1y = A[4] - A[1]; e1z = A[5] - A[2]
        e2x = A[6] - A[0]; e2y = A[7] - A[1]; e2z = A[8] - A[2]
        n1x = e1y * e2z - e1z * e2y
        n1y = e1z * e2x - e1x * e2z
        n1z = e1x * e2y - e1y * e2x
        n1len = sqrt(n1x * n1x + n1y * n1y + n1z * n1z)
        if not (n1len > 0.0 and n2len > 0.0):
            continue
        da0 = (A[0] - B[0]) * n2x + (A[1] - B[1]) * n2y + (A[2] - B[2]) * n2z
        da1 = (A[3] - B[0]) * n2x + (A[4] - B[1]) * n2y + (A[5] - B[2]) * n2z
        da2 = (A[6] - B[0]) * n2x + (A[7] - B[1]) * n2y + (A[8] - B[2]) * n2z
        epsa = PLANE_EPS * n2len
        sa0 = _sign(da0, epsa); sa1 = _sign(da1, epsa); sa2 = _sign(da2, epsa)
        if sa0 == 0 and sa1 == 0 and sa2 == 0:
            coplanar_rows.append(i)
            continue
        db0 = (B[0] - A[0]) * n1x + (B[1] - A[1]) * n1y + (B[2] - A[2]) * n1z
        db1 = (B[3] - A[0]) * n1x + (B[4] - A[1]) * n1y + (B[5] - A[2]) * n1z
        db2 = (B[6] - A[0]) * n1x + (B[7] - A[1]) * n1y + (B[8] - A[2]) * n1z
        epsb = PLANE_EPS * n1len
        sb0 = _sign(db0, epsb); sb1 = _sign(db1, epsb); sb2 = _sign(db2, epsb)
        if not _chord_c(A, A + 3, A + 6, da0, da1, da2, sa0, sa1, sa2, ap1, ap2):
            continue
        if not _chord_c(B, B + 3, B + 6, db0, db1, db2, sb0, sb1, sb2, bp1, bp2):
            continue
        dx = n1y * n2z - n1z * n2y
        dy = n1z * n2x - n1x * n2z
        dz = n1x * n2y - n1y * n2x
        dlen = sqrt(dx * dx + dy * dy + dz * dz)
        ta1 = ap1[0] * dx + ap1[1] * dy + ap1[2] * dz
        ta2 = ap2[0] * dx + ap2[1] * dy + ap2[2] * dz
        tb1 = bp1[0] * dx + bp1[1] * dy + bp1[2] * dz
        tb2 = bp2[0] * dx + bp2[1] * dy + bp2[2] * dz
        if ta1 <= ta2:
            a_lo = ta1; a_hi = ta2; a_lo_pt = ap1; a_hi_pt = ap2
        else:
            a_lo = ta2; a_hi = ta1; a_lo_pt = ap2; a_hi_pt = ap1
        if tb1 <= tb2:
            b_lo = tb1; b_hi = tb2; b_lo_pt = bp1; b_hi_pt = bp2
        else:
            b_lo = tb2; b_hi = tb1; b_lo_pt = bp2; b_hi_pt = bp1
        if a_lo >= b_lo:
            lo = a_lo; lo_pt = a_lo_pt
        else:
            lo = b_lo; lo_pt = b_lo_pt
        if a_hi <= b_hi:
            hi = a_hi; hi_pt = a_hi_pt
        else:
            hi = b_hi; hi_pt = b_hi_pt
        if hi - lo > LINE_EPS * dlen:
            hits[i] = 1
            for k in range(3):
                segs[i, k] = lo_pt[k]
                segs[i, 3 + k] = hi_pt[k]

    for i in coplanar_rows:
        tri_a = a[i].tolist()
        tri_b = b[i].tolist()
        f1 = [tri_a[1][k] - tri_a[0][k] for k in range(3)]
        f2 = [tri_a[2][k] - tri_a[0][k] for k in range(3)]
        cn = (
            f1[1] * f2[2] - f1[2] * f2[1],
            f1[2] * f2[0] - f1[0] * f2[2],
            f1[0] * f2[1] - f1[1] * f2[0],
        )
        hit, seg = _purepy.coplanar_pair(tri_a, tri_b, cn[0], cn[1], cn[2])
        if hit:
            hits[i] = 1
            for k in range(6):
                segs[i, k] = seg[k]
    return hits_arr, segs_arr
