# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: BVH ray casting and FNV-1a hashing.

The arithmetic in ``_intersect`` mirrors ``_kernels_py.intersect_many``
operation for operation so both backends return bit-identical depths.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef double DET_EPS = 1e-15
cdef double T_EPS = 1e-9
cdef double INF = float("inf")


cdef inline double _intersect(
    double ox, double oy, double oz,
    double dx, double dy, double dz,
    double v0x, double v0y, double v0z,
    double e1x, double e1y, double e1z,
    double e2x, double e2y, double e2z,
) nogil:
    cdef double p0, p1, p2, det, inv, sx, sy, sz, u, v, q0, q1, q2, t
    p0 = dy * e2z - dz * e2y
    p1 = dz * e2x - dx * e2z
    p2 = dx * e2y - dy * e2x
    det = e1x * p0 + e1y * p1 + e1z * p2
    if det > -DET_EPS and det < DET_EPS:
        return INF
    inv = 1.0 / det
    sx = ox - v0x
    sy = oy - v0y
    sz = oz - v0z
    u = (sx * p0 + sy * p1 + sz * p2) * inv
    if u < 0.0 or u > 1.0:
        return INF
    q0 = sy * e1z - sz * e1y
    q1 = sz * e1x - sx * e1z
    q2 = sx * e1y - sy * e1x
    v = (dx * q0 + dy * q1 + dz * q2) * inv
    if v < 0.0 or u + v > 1.0:
        return INF
    t = (e2x * q0 + e2y * q1 + e2z * q2) * inv
    if t <= T_EPS:
        return INF
    return t


cdef inline bint _slab(
    double o, double d, double inv_d, double lo, double hi,
    double* tnear, double* tfar,
) nogil:
    cdef double t1, t2
    if d == 0.0:
        return lo <= o <= hi
    t1 = (lo - o) * inv_d
    t2 = (hi - o) * inv_d
    if t1 > t2:
        t1, t2 = t2, t1
    if t1 > tnear[0]:
        tnear[0] = t1
    if t2 < tfar[0]:
        tfar[0] = t2
    return tnear[0] <= tfar[0]


cdef inline double _box_entry(
    double ox, double oy, double oz,
    double dx, double dy, double dz,
    double ix, double iy, double iz,
    const double[:, ::1] bmin, const double[:, ::1] bmax, Py_ssize_t node,
    double tmax,
) nogil:
    cdef double tnear = 0.0
    cdef double tfar = tmax
    if not _slab(ox, dx, ix, bmin[node, 0], bmax[node, 0], &tnear, &tfar):
        return INF
    if not _slab(oy, dy, iy, bmin[node, 1], bmax[node, 1], &tnear, &tfar):
        return INF
    if not _slab(oz, dz, iz, bmin[node, 2], bmax[node, 2], &tnear, &tfar):
        return INF
    return tnear


def raycast_bvh(
    const double[::1] origin,
    const double[:, ::1] dirs,
    const double[:, ::1] v0,
    const double[:, ::1] e1,
    const double[:, ::1] e2,
    const double[:, ::1] bmin,
    const double[:, ::1] bmax,
    const int64_t[::1] left,
    const int64_t[::1] right,
    const int64_t[::1] start,
    const int64_t[::1] count,
    const int64_t[::1] tri_ids,
):
    """Nearest hit per ray. Returns ``(t, tri)``; misses are ``(inf, -1)``."""
    cdef Py_ssize_t n = dirs.shape[0]
    t_out = np.full(n, np.inf, dtype=np.float64)
    id_out = np.full(n, -1, dtype=np.int64)
    cdef double[::1] tv = t_out
    cdef int64_t[::1] iv = id_out
    cdef int64_t stack[256]
    cdef Py_ssize_t r, sp, node, k, a, b
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double dx, dy, dz, ix, iy, iz, best, t, ta, tb
    cdef int64_t best_id, tid
    with nogil:
        for r in range(n):
            dx = dirs[r, 0]
            dy = dirs[r, 1]
            dz = dirs[r, 2]
            ix = 1.0 / dx if dx != 0.0 else INF
            iy = 1.0 / dy if dy != 0.0 else INF
            iz = 1.0 / dz if dz != 0.0 else INF
            best = INF
            best_id = -1
            if _box_entry(ox, oy, oz, dx, dy, dz, ix, iy, iz, bmin, bmax, 0, best) == INF:
                continue
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if count[node] > 0:
                    for k in range(start[node], start[node] + count[node]):
                        t = _intersect(
                            ox, oy, oz, dx, dy, dz,
                            v0[k, 0], v0[k, 1], v0[k, 2],
                            e1[k, 0], e1[k, 1], e1[k, 2],
                            e2[k, 0], e2[k, 1], e2[k, 2],
                        )
                        if t == INF:
                            continue
                        tid = tri_ids[k]
                        if t < best or (t == best and tid < best_id):
                            best = t
                            best_id = tid
                    continue
                a = left[node]
                b = right[node]
                ta = _box_entry(ox, oy, oz, dx, dy, dz, ix, iy, iz, bmin, bmax, a, best)
                tb = _box_entry(ox, oy, oz, dx, dy, dz, ix, iy, iz, bmin, bmax, b, best)
                # push the farther child first so the nearer one pops next
                if ta <= tb:
                    if tb != INF:
                        stack[sp] = b
                        sp += 1
                    if ta != INF:
                        stack[sp] = a
                        sp += 1
                else:
                    if ta != INF:
                        stack[sp] = a
                        sp += 1
                    if tb != INF:
                        stack[sp] = b
                        sp += 1
            tv[r] = best
            iv[r] = best_id
    return t_out, id_out


def fnv1a64(const unsigned char[::1] data):
    cdef uint64_t h = 0xcbf29ce484222325ULL
    cdef uint64_t prime = 0x100000001b3ULL
    cdef Py_ssize_t i, n = data.shape[0]
    with nogil:
        for i in range(n):
            h ^= data[i]
            h *= prime
    return int(h)
