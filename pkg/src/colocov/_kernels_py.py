"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and the same floating-point operation order, so results are
bit-identical to the compiled path. Traversal is breadth-first over
(ray, node) pairs instead of a per-ray stack.
"""

from __future__ import annotations

import numpy as np

DET_EPS = 1e-15
T_EPS = 1e-9
_RAY_CHUNK = 4096

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def intersect_many(origin, d, v0, e1, e2):
    """Moller-Trumbore for paired rows of directions and triangles.

    All arrays broadcast against each other along the leading axis; ``origin``
    is a single 3-vector shared by every ray. Misses are ``inf``.
    """
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    e1x, e1y, e1z = e1[..., 0], e1[..., 1], e1[..., 2]
    e2x, e2y, e2z = e2[..., 0], e2[..., 1], e2[..., 2]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p0 = dy * e2z - dz * e2y
        p1 = dz * e2x - dx * e2z
        p2 = dx * e2y - dy * e2x
        det = e1x * p0 + e1y * p1 + e1z * p2
        ok = ~((det > -DET_EPS) & (det < DET_EPS))
        inv = 1.0 / det
        sx = origin[0] - v0[..., 0]
        sy = origin[1] - v0[..., 1]
        sz = origin[2] - v0[..., 2]
        u = (sx * p0 + sy * p1 + sz * p2) * inv
        ok &= ~((u < 0.0) | (u > 1.0))
        q0 = sy * e1z - sz * e1y
        q1 = sz * e1x - sx * e1z
        q2 = sx * e1y - sy * e1x
        v = (dx * q0 + dy * q1 + dz * q2) * inv
        ok &= ~((v < 0.0) | (u + v > 1.0))
        t = (e2x * q0 + e2y * q1 + e2z * q2) * inv
        ok &= ~(t <= T_EPS)
    return np.where(ok, t, np.inf)


def _box_entry(origin, d, inv_d, lo, hi, tmax):
    tnear = np.zeros(len(d))
    tfar = tmax.copy()
    alive = np.ones(len(d), dtype=bool)
    with np.errstate(invalid="ignore", over="ignore"):
        for ax in range(3):
            o = origin[ax]
            da = d[:, ax]
            flat = da == 0.0
            alive &= ~(flat & ((o < lo[:, ax]) | (o > hi[:, ax])))
            t1 = (lo[:, ax] - o) * inv_d[:, ax]
            t2 = (hi[:, ax] - o) * inv_d[:, ax]
            t_lo = np.where(flat, -np.inf, np.minimum(t1, t2))
            t_hi = np.where(flat, np.inf, np.maximum(t1, t2))
            tnear = np.maximum(tnear, t_lo)
            tfar = np.minimum(tfar, t_hi)
    alive &= tnear <= tfar
    return np.where(alive, tnear, np.inf)


def _raycast_chunk(origin, dirs, v0, e1, e2, bmin, bmax, left, right, start, count, tri_ids):
    n = len(dirs)
    with np.errstate(divide="ignore"):
        inv_d = np.where(dirs != 0.0, 1.0 / np.where(dirs != 0.0, dirs, 1.0), np.inf)
    best = np.full(n, np.inf)
    best_id = np.full(n, -1, dtype=np.int64)
    ray = np.arange(n)
    node = np.zeros(n, dtype=np.int64)
    while ray.size:
        entry = _box_entry(origin, dirs[ray], inv_d[ray], bmin[node], bmax[node], best[ray])
        keep = entry != np.inf
        ray, node = ray[keep], node[keep]
        leaf = count[node] > 0
        lr, ln = ray[leaf], node[leaf]
        if lr.size:
            cnt = count[ln]
            owner = np.repeat(np.arange(lr.size), cnt)
            offs = np.cumsum(cnt) - cnt
            k = start[ln][owner] + (np.arange(owner.size) - offs[owner])
            rr = lr[owner]
            t = intersect_many(origin, dirs[rr], v0[k], e1[k], e2[k])
            hit = t != np.inf
            rr, t, tid = rr[hit], t[hit], tri_ids[k][hit]
            if rr.size:
                order = np.lexsort((tid, t, rr))
                rr, t, tid = rr[order], t[order], tid[order]
                first = np.ones(rr.size, dtype=bool)
                first[1:] = rr[1:] != rr[:-1]
                rr, t, tid = rr[first], t[first], tid[first]
                better = (t < best[rr]) | ((t == best[rr]) & (tid < best_id[rr]))
                best[rr[better]] = t[better]
                best_id[rr[better]] = tid[better]
        ir, inn = ray[~leaf], node[~leaf]
        ray = np.concatenate([ir, ir])
        node = np.concatenate([left[inn], right[inn]])
    return best, best_id


def raycast_bvh(origin, dirs, v0, e1, e2, bmin, bmax, left, right, start, count, tri_ids):
    """Nearest hit per ray. Returns ``(t, tri)``; misses are ``(inf, -1)``."""
    origin = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    t_out = np.full(len(dirs), np.inf)
    id_out = np.full(len(dirs), -1, dtype=np.int64)
    for s in range(0, len(dirs), _RAY_CHUNK):
        sl = slice(s, s + _RAY_CHUNK)
        t_out[sl], id_out[sl] = _raycast_chunk(
            origin, dirs[sl], v0, e1, e2, bmin, bmax, left, right, start, count, tri_ids
        )
    return t_out, id_out


def fnv1a64(data) -> int:
    h = _FNV_OFFSET
    for byte in bytes(data):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h
