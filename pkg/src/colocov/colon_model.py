"""Colon geometry: lumen centerline, surface mesh, and arc-length projection."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SPLINE_TABLE_SIZE = 4096
DENSE_SAMPLES = 2048
TERNARY_ITERS = 20
_CHUNK = 256

INTERPOLATIONS = ("catmull_rom", "polyline")


def _catmull_rom(points: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Uniform Catmull-Rom through ``points`` at parameters ``u`` in [0, k-1]."""
    k = len(points)
    ext = np.vstack([2 * points[0] - points[1], points, 2 * points[-1] - points[-2]])
    seg = np.clip(np.floor(u).astype(np.int64), 0, k - 2)
    s = (u - seg)[:, None]
    p0, p1, p2, p3 = ext[seg], ext[seg + 1], ext[seg + 2], ext[seg + 3]
    s2 = s * s
    s3 = s2 * s
    return 0.5 * (
        2 * p1
        + (p2 - p0) * s
        + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s2
        + (3 * p1 - p0 - 3 * p2 + p3) * s3
    )


@dataclass(frozen=True, eq=False)
class LumenCurve:
    """Arc-length parameterized centerline ``s(l)``, ``l`` in ``[0, L]``.

    ``catmull_rom`` curves are tabulated at 4096 parameter values and treated
    as the polyline through those samples; ``polyline`` curves use the control
    points directly.
    """

    control_points: np.ndarray
    interpolation: str = "catmull_rom"
    knots: np.ndarray = field(init=False, repr=False)
    knot_params: np.ndarray = field(init=False, repr=False)
    arc_table: np.ndarray = field(init=False, repr=False)
    total_length: float = field(init=False)

    def __post_init__(self):
        cp = np.array(self.control_points, dtype=np.float64)
        if cp.ndim != 2 or cp.shape[1] != 3 or len(cp) < 2:
            raise ValueError("control_points must be a (k>=2, 3) array")
        if not np.all(np.isfinite(cp)):
            raise ValueError("control_points must be finite")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        cp.setflags(write=False)
        if self.interpolation == "polyline":
            u = np.arange(len(cp), dtype=np.float64)
            knots = cp.copy()
        else:
            u = np.linspace(0.0, len(cp) - 1.0, SPLINE_TABLE_SIZE)
            knots = _catmull_rom(cp, u)
        seg = np.linalg.norm(np.diff(knots, axis=0), axis=1)
        if np.any(seg <= 0.0):
            raise ValueError("lumen has repeated points; arc table would not be strictly increasing")
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        for a in (u, knots, arc):
            a.setflags(write=False)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "knot_params", u)
        object.__setattr__(self, "arc_table", arc)
        object.__setattr__(self, "total_length", float(arc[-1]))

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.arc_table)

    def _check_range(self, ell: np.ndarray) -> np.ndarray:
        L = self.total_length
        if not np.all(np.isfinite(ell)):
            raise ValueError("arc length must be finite")
        slack = 1e-12 * L
        if np.any(ell < -slack) or np.any(ell > L + slack):
            raise ValueError(f"arc length outside [0, {L}]")
        return np.clip(ell, 0.0, L)

    def evaluate(self, ell) -> np.ndarray:
        """Point(s) on the curve at arc length ``ell``."""
        ell = np.asarray(ell, dtype=np.float64)
        flat = self._check_range(ell.reshape(-1))
        out = self._eval_unchecked(flat)
        return out.reshape(ell.shape + (3,))

    def _eval_unchecked(self, ell: np.ndarray) -> np.ndarray:
        arc = self.arc_table
        j = np.clip(np.searchsorted(arc, ell, side="right") - 1, 0, len(arc) - 2)
        frac = (ell - arc[j]) / (arc[j + 1] - arc[j])
        return self.knots[j] + frac[..., None] * (self.knots[j + 1] - self.knots[j])

    def tangent(self, ell) -> np.ndarray:
        """Unit tangent by central difference over roughly one table segment."""
        ell = np.asarray(ell, dtype=np.float64)
        flat = self._check_range(ell.reshape(-1))
        L = self.total_length
        h = max(L / (len(self.arc_table) - 1), 1e-9 * L)
        lo = np.clip(flat - h, 0.0, L)
        hi = np.clip(flat + h, 0.0, L)
        d = self._eval_unchecked(hi) - self._eval_unchecked(lo)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return d.reshape(ell.shape + (3,))

    @cached_property
    def _dense(self) -> tuple[np.ndarray, np.ndarray]:
        ell = np.linspace(0.0, self.total_length, DENSE_SAMPLES)
        return ell, self._eval_unchecked(ell)

    def closest_params(self, points) -> np.ndarray:
        """``argmin_l |p - s(l)|`` for each row of ``points``.

        Dense sampling picks a bracket, ternary search narrows it, and an exact
        projection onto the polyline segments around the result finishes.
        The returned value is never farther than the best dense sample; ties
        go to the smaller arc length.
        """
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        out = np.empty(len(pts))
        for s in range(0, len(pts), _CHUNK):
            out[s : s + _CHUNK] = self._closest_chunk(pts[s : s + _CHUNK])
        return out

    def _closest_chunk(self, P: np.ndarray) -> np.ndarray:
        ell_s, S = self._dense
        last = len(ell_s) - 1
        diff = P[:, None, :] - S[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        i = np.argmin(d2, axis=1)
        a = ell_s[np.maximum(i - 1, 0)]
        b = ell_s[np.minimum(i + 1, last)]

        def f(ell):
            q = P - self._eval_unchecked(ell)
            return np.einsum("ij,ij->i", q, q)

        for _ in range(TERNARY_ITERS):
            m1 = a + (b - a) / 3.0
            m2 = b - (b - a) / 3.0
            left = f(m1) <= f(m2)
            b = np.where(left, m2, b)
            a = np.where(left, a, m1)
        mid = 0.5 * (a + b)

        arc, knots = self.arc_table, self.knots
        nseg = len(arc) - 1
        j = np.clip(np.searchsorted(arc, mid, side="right") - 1, 0, nseg - 1)
        cands, dists = [], []
        for off in (-1, 0, 1):
            jj = np.clip(j + off, 0, nseg - 1)
            k0 = knots[jj]
            w = knots[jj + 1] - k0
            t = np.einsum("ij,ij->i", P - k0, w) / np.einsum("ij,ij->i", w, w)
            t = np.clip(t, 0.0, 1.0)
            q = P - (k0 + t[:, None] * w)
            cands.append(arc[jj] + t * (arc[jj + 1] - arc[jj]))
            dists.append(np.einsum("ij,ij->i", q, q))
        C = np.stack(cands, axis=1)
        D = np.stack(dists, axis=1)
        best = D.min(axis=1, keepdims=True)
        ell = np.where(D == best, C, np.inf).min(axis=1)
        # squared distances tie to rounding near the minimum, where the
        # projection is the accurate answer; the dense sample only wins outright
        dense_d = d2[np.arange(len(P)), i]
        ell = np.where(dense_d < best[:, 0], ell_s[i], ell)
        return np.clip(ell, 0.0, self.total_length)


@dataclass(frozen=True, eq=False)
class ColonMesh:
    """Triangle surface mesh. ``faces`` hold 0-based vertex indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must be (m, 3)")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if np.any(self.face_areas <= 0.0):
            raise ValueError("mesh has degenerate (zero-area) faces")

    @cached_property
    def face_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    @cached_property
    def vertex_area(self) -> np.ndarray:
        """One third of the incident triangle areas per vertex."""
        out = np.zeros(len(self.vertices))
        third = self.face_areas / 3.0
        for k in range(3):
            np.add.at(out, self.faces[:, k], third)
        out.setflags(write=False)
        return out

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def max_edge_length(self) -> float:
        v, f = self.vertices, self.faces
        e = np.concatenate([v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 1]], v[f[:, 0]] - v[f[:, 2]]])
        return float(np.linalg.norm(e, axis=1).max())


@dataclass(frozen=True, eq=False)
class ColonWorld:
    """A colon surface paired with its lumen centerline (1 unit = 1 cm by default)."""

    mesh: ColonMesh
    lumen: LumenCurve
    unit_scale: float = 1.0

    @cached_property
    def vertex_params(self) -> np.ndarray:
        out = self.lumen.closest_params(self.mesh.vertices)
        out.setflags(write=False)
        return out

    @property
    def length(self) -> float:
        return self.lumen.total_length


def closest_lumen_param(world: ColonWorld, point) -> float:
    """Arc length of the lumen point nearest to ``point``."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError("point must be a 3-vector")
    return float(world.lumen.closest_params(p[None])[0])


def vertex_arc_params(world: ColonWorld) -> np.ndarray:
    """Per-vertex closest lumen arc length, cached on the world."""
    return world.vertex_params
