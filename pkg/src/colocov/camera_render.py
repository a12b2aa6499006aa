"""Pinhole camera, BVH ray-cast depth rendering, and vertex visibility."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from colocov import kernels
from colocov.colon_model import ColonMesh, ColonWorld
from colocov.errors import PoseOutsideMeshError

LEAF_SIZE = 4
DEFAULT_DEPTH_TOL = 0.005
_BRUTE_RAY_CHUNK = 64


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    x0: float
    y0: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (0 <= self.x0 < self.width and 0 <= self.y0 < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int = 384, height: int = 320, hfov_deg: float = 120.0) -> "CameraIntrinsics":
        """Square-pixel camera with the principal point at the image center."""
        f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(f, f, (width - 1) / 2.0, (height - 1) / 2.0, int(width), int(height))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.x0], [0.0, self.fy, self.y0], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def check_rotation(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError("rotation must be 3x3")
    if not np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0) or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("rotation must be orthonormal with determinant +1")
    return R


@dataclass(frozen=True, eq=False)
class CameraPose:
    """``rotation`` maps world to camera coordinates; ``position`` is the camera center."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        R = check_rotation(self.rotation).copy()
        p = np.array(self.position, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("position must be finite")
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "position", p)

    def world_to_camera(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.position) @ self.rotation.T

    def camera_to_world(self, Xc) -> np.ndarray:
        return np.asarray(Xc, dtype=np.float64) @ self.rotation + self.position

    @property
    def view_direction(self) -> np.ndarray:
        return self.rotation[2].copy()


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major z-depth grid; 0 marks pixels without a surface hit."""

    data: np.ndarray
    intrinsics: CameraIntrinsics | None = None

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError("depth data must be 2-D")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("depth must be finite and non-negative")
        if self.intrinsics is not None and d.shape != self.intrinsics.shape:
            raise ValueError("depth shape does not match intrinsics")
        object.__setattr__(self, "data", d)

    @property
    def hit(self) -> np.ndarray:
        return self.data > 0


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Height x width x 3 grid of values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValueError("rgb data must be (h, w, 3)")
        if not np.all(np.isfinite(d)):
            raise ValueError("rgb data must be finite")
        object.__setattr__(self, "data", d)


def pixel_grid(K: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Column and row coordinates of every pixel center."""
    v, u = np.mgrid[0 : K.height, 0 : K.width]
    return u.astype(np.float64), v.astype(np.float64)


def camera_rays(K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame ray directions with unit z, shape (h*w, 3)."""
    u, v = pixel_grid(K)
    d = np.stack([(u - K.x0) / K.fx, (v - K.y0) / K.fy, np.ones_like(u)], axis=-1)
    return d.reshape(-1, 3)


def project(Xc: np.ndarray, K: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Camera-frame points to continuous pixel coordinates ``(u, v, z)``."""
    Xc = np.asarray(Xc, dtype=np.float64)
    z = Xc[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * Xc[..., 0] / z + K.x0
        v = K.fy * Xc[..., 1] / z + K.y0
    return u, v, z


def unproject(u, v, z, K: CameraIntrinsics) -> np.ndarray:
    """Pixel coordinates and z-depth back to camera-frame points."""
    x = (np.asarray(u, dtype=np.float64) - K.x0) / K.fx * z
    y = (np.asarray(v, dtype=np.float64) - K.y0) / K.fy * z
    return np.stack([x, y, np.asarray(z, dtype=np.float64) * np.ones_like(x)], axis=-1)


@dataclass(frozen=True, eq=False)
class BVH:
    """Flattened bounding-volume hierarchy; triangle arrays are in leaf order."""

    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    tri_ids: np.ndarray
    bmin: np.ndarray
    bmax: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.bmin)


def triangle_arrays(mesh: ColonMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    v = mesh.vertices
    f = mesh.faces
    v0 = v[f[:, 0]]
    return v0, v[f[:, 1]] - v0, v[f[:, 2]] - v0


def build_bvh(mesh: ColonMesh, leaf_size: int = LEAF_SIZE) -> BVH:
    """Median-split BVH over triangle centroids."""
    v0, e1, e2 = triangle_arrays(mesh)
    corners = np.stack([v0, v0 + e1, v0 + e2])
    tmin = corners.min(axis=0)
    tmax = corners.max(axis=0)
    cen = corners.mean(axis=0)
    extent = float(np.ptp(mesh.vertices, axis=0).max()) if len(mesh.vertices) else 1.0
    pad = 1e-9 * max(1.0, extent)

    order = np.arange(len(v0))
    bmin, bmax, left, right, start, count = [], [], [], [], [], []

    def new_node():
        bmin.append(None)
        bmax.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(bmin) - 1

    root = new_node()
    work = [(root, 0, len(order))]
    while work:
        node, lo, hi = work.pop()
        idx = order[lo:hi]
        bmin[node] = tmin[idx].min(axis=0) - pad
        bmax[node] = tmax[idx].max(axis=0) + pad
        c = cen[idx]
        span = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(span))
        if hi - lo <= leaf_size or span[axis] <= 0.0:
            start[node] = lo
            count[node] = hi - lo
            continue
        mid = (hi - lo) // 2
        part = np.argpartition(c[:, axis], mid, kind="introselect")
        order[lo:hi] = idx[part]
        a, b = new_node(), new_node()
        left[node], right[node] = a, b
        work.append((b, lo + mid, hi))
        work.append((a, lo, lo + mid))

    def arr(x, dt=np.int64):
        return np.ascontiguousarray(np.array(x, dtype=dt))

    return BVH(
        v0=np.ascontiguousarray(v0[order]),
        e1=np.ascontiguousarray(e1[order]),
        e2=np.ascontiguousarray(e2[order]),
        tri_ids=arr(order),
        bmin=arr(np.vstack(bmin), np.float64),
        bmax=arr(np.vstack(bmax), np.float64),
        left=arr(left),
        right=arr(right),
        start=arr(start),
        count=arr(count),
    )


_BVH_CACHE: "weakref.WeakKeyDictionary[ColonMesh, BVH]" = weakref.WeakKeyDictionary()


def mesh_bvh(mesh: ColonMesh) -> BVH:
    bvh = _BVH_CACHE.get(mesh)
    if bvh is None:
        bvh = build_bvh(mesh)
        _BVH_CACHE[mesh] = bvh
    return bvh


def world_rays(pose: CameraPose, K: CameraIntrinsics) -> np.ndarray:
    """World-frame directions whose ray parameter equals camera z-depth."""
    return np.ascontiguousarray(camera_rays(K) @ pose.rotation)


def cast_rays(world: ColonWorld, origin, dirs, backend: str | None = None):
    """Nearest triangle hit ``(t, tri_id)`` for each direction from ``origin``."""
    bvh = mesh_bvh(world.mesh)
    impl = kernels.get_backend(backend)
    return impl.raycast_bvh(
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        bvh.v0, bvh.e1, bvh.e2, bvh.bmin, bvh.bmax,
        bvh.left, bvh.right, bvh.start, bvh.count, bvh.tri_ids,
    )


def ray_cast(world: ColonWorld, pose: CameraPose, K: CameraIntrinsics, backend: str | None = None):
    """Render z-depth and the id of the triangle seen at each pixel (-1 = none)."""
    t, tri = cast_rays(world, pose.position, world_rays(pose, K), backend)
    if np.all(tri < 0):
        raise PoseOutsideMeshError("no pixel ray hits the mesh; camera is outside the colon")
    depth = np.where(tri >= 0, t, 0.0).reshape(K.shape)
    return DepthImage(depth, K), tri.reshape(K.shape)


def ray_cast_depth(world: ColonWorld, pose: CameraPose, K: CameraIntrinsics, backend: str | None = None) -> DepthImage:
    return ray_cast(world, pose, K, backend)[0]


def ray_cast_bruteforce(world: ColonWorld, pose: CameraPose, K: CameraIntrinsics):
    """Reference renderer: every pixel ray against every triangle, no acceleration."""
    v0, e1, e2 = triangle_arrays(world.mesh)
    dirs = world_rays(pose, K)
    o = pose.position
    ids = np.arange(len(v0))
    t_out = np.full(len(dirs), np.inf)
    id_out = np.full(len(dirs), -1, dtype=np.int64)
    for s in range(0, len(dirs), _BRUTE_RAY_CHUNK):
        d = dirs[s : s + _BRUTE_RAY_CHUNK, None, :]
        t = kernels.intersect_many(o, d, v0[None], e1[None], e2[None])
        tmin = t.min(axis=1)
        # ties at equal depth resolve to the smallest triangle id
        first = np.argmax(t == tmin[:, None], axis=1)
        hit = tmin != np.inf
        t_out[s : s + len(d)] = tmin
        id_out[s : s + len(d)] = np.where(hit, ids[first], -1)
    depth = np.where(id_out >= 0, t_out, 0.0).reshape(K.shape)
    return DepthImage(depth, K), id_out.reshape(K.shape)


def visible_mask(
    world: ColonWorld,
    pose: CameraPose,
    K: CameraIntrinsics,
    depth_tol: float = DEFAULT_DEPTH_TOL,
    depth: DepthImage | None = None,
    pixel_slack: bool = True,
) -> np.ndarray:
    """Boolean per-vertex visibility for one camera pose.

    A vertex is visible when it is in front of the camera, projects inside the
    image, and is not farther than the rendered depth times ``1 + depth_tol``
    (pixels whose rays hit nothing do not occlude).
    With ``pixel_slack`` the reference depth is the largest hit depth among
    the pixels within half a pixel of the projection, which keeps vertices on
    grazing walls from being culled by depth quantization.
    """
    if depth_tol <= 0:
        raise ValueError("depth_tol must be positive")
    if depth is None:
        depth = ray_cast_depth(world, pose, K)
    D = np.asarray(depth.data, dtype=np.float64)
    Xc = pose.world_to_camera(world.mesh.vertices)
    u, v, z = project(Xc, K)
    front = z > 0
    u = np.where(front, u, -1.0)
    v = np.where(front, v, -1.0)
    iu = np.floor(u + 0.5)
    iv = np.floor(v + 0.5)
    inside = front & (iu >= 0) & (iu < K.width) & (iv >= 0) & (iv < K.height)
    idx = np.flatnonzero(inside)
    ui, vi = iu[idx].astype(np.int64), iv[idx].astype(np.int64)
    ref = D[vi, ui]
    if pixel_slack:
        fu = np.floor(u[idx]).astype(np.int64)
        fv = np.floor(v[idx]).astype(np.int64)
        for du in (0, 1):
            for dv in (0, 1):
                cu = np.clip(fu + du, 0, K.width - 1)
                cv = np.clip(fv + dv, 0, K.height - 1)
                ref = np.maximum(ref, D[cv, cu])
    # no surface along any nearby pixel ray means nothing can occlude the vertex
    ok = (ref == 0) | (z[idx] <= ref * (1.0 + depth_tol))
    mask = np.zeros(len(Xc), dtype=bool)
    mask[idx[ok]] = True
    return mask


def visible_vertices(
    world: ColonWorld,
    pose: CameraPose,
    K: CameraIntrinsics,
    depth_tol: float = DEFAULT_DEPTH_TOL,
    depth: DepthImage | None = None,
    pixel_slack: bool = True,
) -> np.ndarray:
    """Sorted ids of the vertices visible from ``pose``."""
    return np.flatnonzero(visible_mask(world, pose, K, depth_tol, depth, pixel_slack))


def surface_texture(points: np.ndarray) -> np.ndarray:
    """Smooth procedural albedo in [0, 1] for world-space points."""
    p = np.asarray(points, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r = 0.55 + 0.25 * np.sin(1.3 * x + 0.7 * z) + 0.1 * np.sin(0.9 * y - 1.1 * z + 0.4)
    g = 0.35 + 0.2 * np.sin(0.8 * y + 1.2 * z + 1.0) + 0.1 * np.cos(1.4 * x - 0.5 * y)
    b = 0.3 + 0.15 * np.cos(1.1 * z - 0.6 * x) + 0.1 * np.sin(1.7 * y + 0.3)
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def render_rgb(world: ColonWorld, pose: CameraPose, K: CameraIntrinsics, depth: DepthImage | None = None) -> RgbImage:
    """Unshaded debug render: the procedural texture at each hit point.

    Colors depend only on the surface point, so two renders of a static world
    are photometrically consistent.
    """
    if depth is None:
        depth = ray_cast_depth(world, pose, K)
    u, v = pixel_grid(K)
    Xw = pose.camera_to_world(unproject(u, v, depth.data, K))
    rgb = surface_texture(Xw)
    rgb[~depth.hit] = 0.0
    return RgbImage(rgb)
