"""Rigid reprojection between frames and the view-synthesis photometric loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from colocov.camera_render import CameraIntrinsics, CameraPose, DepthImage, RgbImage, check_rotation, pixel_grid

OCCLUSION_REL_TOL = 0.05
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Maps current-frame camera coordinates to the previous frame: ``X' = R X + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = check_rotation(self.rotation).copy()
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def between(cls, current: CameraPose, previous: CameraPose) -> "RigidTransform":
        """Transform taking ``current`` camera coordinates into ``previous`` ones."""
        R = previous.rotation @ current.rotation.T
        t = previous.rotation @ (current.position - previous.position)
        return cls(R, t)

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def apply(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class LossReport:
    l1: float
    ssim: float
    depth_consistency: float
    valid_fraction: float
    combined: float
    ssim_weight: float


def warp_points(p, z, K: CameraIntrinsics, xform: RigidTransform):
    """Vectorized ``z' p' = K R K^-1 z p + K t``.

    ``p`` has homogeneous pixel rows ``(u, v, 1)``. Returns ``(p', z', valid)``
    with ``p'`` normalized to a unit third coordinate; points that land at or
    behind the camera are flagged invalid rather than raised.
    """
    p = np.asarray(p, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    Km = K.matrix
    if np.array_equal(xform.rotation, np.eye(3)):
        M = np.eye(3)  # K K^-1 is not exactly I in floating point
    else:
        M = Km @ xform.rotation @ np.linalg.inv(Km)
    q = z[..., None] * (p @ M.T) + Km @ xform.translation
    z2 = q[..., 2]
    valid = z2 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p2 = q / z2[..., None]
    return p2, z2, valid


def warp_point(p, z: float, K: CameraIntrinsics, xform: RigidTransform):
    """Single-pixel form of :func:`warp_points`."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError("p must be a homogeneous 3-vector")
    if not z > 0:
        raise ValueError("z must be positive")
    p2, z2, valid = warp_points(p / p[2], np.float64(z), K, xform)
    return p2, float(z2), bool(valid)


def _snap(x: np.ndarray) -> np.ndarray:
    r = np.round(x)
    return np.where(np.abs(x - r) < _SNAP, r, x)


def bilinear(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample ``img`` (h, w[, c]) at continuous pixel coordinates inside the grid."""
    h, w = img.shape[:2]
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)
    u0 = np.minimum(np.floor(u).astype(np.int64), w - 2 if w > 1 else 0)
    v0 = np.minimum(np.floor(v).astype(np.int64), h - 2 if h > 1 else 0)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    a = u - u0
    b = v - v0
    if img.ndim == 3:
        a = a[..., None]
        b = b[..., None]
    top = img[v0, u0] * (1 - a) + img[v0, u1] * a
    bot = img[v1, u0] * (1 - a) + img[v1, u1] * a
    return top * (1 - b) + bot * b


def splat_depth(D_t: DepthImage, K: CameraIntrinsics, xform: RigidTransform) -> np.ndarray:
    """Forward-warp a depth map into the target frame with a nearest-pixel z-buffer."""
    u, v = pixel_grid(K)
    z = np.asarray(D_t.data, dtype=np.float64)
    hit = z > 0
    p = np.stack([u[hit], v[hit], np.ones(hit.sum())], axis=-1)
    p2, z2, ok = warp_points(p, z[hit], K, xform)
    iu = np.floor(p2[:, 0] + 0.5)
    iv = np.floor(p2[:, 1] + 0.5)
    ok &= (iu >= 0) & (iu < K.width) & (iv >= 0) & (iv < K.height)
    out = np.full(K.shape, np.inf)
    np.minimum.at(out, (iv[ok].astype(np.int64), iu[ok].astype(np.int64)), z2[ok])
    out[~np.isfinite(out)] = 0.0
    return out


def synthesize_view(
    I_t: RgbImage,
    D_t: DepthImage,
    K: CameraIntrinsics,
    xform: RigidTransform,
    D_prev: DepthImage | None = None,
    occlusion_tol: float = OCCLUSION_REL_TOL,
):
    """Re-render frame ``t`` in the previous camera.

    Each previous-frame pixel with depth is carried back through the inverse
    transform and ``I_t``/``D_t`` are sampled bilinearly there (backward
    warping). Without ``D_prev`` the target depth comes from a z-buffered
    forward splat of ``D_t``. A pixel is masked out when it has no depth,
    falls outside frame ``t`` or behind its camera, or when the forward-warped
    source depth disagrees with the target depth by more than
    ``occlusion_tol`` (relative), which marks disocclusions.

    Returns ``(I_hat_prev, D_hat_prev, mask)``.
    """
    h, w = K.shape
    if I_t.data.shape[:2] != (h, w) or D_t.data.shape != (h, w):
        raise ValueError("image, depth and intrinsics shapes disagree")
    if D_prev is not None and D_prev.data.shape != (h, w):
        raise ValueError("previous depth shape disagrees")
    target = np.asarray(D_prev.data, dtype=np.float64) if D_prev is not None else splat_depth(D_t, K, xform)

    u, v = pixel_grid(K)
    has = target > 0
    p = np.stack([u, v, np.ones_like(u)], axis=-1)
    src, z_src, ok = warp_points(p, np.where(has, target, 1.0), K, xform.inverse())
    su = _snap(src[..., 0])
    sv = _snap(src[..., 1])
    ok &= has & (su >= 0) & (su <= w - 1) & (sv >= 0) & (sv <= h - 1)

    I_hat = np.zeros((h, w, 3))
    D_hat = np.zeros((h, w))
    Dt = np.asarray(D_t.data, dtype=np.float64)
    idx = np.nonzero(ok)
    su_ok, sv_ok = su[idx], sv[idx]
    I_hat[idx] = bilinear(np.asarray(I_t.data, dtype=np.float64), su_ok, sv_ok)
    z_t = bilinear(Dt, su_ok, sv_ok)
    # corner depths must all be hits for the sample to be trusted
    corners_hit = bilinear((Dt > 0).astype(np.float64), su_ok, sv_ok) >= 1.0 - 1e-12
    ps = np.stack([su_ok, sv_ok, np.ones_like(su_ok)], axis=-1)
    _, z_fwd, fwd_ok = warp_points(ps, np.where(z_t > 0, z_t, 1.0), K, xform)
    tgt = target[idx]
    consistent = corners_hit & fwd_ok & (np.abs(z_fwd - tgt) <= occlusion_tol * tgt)
    D_hat[idx] = np.where(consistent, z_fwd, 0.0)

    mask = np.zeros((h, w), dtype=bool)
    mask[idx] = consistent
    I_hat[~mask] = 0.0
    return RgbImage(I_hat), DepthImage(D_hat, K), mask


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel SSIM with an 11x11 Gaussian window (sigma 1.5), per channel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    truncate = SSIM_RADIUS / SSIM_SIGMA
    sigma = (SSIM_SIGMA, SSIM_SIGMA) + (0,) * (a.ndim - 2)

    def filt(x):
        return ndimage.gaussian_filter(x, sigma=sigma, truncate=truncate, mode="reflect")

    mu_a, mu_b = filt(a), filt(b)
    saa = filt(a * a) - mu_a * mu_a
    sbb = filt(b * b) - mu_b * mu_b
    sab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * sab + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (saa + sbb + SSIM_C2)
    return num / den


def view_synthesis_loss(
    I_prev: RgbImage,
    I_hat_prev: RgbImage,
    D_prev: DepthImage,
    D_hat_prev: DepthImage,
    mask,
    ssim_weight: float = 0.85,
) -> LossReport:
    """Masked L1, SSIM and depth-consistency terms, plus their weighted blend."""
    a = np.asarray(I_prev.data, dtype=np.float64)
    b = np.asarray(I_hat_prev.data, dtype=np.float64)
    da = np.asarray(D_prev.data, dtype=np.float64)
    db = np.asarray(D_hat_prev.data, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    if a.shape != b.shape or da.shape != db.shape or m.shape != a.shape[:2] or da.shape != m.shape:
        raise ValueError("shape mismatch")
    if not m.any():
        raise ValueError("mask is empty")
    if not 0.0 <= ssim_weight <= 1.0:
        raise ValueError("ssim_weight must lie in [0, 1]")
    l1 = float(np.abs(a - b)[m].mean())
    ssim = float(ssim_map(a, b)[m].mean())
    dc = float(np.abs(db - da)[m].mean())
    combined = (1 - ssim_weight) * l1 + ssim_weight * (1 - ssim) / 2
    return LossReport(l1, ssim, dc, float(m.mean()), combined, ssim_weight)
