"""Procedural colon worlds and camera trajectories.

Worlds are bent tubes whose radius is modulated sinusoidally along the lumen
to imitate haustral folds. Trajectories are centerline pullbacks with smooth
random perturbations of position and orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from colocov.camera_render import CameraPose, check_rotation
from colocov.colon_model import ColonMesh, ColonWorld, LumenCurve
from colocov.errors import TrajectoryExitError

N_CONTROL = 32
N_BEND_TERMS = 3
N_JITTER_TERMS = 8
WALL_CLEARANCE = 0.10
MAX_BEND_RATIO = 0.8


@dataclass(frozen=True)
class ColonGenSpec:
    seed: int = 0
    length_L: float = 40.0
    base_radius: float = 2.5
    fold_amplitude: float = 0.35
    fold_count: int = 10
    bend_amplitude: float = 3.0
    axial_segments: int = 320
    radial_segments: int = 96

    def validate(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.length_L <= 0:
            raise ValueError("length_L must be positive")
        if not (self.base_radius > self.fold_amplitude >= 0):
            raise ValueError("need base_radius > fold_amplitude >= 0")
        if self.fold_count < 1:
            raise ValueError("fold_count must be positive")
        if self.bend_amplitude < 0:
            raise ValueError("bend_amplitude must be non-negative")
        if self.axial_segments < 16 or self.radial_segments < 12:
            raise ValueError("need axial_segments >= 16 and radial_segments >= 12")

    def radius(self, ell) -> np.ndarray:
        """Wall radius at arc length ``ell``."""
        ell = np.asarray(ell, dtype=np.float64)
        return self.base_radius + self.fold_amplitude * np.sin(
            self.fold_count * 2.0 * np.pi * ell / self.length_L
        )


@dataclass(frozen=True)
class TrajectorySpec:
    seed: int = 0
    duration_s: float = 10.0
    fps: int = 30
    start_ell: float = 24.0
    end_ell: float = 20.0
    position_jitter_amp: float = 0.3
    orientation_jitter_amp_deg: float = 10.0
    jitter_smoothness: float = 0.5
    monotonic: bool = True

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))

    def validate(self, length: float | None = None) -> None:
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        n = self.duration_s * self.fps
        if n < 1 or abs(n - round(n)) > 1e-9:
            raise ValueError("duration_s * fps must be a positive integer")
        if self.jitter_smoothness <= 0:
            raise ValueError("jitter_smoothness must be positive")
        if self.position_jitter_amp < 0 or self.orientation_jitter_amp_deg < 0:
            raise ValueError("jitter amplitudes must be non-negative")
        if self.monotonic and not self.start_ell > self.end_ell:
            raise ValueError("monotonic withdrawal needs start_ell > end_ell")
        if length is not None:
            for v in (self.start_ell, self.end_ell):
                if not 0 <= v <= length:
                    raise ValueError(f"start/end arc length must lie in [0, {length}]")


class CameraTrajectory:
    """Camera poses sampled at a fixed frame rate."""

    def __init__(self, rotations, positions, fps: int):
        R = np.array(rotations, dtype=np.float64).reshape(-1, 3, 3)
        p = np.array(positions, dtype=np.float64).reshape(-1, 3)
        if len(R) != len(p) or len(R) == 0:
            raise ValueError("need the same non-zero number of rotations and positions")
        if fps <= 0:
            raise ValueError("fps must be positive")
        for Ri in R:
            check_rotation(Ri)
        if not np.all(np.isfinite(p)):
            raise ValueError("positions must be finite")
        R.setflags(write=False)
        p.setflags(write=False)
        self.rotations = R
        self.positions = p
        self.fps = int(fps)

    @classmethod
    def from_poses(cls, poses, fps: int) -> "CameraTrajectory":
        poses = list(poses)
        return cls([q.rotation for q in poses], [q.position for q in poses], fps)

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CameraTrajectory(self.rotations[i], self.positions[i], self.fps)
        return CameraPose(self.rotations[i], self.positions[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def poses(self) -> list[CameraPose]:
        return list(self)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.fps

    def __eq__(self, other):
        if not isinstance(other, CameraTrajectory):
            return NotImplemented
        return (
            self.fps == other.fps
            and np.array_equal(self.rotations, other.rotations)
            and np.array_equal(self.positions, other.positions)
        )


def _perpendicular(t: np.ndarray) -> np.ndarray:
    ref = np.eye(3)[int(np.argmin(np.abs(t)))]
    n = ref - np.dot(ref, t) * t
    return n / np.linalg.norm(n)


def transport_frames(tangents: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation-minimizing normals and binormals along a sequence of unit tangents."""
    N = np.empty_like(tangents)
    N[0] = _perpendicular(tangents[0])
    for k in range(1, len(tangents)):
        t = tangents[k]
        n = N[k - 1] - np.dot(N[k - 1], t) * t
        nn = np.linalg.norm(n)
        N[k] = n / nn if nn > 1e-12 else _perpendicular(t)
    B = np.cross(tangents, N)
    return N, B


def look_rotation(forward, up) -> np.ndarray:
    """World-to-camera rotation with camera +z along ``forward`` and -y toward ``up``."""
    z = np.asarray(forward, dtype=np.float64)
    z = z / np.linalg.norm(z)
    u = np.asarray(up, dtype=np.float64)
    u = u - np.dot(u, z) * z
    n = np.linalg.norm(u)
    if n < 1e-9:
        u = _perpendicular(z)
    else:
        u = u / n
    y = -u
    x = np.cross(y, z)
    return np.stack([x, y, z])


def _bend_offsets(rng: np.random.Generator, z: np.ndarray, length: float, amp: float) -> np.ndarray:
    out = np.zeros((len(z), 2))
    for axis in range(2):
        a = rng.uniform(0.5, 1.0, N_BEND_TERMS)
        a /= a.sum()
        f = rng.uniform(0.5, 1.5, N_BEND_TERMS)
        ph = rng.uniform(0.0, 2 * np.pi, N_BEND_TERMS)
        arg = 2 * np.pi * f[None, :] * z[:, None] / length + ph[None, :]
        out[:, axis] = amp * (a * (np.sin(arg) - np.sin(ph))).sum(axis=1)
    return out


def _max_curvature(lumen: LumenCurve) -> float:
    ell = np.linspace(0.0, lumen.total_length, 1025)
    t = lumen.tangent(ell)
    dl = ell[1] - ell[0]
    return float((np.linalg.norm(np.diff(t, axis=0), axis=1) / dl).max())


def generate_centerline(spec: ColonGenSpec) -> LumenCurve:
    """Smoothly bent lumen of arc length ``spec.length_L``."""
    rng = np.random.default_rng(spec.seed)
    L = spec.length_L
    z = np.linspace(0.0, L, N_CONTROL)
    xy = _bend_offsets(rng, z, L, spec.bend_amplitude)
    ctrl = np.column_stack([xy, z])
    lumen = LumenCurve(ctrl)
    return LumenCurve(ctrl * (L / lumen.total_length))


def generate_colon(spec: ColonGenSpec) -> ColonWorld:
    """Closed tube mesh around a bent centerline with fold-modulated radius."""
    spec.validate()
    lumen = generate_centerline(spec)
    L = lumen.total_length
    rmax = spec.base_radius + spec.fold_amplitude
    if _max_curvature(lumen) * rmax > MAX_BEND_RATIO:
        raise ValueError("bend_amplitude too large: tube would fold onto itself")

    A, R = spec.axial_segments, spec.radial_segments
    ell = np.linspace(0.0, L, A + 1)
    centers = lumen.evaluate(ell)
    N, B = transport_frames(lumen.tangent(ell))
    radius = spec.base_radius + spec.fold_amplitude * np.sin(spec.fold_count * 2.0 * np.pi * ell / L)
    theta = 2.0 * np.pi * np.arange(R) / R
    ring = np.cos(theta)[None, :, None] * N[:, None, :] + np.sin(theta)[None, :, None] * B[:, None, :]
    verts = (centers[:, None, :] + radius[:, None, None] * ring).reshape(-1, 3)

    k = np.arange(A)[:, None]
    j = np.arange(R)[None, :]
    a = k * R + j
    b = k * R + (j + 1) % R
    c = a + R
    d = b + R
    side = np.concatenate(
        [np.stack([a, c, b], -1).reshape(-1, 3), np.stack([b, c, d], -1).reshape(-1, 3)]
    )
    jj = np.arange(1, R - 1)
    cap0 = np.stack([np.zeros_like(jj), jj + 1, jj], -1)
    off = A * R
    cap1 = np.stack([np.full_like(jj, off), off + jj, off + jj + 1], -1)
    faces = np.concatenate([side, cap0, cap1])
    return ColonWorld(ColonMesh(verts, faces), lumen)


def band_limited_noise(
    rng: np.random.Generator, n: int, fps: float, cutoff_hz: float, amp: float, channels: int = 1
) -> np.ndarray:
    """Sums of random-phase sinusoids on exact DFT bins at or below ``cutoff_hz``.

    Each channel is bounded by ``amp`` in absolute value.
    """
    T = n / fps
    mmax = max(1, int(math.floor(cutoff_hz * T)))
    t = np.arange(n) / fps
    out = np.zeros((n, channels))
    for ch in range(channels):
        m = rng.integers(1, mmax + 1, N_JITTER_TERMS)
        a = rng.uniform(0.2, 1.0, N_JITTER_TERMS)
        ph = rng.uniform(0.0, 2 * np.pi, N_JITTER_TERMS)
        x = (a[None, :] * np.sin(2 * np.pi * m[None, :] * t[:, None] / T + ph[None, :])).sum(axis=1)
        out[:, ch] = amp * x / a.sum()
    return out


def wall_radius_profile(world: ColonWorld, bin_width: float | None = None):
    """Conservative wall distance from the lumen as a function of arc length.

    Returns ``(centers, radius)``; each entry is the smallest vertex-to-lumen
    distance within one bin on either side.
    """
    L = world.length
    ell = world.vertex_params
    dist = np.linalg.norm(world.mesh.vertices - world.lumen.evaluate(ell), axis=1)
    if bin_width is None:
        bin_width = max(L / 512, 1e-6)
    nb = max(1, int(math.ceil(L / bin_width)))
    idx = np.clip((ell / L * nb).astype(np.int64), 0, nb - 1)
    r = np.full(nb, np.inf)
    np.minimum.at(r, idx, dist)
    # empty bins inherit from neighbours
    finite = np.isfinite(r)
    if not finite.any():
        raise TrajectoryExitError("mesh has no vertices near the lumen")
    centers = (np.arange(nb) + 0.5) * L / nb
    r = np.interp(centers, centers[finite], r[finite])
    padded = np.concatenate([[r[0]], r, [r[-1]]])
    r = np.minimum(np.minimum(padded[:-2], padded[1:-1]), padded[2:])
    return centers, r


def local_radius(world: ColonWorld, ell) -> np.ndarray:
    centers, r = _profile(world)
    return np.interp(ell, centers, r)


_PROFILE_ATTR = "_colocov_radius_profile"


def _profile(world: ColonWorld):
    prof = world.__dict__.get(_PROFILE_ATTR)
    if prof is None:
        prof = wall_radius_profile(world)
        world.__dict__[_PROFILE_ATTR] = prof
    return prof


def clamp_to_interior(world: ColonWorld, positions: np.ndarray, clearance: float = WALL_CLEARANCE) -> np.ndarray:
    """Pull positions toward the lumen so they stay ``clearance`` x radius off the wall."""
    pos = np.array(positions, dtype=np.float64).reshape(-1, 3)
    ell = world.lumen.closest_params(pos)
    c = world.lumen.evaluate(ell)
    off = pos - c
    norm = np.linalg.norm(off, axis=1)
    rmax = (1.0 - clearance) * local_radius(world, ell)
    if np.any(rmax <= 0):
        raise TrajectoryExitError("non-positive local radius")
    scale = np.where(norm > rmax, rmax / np.maximum(norm, 1e-300), 1.0)
    out = c + off * scale[:, None]
    # the clamp moves along the lumen normal, so the nearest lumen point can shift slightly
    ell2 = world.lumen.closest_params(out)
    if np.any(np.linalg.norm(out - world.lumen.evaluate(ell2), axis=1) >= local_radius(world, ell2)):
        raise TrajectoryExitError("trajectory leaves the colon after clamping")
    return out


def generate_trajectory(world: ColonWorld, spec: TrajectorySpec) -> CameraTrajectory:
    """Centerline pullback from ``start_ell`` to ``end_ell`` with smooth jitter.

    The base camera looks along the lumen toward larger arc length (the
    cecum). Position jitter is bounded by ``position_jitter_amp``; orientation
    jitter is an axis-angle rotation in the camera frame bounded by
    ``orientation_jitter_amp_deg``.
    """
    spec.validate(world.length)
    n = spec.n_frames
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    ell = spec.start_ell + (spec.end_ell - spec.start_ell) * s
    base = world.lumen.evaluate(ell)
    T = world.lumen.tangent(ell)
    N, _ = transport_frames(T)
    R_base = np.stack([look_rotation(T[i], -N[i]) for i in range(n)])

    rng = np.random.default_rng(spec.seed)
    pos_noise = band_limited_noise(
        rng, n, spec.fps, spec.jitter_smoothness, spec.position_jitter_amp / math.sqrt(3.0), 3
    )
    rot_noise = band_limited_noise(
        rng, n, spec.fps, spec.jitter_smoothness,
        math.radians(spec.orientation_jitter_amp_deg) / math.sqrt(3.0), 3,
    )
    positions = clamp_to_interior(world, base + pos_noise)
    R_jit = Rotation.from_rotvec(rot_noise).as_matrix()
    rotations = np.einsum("nij,njk->nik", R_jit, R_base)
    return CameraTrajectory(_reorthonormalize(rotations), positions, spec.fps)


def _reorthonormalize(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def sweep_trajectory(
    world: ColonWorld,
    start_ell: float,
    end_ell: float,
    duration_s: float = 10.0,
    fps: int = 30,
    tilts_deg=(30.0, 60.0, 90.0, 120.0, 150.0),
    spins: float = 10.0,
) -> CameraTrajectory:
    """Centerline pullback whose view direction sweeps all around the wall.

    The azimuth turns ``spins`` full revolutions over the segment while the
    tilt from the forward axis cycles through ``tilts_deg`` each revolution,
    so both faces of every fold are looked at (a retroflexion-like survey).
    """
    n = int(round(duration_s * fps))
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    ell = start_ell + (end_ell - start_ell) * s
    pos = world.lumen.evaluate(ell)
    T = world.lumen.tangent(ell)
    N, B = transport_frames(T)
    phase = spins * s * 2 * np.pi
    tilts = np.radians(np.asarray(tilts_deg, dtype=np.float64))
    frames_per_rev = max(1, int(round(n / max(spins, 1e-9))))
    which = (np.arange(n) // max(1, frames_per_rev // len(tilts))) % len(tilts)
    tilt = tilts[which]
    rad = np.cos(phase)[:, None] * N + np.sin(phase)[:, None] * B
    fwd = np.cos(tilt)[:, None] * T + np.sin(tilt)[:, None] * rad
    R = np.stack([look_rotation(fwd[i], T[i] if abs(np.dot(fwd[i], T[i])) < 0.99 else N[i]) for i in range(n)])
    return CameraTrajectory(R, pos, fps)


def wall_stare_trajectory(
    world: ColonWorld,
    ell: float,
    duration_s: float = 10.0,
    fps: int = 30,
    offset_frac: float = 0.8,
    azimuth: float = 0.0,
    lean_deg: float = 0.0,
) -> CameraTrajectory:
    """Camera parked near the wall at ``ell``, looking into it.

    ``lean_deg`` tips the view from the wall normal toward larger arc length.
    """
    T = world.lumen.tangent(np.array([ell]))
    N, B = transport_frames(T)
    d = math.cos(azimuth) * N[0] + math.sin(azimuth) * B[0]
    r = float(local_radius(world, ell))
    pos = world.lumen.evaluate(ell) + offset_frac * r * d
    lean = math.radians(lean_deg)
    R = look_rotation(math.cos(lean) * d + math.sin(lean) * T[0], T[0])
    n = int(round(duration_s * fps))
    return CameraTrajectory(np.repeat(R[None], n, axis=0), np.repeat(pos[None], n, axis=0), fps)


def oblique_pullback(
    world: ColonWorld,
    start_ell: float,
    end_ell: float,
    duration_s: float = 10.0,
    fps: int = 30,
    tilt_deg: float = 75.0,
    azimuth: float = 0.0,
) -> CameraTrajectory:
    """Centerline withdrawal looking steadily toward one side of the wall."""
    n = int(round(duration_s * fps))
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    ell = start_ell + (end_ell - start_ell) * s
    T = world.lumen.tangent(ell)
    N, B = transport_frames(T)
    tilt = math.radians(tilt_deg)
    side = math.cos(azimuth) * N + math.sin(azimuth) * B
    fwd = math.cos(tilt) * T + math.sin(tilt) * side
    R = np.stack([look_rotation(fwd[i], T[i]) for i in range(n)])
    return CameraTrajectory(R, world.lumen.evaluate(ell), fps)


def forward_pullback(world: ColonWorld, start_ell: float, end_ell: float, duration_s: float = 10.0, fps: int = 30) -> CameraTrajectory:
    """Jitter-free centerline withdrawal looking toward the cecum."""
    spec = TrajectorySpec(
        duration_s=duration_s, fps=fps, start_ell=start_ell, end_ell=end_ell,
        position_jitter_amp=0.0, orientation_jitter_amp_deg=0.0, monotonic=start_ell > end_ell,
    )
    return generate_trajectory(world, spec)
