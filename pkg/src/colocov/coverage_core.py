"""Coverage of a colon surface by a camera trajectory.

The maximal set is the band of surface whose lumen arc length falls between
the trajectory endpoints (widened by two margins); the actual set is the union
of per-frame visible vertices; coverage is the ratio of their measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from colocov.camera_render import DEFAULT_DEPTH_TOL, CameraIntrinsics, CameraPose, ray_cast, visible_mask
from colocov.colon_model import ColonWorld, closest_lumen_param
from colocov.errors import EmptyWindowError
from colocov.synth_gen import CameraTrajectory

MOSTLY_COVERED = "mostly_covered"
PARTIALLY_COVERED = "partially_covered"
MOSTLY_NOT_COVERED = "mostly_not_covered"
CLASS_LABELS = (MOSTLY_NOT_COVERED, PARTIALLY_COVERED, MOSTLY_COVERED)
CLASS_EDGES = (0.4, 0.8)


@dataclass(frozen=True)
class CoverageParams:
    delta0: float = 1.0
    delta1: float = 4.0
    depth_tol: float = DEFAULT_DEPTH_TOL

    def __post_init__(self):
        if self.delta0 < 0 or self.delta1 < 0:
            raise ValueError("delta0 and delta1 must be non-negative")
        if self.depth_tol <= 0:
            raise ValueError("depth_tol must be positive")


# (delta0, delta1) pairs regressed per frame
DEFAULT_PARAM_LIST = (
    CoverageParams(1.0, 3.0),
    CoverageParams(1.0, 4.0),
    CoverageParams(1.0, 6.0),
)


@dataclass(frozen=True)
class CoverageReport:
    coverage: float
    coverage_raw: float
    coverage_count: float
    n_actual: int
    n_actual_in_window: int
    n_maximal: int
    area_actual: float
    area_maximal: float
    class_label: str
    params: CoverageParams
    window: tuple[float, float] = field(default=(0.0, 0.0))


def classify(coverage: float) -> str:
    """Three-way label: [0, 0.4), [0.4, 0.8), [0.8, 1]."""
    c = float(coverage)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"coverage {c} outside [0, 1]")
    if c < CLASS_EDGES[0]:
        return MOSTLY_NOT_COVERED
    if c < CLASS_EDGES[1]:
        return PARTIALLY_COVERED
    return MOSTLY_COVERED


def window_bounds(world: ColonWorld, ell0: float, ell1: float, params: CoverageParams) -> tuple[float, float]:
    """Arc-length interval of the maximal set for endpoint parameters ``ell0``, ``ell1``.

    Endpoints are relabeled so the smaller one receives ``delta0``.
    """
    lo_ell, hi_ell = min(ell0, ell1), max(ell0, ell1)
    L = world.length
    lo = max(0.0, lo_ell + params.delta0)
    hi = min(L, hi_ell + params.delta1)
    if lo > hi:
        raise EmptyWindowError(f"empty window [{lo}, {hi}] along the lumen")
    return lo, hi


def maximal_mask(world: ColonWorld, p0, p1, params: CoverageParams) -> tuple[np.ndarray, tuple[float, float]]:
    lo, hi = window_bounds(world, closest_lumen_param(world, p0), closest_lumen_param(world, p1), params)
    ell = world.vertex_params
    return (ell >= lo) & (ell <= hi), (lo, hi)


def maximal_visible_set(world: ColonWorld, p0, p1, params: CoverageParams) -> np.ndarray:
    """Sorted ids of vertices whose lumen parameter lies in the window."""
    return np.flatnonzero(maximal_mask(world, p0, p1, params)[0])


def frame_visibility(
    world: ColonWorld, traj: CameraTrajectory, K: CameraIntrinsics, depth_tol: float = DEFAULT_DEPTH_TOL
):
    """Yield ``(frame_index, visible_mask)`` for every pose."""
    for i, pose in enumerate(traj):
        depth, _ = ray_cast(world, pose, K)
        yield i, visible_mask(world, pose, K, depth_tol, depth)


def actual_visible_mask(world: ColonWorld, traj: CameraTrajectory, K: CameraIntrinsics, params: CoverageParams) -> np.ndarray:
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    acc = np.zeros(len(world.mesh.vertices), dtype=bool)
    for _, m in frame_visibility(world, traj, K, params.depth_tol):
        acc |= m
    return acc


def actual_visible_union(world: ColonWorld, traj: CameraTrajectory, K: CameraIntrinsics, params: CoverageParams) -> np.ndarray:
    """Sorted ids of vertices seen in at least one frame."""
    return np.flatnonzero(actual_visible_mask(world, traj, K, params))


def coverage_from_masks(
    world: ColonWorld,
    actual: np.ndarray,
    maximal: np.ndarray,
    params: CoverageParams,
    window: tuple[float, float] = (0.0, 0.0),
) -> CoverageReport:
    """Area-weighted coverage of ``maximal`` by ``actual`` (boolean vertex masks)."""
    area = world.mesh.vertex_area
    a_max = float(area[maximal].sum())
    if not maximal.any() or a_max <= 0:
        raise EmptyWindowError("maximal visible set is empty")
    clipped = actual & maximal
    a_act = float(area[clipped].sum())
    cov = min(1.0, a_act / a_max)
    n_max = int(maximal.sum())
    return CoverageReport(
        coverage=cov,
        coverage_raw=float(area[actual].sum()) / a_max,
        coverage_count=int(clipped.sum()) / n_max,
        n_actual=int(actual.sum()),
        n_actual_in_window=int(clipped.sum()),
        n_maximal=n_max,
        area_actual=a_act,
        area_maximal=a_max,
        class_label=classify(cov),
        params=params,
        window=window,
    )


def segment_coverage(
    world: ColonWorld, traj: CameraTrajectory, K: CameraIntrinsics, params: CoverageParams = CoverageParams()
) -> CoverageReport:
    """Coverage of the window between the first and last camera positions."""
    maximal, window = maximal_mask(world, traj.positions[0], traj.positions[-1], params)
    if not maximal.any():
        raise EmptyWindowError("maximal visible set is empty")
    actual = actual_visible_mask(world, traj, K, params)
    return coverage_from_masks(world, actual, maximal, params, window)


def single_frame_coverage_vector(
    world: ColonWorld,
    pose: CameraPose,
    K: CameraIntrinsics,
    param_list=DEFAULT_PARAM_LIST,
    visible: np.ndarray | None = None,
) -> np.ndarray:
    """Per-frame coverage ``mu[A(p, w)] / mu[V(p, p)]`` for each parameter set, capped at 1."""
    param_list = list(param_list)
    if not param_list:
        raise ValueError("param_list must not be empty")
    area = world.mesh.vertex_area
    ell_p = closest_lumen_param(world, pose.position)
    ell = world.vertex_params
    out = np.empty(len(param_list))
    depth = None
    by_tol: dict[float, np.ndarray] = {}
    for k, params in enumerate(param_list):
        vis = visible
        if vis is None:
            vis = by_tol.get(params.depth_tol)
            if vis is None:
                if depth is None:
                    depth, _ = ray_cast(world, pose, K)
                vis = by_tol[params.depth_tol] = visible_mask(world, pose, K, params.depth_tol, depth)
        lo, hi = window_bounds(world, ell_p, ell_p, params)
        a_max = float(area[(ell >= lo) & (ell <= hi)].sum())
        if a_max <= 0:
            raise EmptyWindowError(f"empty window for {params}")
        out[k] = min(1.0, float(area[vis].sum()) / a_max)
    return out
