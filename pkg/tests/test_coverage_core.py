import numpy as np
import pytest

from colocov.camera_render import CameraIntrinsics, CameraPose, visible_vertices
from colocov.colon_model import ColonMesh
from colocov.coverage_core import (
    DEFAULT_PARAM_LIST,
    CoverageParams,
    actual_visible_union,
    classify,
    coverage_from_masks,
    maximal_mask,
    maximal_visible_set,
    segment_coverage,
    single_frame_coverage_vector,
)
from colocov.errors import EmptyWindowError
from colocov.synth_gen import (
    CameraTrajectory,
    ColonGenSpec,
    TrajectorySpec,
    generate_colon,
    generate_trajectory,
    wall_stare_trajectory,
)
from oracles import cylinder_world

LOOK_PX = np.array([[0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]])
LOOK_NX = np.array([[0, -1.0, 0], [0, 0, 1.0], [-1.0, 0, 0]])


@pytest.fixture(scope="module")
def tube():
    return cylinder_world(length=10, radius=1.0, axial=40, radial=48, capped=True)


def test_maximal_set_window(tube):
    ids = maximal_visible_set(tube, [0, 0, 2], [0, 0, 7], CoverageParams(1.0, 3.0))
    ell = tube.vertex_params
    expected = np.flatnonzero((ell >= 3.0) & (ell <= 10.0))
    np.testing.assert_array_equal(ids, expected)


def test_degenerate_and_full_windows(tube):
    ring = maximal_visible_set(tube, [0, 0, 5], [0, 0, 5], CoverageParams(0.0, 0.0))
    assert len(ring) == 48
    np.testing.assert_allclose(tube.mesh.vertices[ring, 2], 5.0)
    full = maximal_visible_set(tube, [0, 0, 0], [0, 0, 10], CoverageParams(0.0, 0.0))
    assert len(full) == len(tube.mesh.vertices)


def test_empty_window_raises(tube):
    with pytest.raises(EmptyWindowError):
        maximal_mask(tube, [0, 0, 5], [0, 0, 5], CoverageParams(10.0, 0.0))


def test_union_examples(tube):
    K = CameraIntrinsics.from_fov(32, 32, 60)
    a = CameraPose(LOOK_PX, [0, 0, 5])
    b = CameraPose(LOOK_NX, [0, 0, 5])
    p = CoverageParams()
    one = actual_visible_union(tube, CameraTrajectory.from_poses([a], 30), K, p)
    np.testing.assert_array_equal(one, visible_vertices(tube, a, K))
    dup = actual_visible_union(tube, CameraTrajectory.from_poses([a, a], 30), K, p)
    np.testing.assert_array_equal(one, dup)
    other = visible_vertices(tube, b, K)
    assert len(np.intersect1d(one, other)) == 0
    both = actual_visible_union(tube, CameraTrajectory.from_poses([a, b], 30), K, p)
    assert len(both) == len(one) + len(other)


def test_full_actual_set_gives_one(tube):
    m, win = maximal_mask(tube, [0, 0, 2], [0, 0, 4], CoverageParams())
    r = coverage_from_masks(tube, m, m, CoverageParams(), win)
    assert r.coverage == 1.0 and r.coverage_count == 1.0
    r2 = coverage_from_masks(tube, np.ones_like(m), m, CoverageParams(), win)
    assert r2.coverage == 1.0 and r2.coverage_raw > 1.0


def test_class_anchors_and_edges():
    assert classify(0.931) == "mostly_covered"
    assert classify(0.427) == "partially_covered"
    assert classify(0.227) == "mostly_not_covered"
    assert classify(0.4) == "partially_covered"
    assert classify(0.8) == "mostly_covered"
    assert classify(0.0) == "mostly_not_covered" and classify(1.0) == "mostly_covered"
    for bad in (-0.01, 1.01, float("nan")):
        with pytest.raises(ValueError):
            classify(bad)


def test_adding_frames_never_decreases(small_world, small_K):
    tr = generate_trajectory(small_world, TrajectorySpec(seed=13, fps=6))
    full = segment_coverage(small_world, tr, small_K)
    # keep the endpoints so the maximal set is unchanged
    sparse = CameraTrajectory.from_poses([tr[0], *tr[10:50:10], tr[len(tr) - 1]], tr.fps)
    partial = segment_coverage(small_world, sparse, small_K)
    assert partial.window == full.window
    assert partial.coverage <= full.coverage
    assert 0.0 <= full.coverage <= 1.0
    assert full.coverage == pytest.approx(full.area_actual / full.area_maximal)


def test_single_frame_vector(small_world, small_K):
    tr = generate_trajectory(small_world, TrajectorySpec(seed=3))
    v = single_frame_coverage_vector(small_world, tr[0], small_K)
    assert v.shape == (3,) and len(DEFAULT_PARAM_LIST) == 3
    assert np.all((v >= 0) & (v <= 1))
    stare = wall_stare_trajectory(small_world, 20.0, duration_s=1, fps=1, offset_frac=0.9)
    v = single_frame_coverage_vector(small_world, stare[0], small_K)
    assert np.all(v < 0.05)


def test_single_frame_vector_delta1_monotone(small_world, small_K):
    stare = wall_stare_trajectory(small_world, 20.0, duration_s=1, fps=1, offset_frac=0.5)
    params = [CoverageParams(1.0, d1) for d1 in (2.0, 3.0, 4.0, 6.0, 9.0)]
    v = single_frame_coverage_vector(small_world, stare[0], small_K, params)
    assert np.all(np.diff(v) <= 0)
    assert v[0] < 1.0
    with pytest.raises(ValueError):
        single_frame_coverage_vector(small_world, stare[0], small_K, [])


def test_area_and_count_measures_agree_on_fine_mesh():
    w = generate_colon(ColonGenSpec(seed=2, axial_segments=280, radial_segments=128))
    side = ColonMesh(w.mesh.vertices, w.mesh.faces[: 2 * 280 * 128])  # end caps excluded
    assert side.max_edge_length <= 1.0 / 4
    K = CameraIntrinsics.from_fov(64, 54)
    tr = generate_trajectory(w, TrajectorySpec(seed=2, fps=3))
    r = segment_coverage(w, tr, K)
    assert abs(r.coverage - r.coverage_count) <= 0.03
