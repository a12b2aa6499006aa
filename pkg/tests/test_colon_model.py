import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from colocov.colon_model import ColonMesh, ColonWorld, LumenCurve, closest_lumen_param, vertex_arc_params
from oracles import cylinder_world

STRAIGHT = LumenCurve(np.array([[0, 0, 0], [0, 0, 10.0]]), "polyline")
finite = st.floats(-20, 20, allow_nan=False)


def _world(lumen, verts=((0, 0, 0), (1, 0, 0), (0, 1, 0))):
    return ColonWorld(ColonMesh(np.array(verts, float), [[0, 1, 2]]), lumen)


def test_straight_projection_examples():
    w = _world(STRAIGHT)
    assert closest_lumen_param(w, [1, 0, 4]) == pytest.approx(4.0, abs=1e-12)
    assert closest_lumen_param(w, [0, 0, 0]) == 0.0


def test_l_shaped_lumen_against_dense_oracle():
    lumen = LumenCurve(np.array([[0, 0, 0], [0, 0, 5], [5, 0, 5.0]]), "polyline")
    p = np.array([1.0, 0, 6])
    ell = closest_lumen_param(_world(lumen), p)
    grid = np.linspace(0, lumen.total_length, 1_000_001)
    brute = grid[np.argmin(np.linalg.norm(lumen.evaluate(grid) - p, axis=1))]
    assert ell == pytest.approx(6.0, abs=1e-9)
    assert abs(ell - brute) <= 1e-5


def test_vertex_params_small_mesh():
    w = _world(STRAIGHT, [(1, 0, 4), (0, 1, 7), (1, 1, 5)])
    np.testing.assert_allclose(vertex_arc_params(w), [4, 7, 5], atol=1e-12)


def test_cylinder_vertex_params_match_axial_coordinate():
    w = cylinder_world(length=10, axial=20, radial=12)
    np.testing.assert_allclose(w.vertex_params, w.mesh.vertices[:, 2], atol=1e-12)


def test_identical_vertices_identical_params():
    w = _world(STRAIGHT, [(1, 2, 3), (1, 2, 3.5), (1.5, 2, 3)])
    a = w.lumen.closest_params(np.array([[1.0, 2, 3], [1.0, 2, 3]]))
    assert a[0] == a[1]


def test_arc_table_and_range_checks():
    lumen = LumenCurve(np.array([[0, 0, 0], [1, 2, 0], [3, 2, 1], [4, 0, 0.0]]))
    assert lumen.arc_table[0] == 0.0
    assert np.all(np.diff(lumen.arc_table) > 0)
    assert lumen.arc_table[-1] == pytest.approx(lumen.total_length)
    np.testing.assert_allclose(lumen.evaluate(0.0), [0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(lumen.evaluate(lumen.total_length), [4, 0, 0], atol=1e-9)
    with pytest.raises(ValueError):
        lumen.evaluate(lumen.total_length * 1.01)
    with pytest.raises(ValueError):
        lumen.evaluate(-0.1)


def test_mesh_validation_and_area():
    with pytest.raises(ValueError):
        ColonMesh(np.zeros((3, 3)), [[0, 1, 2]])
    with pytest.raises(ValueError):
        ColonMesh(np.eye(3), [[0, 1, 3]])
    w = cylinder_world()
    assert w.mesh.vertex_area.sum() == pytest.approx(w.mesh.total_area, rel=1e-9)
    assert np.all(w.mesh.vertex_area >= 0)


@settings(max_examples=60, deadline=None)
@given(st.tuples(finite, finite, finite), st.floats(-30, 40))
def test_straight_line_matches_clamped_projection(p, _):
    ell = STRAIGHT.closest_params(np.array([p]))[0]
    assert ell == pytest.approx(min(10.0, max(0.0, p[2])), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    ctrl = np.cumsum(rng.normal(size=(6, 3)) + [0, 0, 2], axis=0)
    lumen = LumenCurve(ctrl)
    p = ctrl.mean(axis=0) + rng.normal(size=3)
    R = Rotation.random(random_state=seed).as_matrix()
    t = rng.normal(size=3) * 5
    moved = LumenCurve(ctrl @ R.T + t)
    a = lumen.closest_params(p[None])[0]
    b = moved.closest_params((R @ p + t)[None])[0]
    assert abs(a - b) <= 1e-9 * lumen.total_length


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_refinement_never_worse_than_dense(seed):
    rng = np.random.default_rng(seed)
    ctrl = np.cumsum(rng.normal(size=(8, 3)), axis=0)
    lumen = LumenCurve(ctrl)
    pts = ctrl.mean(axis=0) + rng.normal(size=(20, 3)) * 2
    ell = lumen.closest_params(pts)
    dense = np.linspace(0, lumen.total_length, 2048)
    S = lumen.evaluate(dense)
    best_dense = np.min(np.linalg.norm(pts[:, None] - S[None], axis=2), axis=1)
    got = np.linalg.norm(pts - lumen.evaluate(ell), axis=1)
    assert np.all(got <= best_dense + 1e-12)
