import numpy as np
import pytest

from colocov import formats
from colocov.camera_render import CameraIntrinsics, DepthImage, RgbImage, ray_cast, render_rgb
from colocov.coverage_core import segment_coverage
from colocov.errors import FormatError
from colocov.synth_gen import CameraTrajectory, TrajectorySpec, generate_trajectory
from colocov.view_synthesis import RigidTransform


def test_world_binary_round_trip(small_world):
    b = formats.world_to_bytes(small_world)
    w = formats.world_from_bytes(b)
    assert formats.world_to_bytes(w) == b
    np.testing.assert_array_equal(w.mesh.faces, small_world.mesh.faces)
    np.testing.assert_array_equal(w.mesh.vertices, small_world.mesh.vertices.astype(np.float32))
    assert b[:4] == b"CCVW"


def test_world_text_round_trip(small_world, tmp_path):
    formats.save_world(small_world, tmp_path / "w")
    w = formats.load_world(tmp_path / "w")
    assert w.mesh.vertices.tobytes() == small_world.mesh.vertices.tobytes()
    assert w.lumen.control_points.tobytes() == small_world.lumen.control_points.tobytes()
    assert w.lumen.interpolation == small_world.lumen.interpolation
    assert (tmp_path / "w.mesh").read_text().splitlines()[-1].startswith("f ")


def test_world_corruption_detected(small_world):
    b = bytearray(formats.world_to_bytes(small_world))
    with pytest.raises(FormatError):
        formats.world_from_bytes(b"XXXX" + bytes(b[4:]))
    with pytest.raises(FormatError):
        formats.world_from_bytes(bytes(b[:-5]))
    b[4] = 9
    with pytest.raises(FormatError):
        formats.world_from_bytes(bytes(b))


def test_image_round_trips(small_world, small_K, tmp_path):
    tr = generate_trajectory(small_world, TrajectorySpec(seed=1))
    d, _ = ray_cast(small_world, tr[0], small_K)
    rgb = render_rgb(small_world, tr[0], small_K, d)
    d32 = DepthImage(d.data.astype(np.float32), small_K)
    formats.save_depth(d32, tmp_path / "d.ccdi")
    formats.save_rgb(RgbImage(rgb.data.astype(np.float32)), tmp_path / "c.ccri")
    assert formats.load_depth(tmp_path / "d.ccdi").data.tobytes() == d32.data.tobytes()
    assert formats.load_rgb(tmp_path / "c.ccri").data.tobytes() == rgb.data.astype(np.float32).tobytes()
    raw = (tmp_path / "d.ccdi").read_bytes()
    assert raw[:4] == b"CCDI" and len(raw) == 16 + 4 * small_K.width * small_K.height
    with pytest.raises(FormatError):
        formats.depth_from_bytes(raw[:-1])
    with pytest.raises(FormatError):
        formats.rgb_from_bytes(raw)


def test_trajectory_round_trip(small_world, tmp_path):
    tr = generate_trajectory(small_world, TrajectorySpec(seed=2))
    formats.save_trajectory(tr, tmp_path / "t.txt")
    back = formats.load_trajectory(tmp_path / "t.txt")
    assert back == tr
    first = (tmp_path / "t.txt").read_text().splitlines()[1].split()
    assert len(first) == 13 and float(first[0]) == 0.0
    with pytest.raises(FormatError):
        formats.trajectory_from_text("1 2 3\n")


def test_intrinsics_and_transform_round_trip():
    K = CameraIntrinsics(201.3, 199.9, 191.5, 159.5, 384, 320)
    assert formats.intrinsics_from_text(formats.intrinsics_to_text(K)) == K
    tr = CameraTrajectory(np.stack([np.eye(3), np.eye(3)]), [[0, 0, 0], [0.1, 0.2, 0.3]], 30)
    x = RigidTransform.between(tr[1], tr[0])
    y = formats.transform_from_text(formats.transform_to_text(x))
    assert y.rotation.tobytes() == x.rotation.tobytes() and y.translation.tobytes() == x.translation.tobytes()
    with pytest.raises(FormatError):
        formats.intrinsics_from_text("1 2 3")


def test_coverage_report_round_trip(small_world, small_K):
    tr = generate_trajectory(small_world, TrajectorySpec(seed=3, fps=3))
    r = segment_coverage(small_world, tr, small_K)
    text = formats.coverage_report_to_text(r)
    assert "coverage=" in text and "class=" in text and "delta1=" in text
    (back,) = formats.coverage_report_from_text(text)
    assert back == r
