"""On-disk formats for worlds, trajectories, images, intrinsics and reports.

Binary records share a 16-byte little-endian header. World records are
``CCVW`` + u16 version + u16 record kind + u32 count + u32 reserved; image
records are ``CCDI``/``CCRI`` + u16 version + u16 reserved + u32 width +
u32 height. Payloads are packed little-endian 32-bit values. Text numbers
are written with 17 significant digits so float64 values round-trip.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from colocov.camera_render import CameraIntrinsics, DepthImage, RgbImage
from colocov.colon_model import ColonMesh, ColonWorld, LumenCurve
from colocov.errors import FormatError
from colocov.synth_gen import CameraTrajectory
from colocov.view_synthesis import RigidTransform

VERSION = 1
WORLD_MAGIC = b"CCVW"
DEPTH_MAGIC = b"CCDI"
RGB_MAGIC = b"CCRI"

KIND_VERTICES = 1
KIND_FACES = 2
KIND_LUMEN_SPLINE = 3
KIND_LUMEN_POLYLINE = 4

_WORLD_HEADER = struct.Struct("<4sHHII")
_IMAGE_HEADER = struct.Struct("<4sHHII")

_LUMEN_KIND = {"catmull_rom": KIND_LUMEN_SPLINE, "polyline": KIND_LUMEN_POLYLINE}
_LUMEN_INTERP = {v: k for k, v in _LUMEN_KIND.items()}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# --- worlds -----------------------------------------------------------------


def _record(kind: int, payload: np.ndarray, count: int) -> bytes:
    return _WORLD_HEADER.pack(WORLD_MAGIC, VERSION, kind, count, 0) + payload.tobytes()


def world_to_bytes(world: ColonWorld) -> bytes:
    """Three concatenated records: vertices, faces (u32 indices), lumen control points."""
    v = world.mesh.vertices.astype("<f4")
    f = world.mesh.faces.astype("<u4")
    lum = world.lumen.control_points.astype("<f4")
    return (
        _record(KIND_VERTICES, v, len(v))
        + _record(KIND_FACES, f, len(f))
        + _record(_LUMEN_KIND[world.lumen.interpolation], lum, len(lum))
    )


def world_from_bytes(data: bytes) -> ColonWorld:
    pos = 0
    parts: dict[int, np.ndarray] = {}
    while pos < len(data):
        if len(data) - pos < _WORLD_HEADER.size:
            raise FormatError("truncated world header")
        magic, version, kind, count, _ = _WORLD_HEADER.unpack_from(data, pos)
        if magic != WORLD_MAGIC:
            raise FormatError(f"bad world magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported world version {version}")
        pos += _WORLD_HEADER.size
        dtype = "<u4" if kind == KIND_FACES else "<f4"
        nbytes = count * 3 * 4
        if len(data) - pos < nbytes:
            raise FormatError("truncated world payload")
        parts[kind] = np.frombuffer(data, dtype=dtype, count=count * 3, offset=pos).reshape(count, 3)
        pos += nbytes
    lumen_kinds = [k for k in parts if k in _LUMEN_INTERP]
    if KIND_VERTICES not in parts or KIND_FACES not in parts or len(lumen_kinds) != 1:
        raise FormatError("world file needs vertices, faces and exactly one lumen record")
    k = lumen_kinds[0]
    mesh = ColonMesh(parts[KIND_VERTICES].astype(np.float64), parts[KIND_FACES].astype(np.int64))
    return ColonWorld(mesh, LumenCurve(parts[k].astype(np.float64), _LUMEN_INTERP[k]))


def world_to_text(world: ColonWorld) -> tuple[str, str]:
    """Mesh text (``v``/``f`` records, 1-based faces) and lumen text (``l`` records)."""
    m = io.StringIO()
    for x, y, z in world.mesh.vertices:
        m.write(f"v {fmt(x)} {fmt(y)} {fmt(z)}\n")
    for i, j, k in world.mesh.faces + 1:
        m.write(f"f {i} {j} {k}\n")
    lum = io.StringIO()
    lum.write(f"# interpolation {world.lumen.interpolation}\n")
    for x, y, z in world.lumen.control_points:
        lum.write(f"l {fmt(x)} {fmt(y)} {fmt(z)}\n")
    return m.getvalue(), lum.getvalue()


def world_from_text(mesh_text: str, lumen_text: str) -> ColonWorld:
    verts, faces, lum = [], [], []
    interp = "catmull_rom"
    for line in mesh_text.splitlines():
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v" and len(tok) == 4:
            verts.append([float(t) for t in tok[1:]])
        elif tok[0] == "f" and len(tok) == 4:
            faces.append([int(t) - 1 for t in tok[1:]])
        else:
            raise FormatError(f"bad mesh line: {line!r}")
    for line in lumen_text.splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "#":
            if len(tok) == 3 and tok[1] == "interpolation":
                interp = tok[2]
            continue
        if tok[0] == "l" and len(tok) == 4:
            lum.append([float(t) for t in tok[1:]])
        else:
            raise FormatError(f"bad lumen line: {line!r}")
    return ColonWorld(ColonMesh(np.array(verts).reshape(-1, 3), np.array(faces).reshape(-1, 3)), LumenCurve(np.array(lum), interp))


def save_world(world: ColonWorld, path) -> None:
    """Binary when ``path`` ends in ``.ccvw``; otherwise ``<path>.mesh`` + ``<path>.lumen`` text."""
    path = Path(path)
    if path.suffix == ".ccvw":
        path.write_bytes(world_to_bytes(world))
        return
    mesh, lum = world_to_text(world)
    path.with_suffix(".mesh").write_text(mesh)
    path.with_suffix(".lumen").write_text(lum)


def load_world(path) -> ColonWorld:
    path = Path(path)
    if path.suffix == ".ccvw":
        return world_from_bytes(path.read_bytes())
    return world_from_text(path.with_suffix(".mesh").read_text(), path.with_suffix(".lumen").read_text())


# --- images -----------------------------------------------------------------


def depth_to_bytes(depth: DepthImage) -> bytes:
    d = np.ascontiguousarray(depth.data, dtype="<f4")
    h, w = d.shape
    return _IMAGE_HEADER.pack(DEPTH_MAGIC, VERSION, 0, w, h) + d.tobytes()


def _image_payload(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    if len(data) < _IMAGE_HEADER.size:
        raise FormatError("truncated image header")
    m, version, _, w, h = _IMAGE_HEADER.unpack_from(data, 0)
    if m != magic:
        raise FormatError(f"bad image magic {m!r}")
    if version != VERSION:
        raise FormatError(f"unsupported image version {version}")
    n = w * h * channels
    if len(data) != _IMAGE_HEADER.size + 4 * n:
        raise FormatError("image payload size does not match header")
    a = np.frombuffer(data, dtype="<f4", count=n, offset=_IMAGE_HEADER.size)
    return a.reshape((h, w, channels) if channels > 1 else (h, w))


def depth_from_bytes(data: bytes, intrinsics: CameraIntrinsics | None = None) -> DepthImage:
    return DepthImage(_image_payload(data, DEPTH_MAGIC, 1).astype(np.float32), intrinsics)


def rgb_to_bytes(rgb: RgbImage) -> bytes:
    d = np.ascontiguousarray(rgb.data, dtype="<f4")
    h, w, _ = d.shape
    return _IMAGE_HEADER.pack(RGB_MAGIC, VERSION, 0, w, h) + d.tobytes()


def rgb_from_bytes(data: bytes) -> RgbImage:
    return RgbImage(_image_payload(data, RGB_MAGIC, 3).astype(np.float32))


def save_depth(depth: DepthImage, path) -> None:
    Path(path).write_bytes(depth_to_bytes(depth))


def load_depth(path, intrinsics: CameraIntrinsics | None = None) -> DepthImage:
    return depth_from_bytes(Path(path).read_bytes(), intrinsics)


def save_rgb(rgb: RgbImage, path) -> None:
    Path(path).write_bytes(rgb_to_bytes(rgb))


def load_rgb(path) -> RgbImage:
    return rgb_from_bytes(Path(path).read_bytes())


# --- text records -------------------------------------------------------------


def intrinsics_to_text(K: CameraIntrinsics) -> str:
    return f"{fmt(K.fx)} {fmt(K.fy)} {fmt(K.x0)} {fmt(K.y0)} {K.width} {K.height}\n"


def intrinsics_from_text(text: str) -> CameraIntrinsics:
    tok = text.split()
    if len(tok) != 6:
        raise FormatError("intrinsics need: fx fy x0 y0 width height")
    fx, fy, x0, y0 = (float(t) for t in tok[:4])
    return CameraIntrinsics(fx, fy, x0, y0, int(tok[4]), int(tok[5]))


def save_intrinsics(K: CameraIntrinsics, path) -> None:
    Path(path).write_text(intrinsics_to_text(K))


def load_intrinsics(path) -> CameraIntrinsics:
    return intrinsics_from_text(Path(path).read_text())


def trajectory_to_text(traj: CameraTrajectory) -> str:
    """One line per frame: ``t r00 .. r22 px py pz``."""
    out = io.StringIO()
    out.write(f"# fps {traj.fps}\n")
    for i in range(len(traj)):
        vals = [i / traj.fps, *traj.rotations[i].ravel(), *traj.positions[i]]
        out.write(" ".join(fmt(v) for v in vals) + "\n")
    return out.getvalue()


def trajectory_from_text(text: str, fps: int | None = None) -> CameraTrajectory:
    rows = []
    for line in text.splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "#":
            if len(tok) == 3 and tok[1] == "fps":
                fps = fps or int(tok[2])
            continue
        if len(tok) != 13:
            raise FormatError(f"trajectory line needs 13 numbers: {line!r}")
        rows.append([float(t) for t in tok])
    if not rows:
        raise FormatError("empty trajectory")
    a = np.array(rows)
    if fps is None:
        fps = int(round(1.0 / np.median(np.diff(a[:, 0])))) if len(a) > 1 else 30
    return CameraTrajectory(a[:, 1:10].reshape(-1, 3, 3), a[:, 10:13], fps)


def save_trajectory(traj: CameraTrajectory, path) -> None:
    Path(path).write_text(trajectory_to_text(traj))


def load_trajectory(path) -> CameraTrajectory:
    return trajectory_from_text(Path(path).read_text())


def transform_to_text(xform: RigidTransform) -> str:
    vals = [*xform.rotation.ravel(), *xform.translation]
    return " ".join(fmt(v) for v in vals) + "\n"


def transform_from_text(text: str) -> RigidTransform:
    tok = [t for line in text.splitlines() if not line.lstrip().startswith("#") for t in line.split()]
    if len(tok) != 12:
        raise FormatError("rigid transform needs 12 numbers: r00..r22 tx ty tz")
    a = np.array([float(t) for t in tok])
    return RigidTransform(a[:9].reshape(3, 3), a[9:])


def coverage_report_to_text(report, extra: dict | None = None) -> str:
    """Key-value block for one segment."""
    lines = [
        f"coverage={fmt(report.coverage)}",
        f"coverage_raw={fmt(report.coverage_raw)}",
        f"coverage_count={fmt(report.coverage_count)}",
        f"n_actual={report.n_actual}",
        f"n_actual_in_window={report.n_actual_in_window}",
        f"n_maximal={report.n_maximal}",
        f"area_actual={fmt(report.area_actual)}",
        f"area_maximal={fmt(report.area_maximal)}",
        f"class={report.class_label}",
        f"delta0={fmt(report.params.delta0)}",
        f"delta1={fmt(report.params.delta1)}",
        f"depth_tol={fmt(report.params.depth_tol)}",
        f"window_lo={fmt(report.window[0])}",
        f"window_hi={fmt(report.window[1])}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> list[dict[str, str]]:
    """Blank-line separated ``key=value`` blocks."""
    blocks, cur = [], {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            if cur:
                blocks.append(cur)
                cur = {}
            continue
        if line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"bad report line: {line!r}")
        cur[key.strip()] = val.strip()
    if cur:
        blocks.append(cur)
    return blocks


def coverage_report_from_text(text: str):
    from colocov.coverage_core import CoverageParams, CoverageReport

    out = []
    for b in parse_key_values(text):
        params = CoverageParams(float(b["delta0"]), float(b["delta1"]), float(b.get("depth_tol", 0.005)))
        out.append(
            CoverageReport(
                coverage=float(b["coverage"]),
                coverage_raw=float(b["coverage_raw"]),
                coverage_count=float(b.get("coverage_count", "nan")),
                n_actual=int(b["n_actual"]),
                n_actual_in_window=int(b.get("n_actual_in_window", -1)),
                n_maximal=int(b["n_maximal"]),
                area_actual=float(b.get("area_actual", "nan")),
                area_maximal=float(b.get("area_maximal", "nan")),
                class_label=b["class"],
                params=params,
                window=(float(b.get("window_lo", 0.0)), float(b.get("window_hi", 0.0))),
            )
        )
    return out
