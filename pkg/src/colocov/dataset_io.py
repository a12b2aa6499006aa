"""Fixed-length labeled segments and their on-disk dataset layout.

Layout under the output directory::

    world_000/world.ccvw
    world_000/seg_0000/trajectory.txt
    world_000/seg_0000/intrinsics.txt
    world_000/seg_0000/coverage.txt
    world_000/seg_0000/frame_coverage.txt
    world_000/seg_0000/depth/000000.ccdi
    MANIFEST.txt

``MANIFEST.txt`` lists every other file as ``<fnv1a64 hex> <bytes> <path>``,
sorted by path.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from colocov import formats
from colocov.camera_render import CameraIntrinsics, ray_cast, visible_mask
from colocov.colon_model import ColonWorld
from colocov.coverage_core import (
    DEFAULT_PARAM_LIST,
    CoverageParams,
    coverage_from_masks,
    maximal_mask,
    single_frame_coverage_vector,
)
from colocov.errors import FormatError, HashMismatchError
from colocov.kernels import fnv1a64
from colocov.synth_gen import CameraTrajectory, ColonGenSpec, TrajectorySpec, generate_colon, generate_trajectory

SEGMENT_SECONDS = 10
MANIFEST = "MANIFEST.txt"


@dataclass(frozen=True, eq=False)
class SegmentRecord:
    world_ref: str
    frame_range: tuple[int, int]
    fps: int
    coverage: float
    coverage_vector_per_frame: np.ndarray
    class_label: str
    seeds: dict = field(default_factory=dict)

    def __post_init__(self):
        start, end = self.frame_range
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        v = np.asarray(self.coverage_vector_per_frame, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != end - start:
            raise ValueError("one coverage row per frame is required")
        object.__setattr__(self, "coverage_vector_per_frame", v)

    def __eq__(self, other):
        if not isinstance(other, SegmentRecord):
            return NotImplemented
        return (
            self.world_ref == other.world_ref
            and tuple(self.frame_range) == tuple(other.frame_range)
            and self.fps == other.fps
            and self.coverage == other.coverage
            and np.array_equal(self.coverage_vector_per_frame, other.coverage_vector_per_frame)
            and self.class_label == other.class_label
            and self.seeds == other.seeds
        )


def segment_trajectory(traj, fps: int, seconds: float = SEGMENT_SECONDS) -> list[tuple[int, int]]:
    """Consecutive ``[start, end)`` ranges of ``seconds * fps`` frames; the remainder is dropped."""
    n = len(traj) if not isinstance(traj, int) else traj
    size = int(round(seconds * fps))
    if size <= 0:
        raise ValueError("segment length must be positive")
    if n < size:
        raise ValueError(f"trajectory has {n} frames, fewer than one {size}-frame segment")
    return [(s, s + size) for s in range(0, n - size + 1, size)]


def label_segment(
    world: ColonWorld,
    traj: CameraTrajectory,
    K: CameraIntrinsics,
    params: CoverageParams = CoverageParams(),
    param_list=DEFAULT_PARAM_LIST,
    depth_stride: int | None = None,
):
    """Coverage report, per-frame coverage rows and sampled depth frames for one segment.

    One render per frame feeds the segment union, the per-frame vector and
    the exported depth; all tolerances must therefore agree.
    """
    if any(p.depth_tol != params.depth_tol for p in param_list):
        raise ValueError("per-frame parameters must share the segment depth tolerance")
    maximal, window = maximal_mask(world, traj.positions[0], traj.positions[-1], params)
    actual = np.zeros(len(world.mesh.vertices), dtype=bool)
    rows, depths = [], {}
    for i, pose in enumerate(traj):
        depth, _ = ray_cast(world, pose, K)
        vis = visible_mask(world, pose, K, params.depth_tol, depth)
        actual |= vis
        rows.append(single_frame_coverage_vector(world, pose, K, param_list, visible=vis))
        if depth_stride and i % depth_stride == 0:
            depths[i] = depth
    report = coverage_from_masks(world, actual, maximal, params, window)
    return report, np.array(rows), depths


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExportConfig:
    n_worlds: int = 5
    segments_per_world: int = 120
    seed: int = 11
    fps: int = 30
    seconds: float = SEGMENT_SECONDS
    width: int = 384
    height: int = 320
    hfov_deg: float = 120.0
    world_spec: ColonGenSpec = ColonGenSpec()
    depth_stride: int = 30
    delta0: float = 1.0
    delta1: float = 4.0
    workers: int = 1


def _segment_spec(rng: np.random.Generator, length: float, cfg: ExportConfig, seed: int) -> TrajectorySpec:
    start = float(rng.uniform(0.35, 0.85) * length)
    end = float(start - rng.uniform(0.05, 0.25) * length)
    return TrajectorySpec(
        seed=seed,
        duration_s=cfg.seconds,
        fps=cfg.fps,
        start_ell=start,
        end_ell=max(end, 0.05 * length),
    )


def _export_world(args) -> None:
    out, w_idx, world_seed, seg_seeds, cfg = args
    spec = replace(cfg.world_spec, seed=world_seed)
    world = generate_colon(spec)
    K = CameraIntrinsics.from_fov(cfg.width, cfg.height, cfg.hfov_deg)
    params = CoverageParams(cfg.delta0, cfg.delta1)
    wdir = Path(out) / f"world_{w_idx:03d}"
    wdir.mkdir(parents=True, exist_ok=True)
    (wdir / "world.ccvw").write_bytes(formats.world_to_bytes(world))
    for s_idx, seed in enumerate(seg_seeds):
        rng = np.random.default_rng(seed)
        tspec = _segment_spec(rng, world.length, cfg, seed)
        traj = generate_trajectory(world, tspec)
        for start, end in segment_trajectory(traj, cfg.fps, cfg.seconds)[:1]:
            seg = traj[start:end]
            report, rows, depths = label_segment(world, seg, K, params, depth_stride=cfg.depth_stride)
            sdir = wdir / f"seg_{s_idx:04d}"
            (sdir / "depth").mkdir(parents=True, exist_ok=True)
            formats.save_trajectory(seg, sdir / "trajectory.txt")
            formats.save_intrinsics(K, sdir / "intrinsics.txt")
            extra = {
                "world_ref": wdir.name,
                "frame_start": start,
                "frame_end": end,
                "fps": cfg.fps,
                "world_seed": world_seed,
                "trajectory_seed": seed,
            }
            (sdir / "coverage.txt").write_text(formats.coverage_report_to_text(report, extra))
            (sdir / "frame_coverage.txt").write_text(
                "".join(" ".join(formats.fmt(x) for x in r) + "\n" for r in rows)
            )
            for i, d in depths.items():
                formats.save_depth(d, sdir / "depth" / f"{i:06d}.ccdi")


def export_dataset(out_dir, cfg: ExportConfig = ExportConfig()) -> Path:
    """Write the dataset and its manifest; returns the manifest path.

    World and segment seeds are spawned from ``cfg.seed`` so output bytes
    depend only on the configuration, not on worker scheduling.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(cfg.seed)
    jobs = []
    for w_idx, wss in enumerate(root.spawn(cfg.n_worlds)):
        world_ss, seg_ss = wss.spawn(2)
        seg_seeds = [_seed_int(s) for s in seg_ss.spawn(cfg.segments_per_world)]
        jobs.append((str(out), w_idx, _seed_int(world_ss), seg_seeds, cfg))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            list(ex.map(_export_world, jobs))
    else:
        for j in jobs:
            _export_world(j)
    return write_manifest(out)


def _payload_files(root: Path) -> list[Path]:
    files = [p for p in root.rglob("*") if p.is_file() and p.name != MANIFEST]
    return sorted(files, key=lambda p: p.relative_to(root).as_posix())


def write_manifest(root) -> Path:
    root = Path(root)
    lines = []
    for p in _payload_files(root):
        data = p.read_bytes()
        lines.append(f"{fnv1a64(data):016x} {len(data)} {p.relative_to(root).as_posix()}\n")
    path = root / MANIFEST
    path.write_text("".join(lines))
    return path


def read_manifest(root) -> list[tuple[str, int, str]]:
    out = []
    for line in (Path(root) / MANIFEST).read_text().splitlines():
        tok = line.split(" ", 2)
        if len(tok) != 3:
            raise FormatError(f"bad manifest line: {line!r}")
        out.append((tok[0], int(tok[1]), tok[2]))
    return out


def verify_manifest(root) -> int:
    """Recheck every listed file; raises :class:`HashMismatchError` on any difference."""
    root = Path(root)
    entries = read_manifest(root)
    bad = []
    listed = set()
    for h, size, rel in entries:
        listed.add(rel)
        p = root / rel
        if not p.is_file():
            bad.append((rel, "missing"))
            continue
        data = p.read_bytes()
        if len(data) != size or f"{fnv1a64(data):016x}" != h:
            bad.append((rel, "content"))
    for p in _payload_files(root):
        rel = p.relative_to(root).as_posix()
        if rel not in listed:
            bad.append((rel, "unlisted"))
    if bad:
        raise HashMismatchError(bad)
    return len(entries)


def load_segment(seg_dir) -> tuple[SegmentRecord, CameraTrajectory, CameraIntrinsics, dict]:
    d = Path(seg_dir)
    kv = formats.parse_key_values((d / "coverage.txt").read_text())
    if len(kv) != 1:
        raise FormatError(f"{d}: expected one coverage block")
    b = kv[0]
    rows = np.loadtxt(d / "frame_coverage.txt", ndmin=2)
    K = formats.load_intrinsics(d / "intrinsics.txt")
    traj = formats.load_trajectory(d / "trajectory.txt")
    depths = {int(p.stem): formats.load_depth(p, K) for p in sorted((d / "depth").glob("*.ccdi"))}
    rec = SegmentRecord(
        world_ref=b["world_ref"],
        frame_range=(int(b["frame_start"]), int(b["frame_end"])),
        fps=int(b["fps"]),
        coverage=float(b["coverage"]),
        coverage_vector_per_frame=rows,
        class_label=b["class"],
        seeds={"world": int(b["world_seed"]), "trajectory": int(b["trajectory_seed"])},
    )
    return rec, traj, K, depths


def import_dataset(root, verify: bool = True) -> list[SegmentRecord]:
    """Segment records in manifest order (optionally verifying hashes first)."""
    root = Path(root)
    if verify:
        verify_manifest(root)
    seg_dirs = sorted({(root / rel).parent for _, _, rel in read_manifest(root) if rel.endswith("coverage.txt")})
    return [load_segment(d)[0] for d in seg_dirs]


def count_segments(root) -> int:
    return sum(1 for _, _, rel in read_manifest(root) if os.path.basename(rel) == "coverage.txt")
