"""``colocov`` command line."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from colocov import formats


def _add_world_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--length", type=float, default=40.0)
    p.add_argument("--radius", type=float, default=2.5)
    p.add_argument("--fold-amplitude", type=float, default=0.35)
    p.add_argument("--fold-count", type=int, default=10)
    p.add_argument("--bend-amplitude", type=float, default=3.0)
    p.add_argument("--axial-segments", type=int, default=320)
    p.add_argument("--radial-segments", type=int, default=96)


def _world_spec(args, seed: int):
    from colocov.synth_gen import ColonGenSpec

    return ColonGenSpec(
        seed=seed,
        length_L=args.length,
        base_radius=args.radius,
        fold_amplitude=args.fold_amplitude,
        fold_count=args.fold_count,
        bend_amplitude=args.bend_amplitude,
        axial_segments=args.axial_segments,
        radial_segments=args.radial_segments,
    )


def cmd_generate(args) -> int:
    from colocov.camera_render import CameraIntrinsics
    from colocov.synth_gen import TrajectorySpec, generate_colon, generate_trajectory

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    world_seed = args.seed if args.world_seed is None else args.world_seed
    world = generate_colon(_world_spec(args, world_seed))
    start = args.start if args.start is not None else 0.6 * world.length
    end = args.end if args.end is not None else 0.5 * world.length
    spec = TrajectorySpec(
        seed=args.seed,
        duration_s=args.duration,
        fps=args.fps,
        start_ell=start,
        end_ell=end,
        position_jitter_amp=args.position_jitter,
        orientation_jitter_amp_deg=args.orientation_jitter,
        jitter_smoothness=args.smoothness,
    )
    traj = generate_trajectory(world, spec)
    formats.save_world(world, out / "world.ccvw")
    formats.save_trajectory(traj, out / "trajectory.txt")
    formats.save_intrinsics(CameraIntrinsics.from_fov(args.width, args.height, args.hfov), out / "intrinsics.txt")
    print(f"wrote {out}/world.ccvw ({len(world.mesh.vertices)} vertices), trajectory.txt ({len(traj)} frames), intrinsics.txt")
    return 0


def cmd_coverage(args) -> int:
    from colocov.coverage_core import CoverageParams, segment_coverage

    world = formats.load_world(args.world)
    traj = formats.load_trajectory(args.trajectory)
    K = formats.load_intrinsics(args.intrinsics)
    report = segment_coverage(world, traj, K, CoverageParams(args.delta0, args.delta1, args.depth_tol))
    text = formats.coverage_report_to_text(report)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_warp(args) -> int:
    from colocov.view_synthesis import synthesize_view

    K = formats.load_intrinsics(args.intrinsics)
    rgb = formats.load_rgb(args.rgb)
    depth = formats.load_depth(args.depth, K)
    xform = formats.transform_from_text(Path(args.pose).read_text())
    prev = formats.load_depth(args.target_depth, K) if args.target_depth else None
    I_hat, D_hat, mask = synthesize_view(rgb, depth, K, xform, prev)
    formats.save_rgb(I_hat, args.out_rgb)
    if args.out_depth:
        formats.save_depth(D_hat, args.out_depth)
    print(f"valid pixels: {int(mask.sum())} / {mask.size}")
    return 0


def _depth_files(d: Path) -> dict[str, Path]:
    return {p.name: p for p in sorted(d.glob("*.ccdi"))}


def cmd_eval_depth(args) -> int:
    from colocov.depth_metrics import dom, dr_mre, mre, resolve_epsilon

    pred_files = _depth_files(Path(args.pred))
    gt_files = _depth_files(Path(args.gt))
    names = sorted(set(pred_files) & set(gt_files))
    if not names:
        print("no matching .ccdi files", file=sys.stderr)
        return 2
    pred = [formats.load_depth(pred_files[n]).data for n in names]
    gt = [formats.load_depth(gt_files[n]).data for n in names]
    eps = resolve_epsilon(gt, args.epsilon)
    wanted = [m.strip().lower() for m in args.metrics.split(",") if m.strip()]
    cols = {}
    for m in wanted:
        if m == "mre":
            cols["MRE"] = mre(pred, gt, eps)[0]
        elif m in ("drmre", "dr-mre"):
            cols["DR-MRE"] = dr_mre(pred, gt, eps)[0]
        elif m == "dom":
            cols["DOM"] = dom(pred, gt, args.pairs, args.seed)
        else:
            print(f"unknown metric {m!r}", file=sys.stderr)
            return 2
    print(f"{'images':>8} " + " ".join(f"{k:>8}" for k in cols))
    print(f"{len(names):>8} " + " ".join(f"{v:8.3f}" for v in cols.values()))
    return 0


def cmd_export(args) -> int:
    from colocov.dataset_io import ExportConfig, count_segments, export_dataset

    cfg = ExportConfig(
        n_worlds=args.worlds,
        segments_per_world=args.segments_per_world,
        seed=args.seed,
        fps=args.fps,
        width=args.width,
        height=args.height,
        hfov_deg=args.hfov,
        world_spec=_world_spec(args, 0),
        depth_stride=args.depth_stride,
        workers=args.workers,
    )
    manifest = export_dataset(args.out, cfg)
    print(f"exported {count_segments(args.out)} segments; manifest {manifest}")
    return 0


def cmd_verify(args) -> int:
    from colocov.dataset_io import verify_manifest
    from colocov.errors import HashMismatchError

    try:
        n = verify_manifest(args.dir)
    except HashMismatchError as e:
        for rel, why in e.mismatches:
            print(f"{why}: {rel}", file=sys.stderr)
        return 1
    print(f"ok: {n} files")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="colocov", description="Synthetic colonoscopy coverage toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a world and one jittered withdrawal trajectory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--world-seed", type=int, default=None)
    g.add_argument("--duration", type=float, default=10.0)
    g.add_argument("--fps", type=int, default=30)
    g.add_argument("--start", type=float, default=None, help="start arc length (default 0.6 L)")
    g.add_argument("--end", type=float, default=None, help="end arc length (default 0.5 L)")
    g.add_argument("--position-jitter", type=float, default=0.3)
    g.add_argument("--orientation-jitter", type=float, default=10.0)
    g.add_argument("--smoothness", type=float, default=0.5, help="jitter cutoff in Hz")
    g.add_argument("--width", type=int, default=384)
    g.add_argument("--height", type=int, default=320)
    g.add_argument("--hfov", type=float, default=120.0)
    g.add_argument("--out", required=True)
    _add_world_spec_args(g)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("coverage", help="segment coverage of a trajectory")
    c.add_argument("--world", required=True)
    c.add_argument("--trajectory", required=True)
    c.add_argument("--intrinsics", required=True)
    c.add_argument("--delta0", type=float, default=1.0)
    c.add_argument("--delta1", type=float, default=4.0)
    c.add_argument("--depth-tol", type=float, default=0.005)
    c.add_argument("--out")
    c.set_defaults(func=cmd_coverage)

    w = sub.add_parser("warp", help="re-render a frame in another camera")
    w.add_argument("--rgb", required=True)
    w.add_argument("--depth", required=True)
    w.add_argument("--intrinsics", required=True)
    w.add_argument("--pose", required=True, help="12 numbers: R row-major then t")
    w.add_argument("--target-depth")
    w.add_argument("--out-rgb", required=True)
    w.add_argument("--out-depth")
    w.set_defaults(func=cmd_warp)

    e = sub.add_parser("eval-depth", help="MRE / DR-MRE / DOM over matching depth files")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--metrics", default="mre,drmre,dom")
    e.add_argument("--epsilon", default="auto")
    e.add_argument("--pairs", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=1)
    e.set_defaults(func=cmd_eval_depth)

    x = sub.add_parser("export", help="write a labeled segment dataset with manifest")
    x.add_argument("--worlds", type=int, default=5)
    x.add_argument("--segments-per-world", type=int, default=120)
    x.add_argument("--seed", type=int, default=11)
    x.add_argument("--fps", type=int, default=30)
    x.add_argument("--width", type=int, default=384)
    x.add_argument("--height", type=int, default=320)
    x.add_argument("--hfov", type=float, default=120.0)
    x.add_argument("--depth-stride", type=int, default=30)
    x.add_argument("--workers", type=int, default=1)
    x.add_argument("--out", required=True)
    _add_world_spec_args(x)
    x.set_defaults(func=cmd_export)

    v = sub.add_parser("verify", help="check a dataset against its manifest")
    v.add_argument("--dir", required=True)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "epsilon", None) not in (None, "auto"):
        args.epsilon = float(args.epsilon)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
