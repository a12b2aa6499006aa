"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--width 384 --height 320 --frames 5]

Prints per-frame ray-cast time, rays per second, FNV-1a throughput, and
whether both backends produced identical results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from colocov import kernels
from colocov.camera_render import CameraIntrinsics, cast_rays, mesh_bvh, world_rays
from colocov.synth_gen import ColonGenSpec, TrajectorySpec, generate_colon, generate_trajectory


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=384)
    ap.add_argument("--height", type=int, default=320)
    ap.add_argument("--frames", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--hash-mb", type=float, default=4.0)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels.compiled is not None else [])
    world = generate_colon(ColonGenSpec(seed=0))
    t = time.perf_counter()
    mesh_bvh(world.mesh)
    print(f"mesh: {len(world.mesh.faces)} triangles, BVH build {time.perf_counter() - t:.2f} s")
    K = CameraIntrinsics.from_fov(args.width, args.height)
    traj = generate_trajectory(world, TrajectorySpec(seed=0))
    poses = traj[:: max(1, len(traj) // args.frames)][: args.frames]
    n_rays = K.width * K.height

    results = {}
    print(f"\nray cast, {K.width}x{K.height} ({n_rays} rays), {len(poses)} frames, best of {args.repeat}")
    for name in backends:
        total, outs = 0.0, []
        for pose in poses:
            dirs = world_rays(pose, K)
            dt, out = _time(lambda: cast_rays(world, pose.position, dirs, name), args.repeat)
            total += dt
            outs.append(out)
        results[name] = outs
        per = total / len(poses)
        print(f"  {name:>7}: {per * 1e3:8.1f} ms/frame  {n_rays / per / 1e6:6.2f} Mrays/s")
    if len(backends) == 2:
        same = all(
            a[0].tobytes() == b[0].tobytes() and np.array_equal(a[1], b[1])
            for a, b in zip(results["python"], results["cython"])
        )
        print(f"  identical output: {same}")

    data = np.random.default_rng(0).integers(0, 256, int(args.hash_mb * 2**20), dtype=np.uint8).tobytes()
    print(f"\nFNV-1a 64 over {args.hash_mb:g} MiB")
    hashes = {}
    for name in backends:
        impl = kernels.get_backend(name)
        size = len(data) if name == "cython" else min(len(data), 2**18)
        dt, h = _time(lambda: impl.fnv1a64(data[:size]), 1)
        hashes[name] = impl.fnv1a64(data[: 2**16])
        print(f"  {name:>7}: {size / dt / 2**20:10.2f} MiB/s" + ("" if size == len(data) else f"  (timed on {size // 1024} KiB)"))
    if len(hashes) == 2:
        print(f"  identical output: {hashes['python'] == hashes['cython']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
