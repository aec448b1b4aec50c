#!/usr/bin/env python3
"""Benchmark the neighbor/metric sweep: numba kernel vs. pure-numpy fallback.

The sweep dominates corpus evaluation runtime, so this is the number that
matters when deciding whether to ship with numba or set
TRAFFICRISK_NO_NUMBA=1. Both paths produce bit-identical outputs (asserted
here on every run).

Usage: python benchmarks/bench_sweep.py [--scenes N] [--vehicles N]
       [--frames N] [--repeat N] [--json out.json]
"""

import argparse
import json
import time

import numpy as np

from trafficrisk import kernels
from trafficrisk.trajectory import (
    Lane,
    LaneDirection,
    LaneLayout,
    Scene,
    VehicleClass,
    VehicleTrack,
)

LANE_W = 3.6


def build_scene(rng: np.random.Generator, n_vehicles: int, n_frames: int) -> Scene:
    layout = LaneLayout(
        [
            Lane(i + 1, i * LANE_W, (i + 1) * LANE_W, LaneDirection.POSITIVE_X)
            for i in range(3)
        ]
    )
    dt = 1.0 / 25.0
    tracks = {}
    for vid in range(1, n_vehicles + 1):
        lane = int(rng.integers(1, 4))
        y0 = (lane - 0.5) * LANE_W
        vy = float(rng.uniform(-0.4, 0.4))
        # bound the drift so the vehicle stays inside its lane
        span = n_frames * dt
        vy = float(np.clip(vy, (-(LANE_W / 2 - 0.3)) / span, (LANE_W / 2 - 0.3) / span))
        t = np.arange(n_frames) * dt
        x = float(rng.uniform(0, 400)) + float(rng.uniform(20, 38)) * t
        y = y0 + vy * t
        tracks[vid] = VehicleTrack(
            vid,
            VehicleClass.CAR,
            2.0,
            4.5,
            25.0,
            0,
            x,
            y,
            np.gradient(x, dt),
            np.full(n_frames, vy),
            np.zeros(n_frames),
            np.zeros(n_frames),
            np.array([layout.lane_id_at(yy, LaneDirection.POSITIVE_X) for yy in y],
                     dtype=np.int64),
            canonical=True,
        )
    return Scene("bench", layout, tracks, 25.0)


def run(path: str, scenes, repeat: int) -> float:
    use_numba = path == "numba"
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for scene in scenes:
            for ego in scene.tracks:
                kernels.sweep_ego(scene, ego, use_numba=use_numba)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=20)
    parser.add_argument("--vehicles", type=int, default=12)
    parser.add_argument("--frames", type=int, default=1500)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", help="also write results as JSON")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    scenes = [build_scene(rng, args.vehicles, args.frames) for _ in range(args.scenes)]
    n_cells = args.scenes * args.vehicles * args.frames * (args.vehicles - 1)

    # parity check before timing anything
    probe = scenes[0]
    a = kernels.sweep_ego(probe, 1, use_numba=True)
    b = kernels.sweep_ego(probe, 1, use_numba=False)
    for f in ("pos", "gap", "pet", "ittc", "drac", "tcross", "xenc", "clamped"):
        x, y = getattr(a, f), getattr(b, f)
        assert np.array_equal(x, y, equal_nan=x.dtype == np.float64), f
    print("parity: numba and numpy outputs identical")

    results = {}
    for path in ("numba", "numpy"):
        if path == "numba" and not kernels.numba_enabled():
            print("numba unavailable or disabled; skipping")
            continue
        elapsed = run(path, scenes, args.repeat)
        results[path] = elapsed
        print(
            f"{path:>6}: {elapsed:8.3f} s "
            f"({n_cells / elapsed / 1e6:7.1f} M cell evaluations/s)"
        )
    if len(results) == 2:
        print(f"speedup: {results['numpy'] / results['numba']:.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "scenes": args.scenes,
                    "vehicles": args.vehicles,
                    "frames": args.frames,
                    "seconds": results,
                },
                fh,
                indent=2,
                sort_keys=True,
            )


if __name__ == "__main__":
    main()
