"""Timing comparison of the compiled and pure-python kernel backends.

Runs each hot kernel on a representative workload and reports best-of-N
wall times. Not a test; run directly:

    python3 bench/benchmark_backends.py [--repeats 3] [--scale 1.0]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cortexkit import mc_tables
from cortexkit._kernels import load_backend


def _two_ball(dims):
    idx = np.indices(dims).astype(np.float64)
    r = dims[0] / 6.5
    a = np.array([dims[0] / 3.0, dims[1] / 2.0, dims[2] / 2.0])
    b = np.array([2.0 * dims[0] / 3.0, dims[1] / 2.0, dims[2] / 2.0])
    da = np.sqrt(((idx - a[:, None, None, None]) ** 2).sum(axis=0)) - r
    db = np.sqrt(((idx - b[:, None, None, None]) ** 2).sum(axis=0)) - r * 0.9
    return np.minimum(da, db)


def _march_workload(scale):
    side = max(int(round(40 * scale)), 16)
    values = _two_ball((side, side, side))
    return lambda backend: backend.topology_march(values, 50 * values.size)


def _mc_workload(scale):
    side = max(int(round(96 * scale)), 24)
    dims = (side, side, side)
    idx = np.indices(dims).astype(np.float64)
    c = (np.array(dims)[:, None, None, None] - 1.0) / 2.0
    values = np.sqrt(((idx - c) ** 2).sum(axis=0)) - dims[0] / 3.0
    nx, ny, nz = dims
    inside = (values < 0.0).astype(np.uint8)
    cfg = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.uint8)
    for bit in range(8):
        dx, dy, dz = mc_tables.CORNER_OFFSET[bit]
        cfg |= inside[dx : dx + nx - 1, dy : dy + ny - 1, dz : dz + nz - 1] << np.uint8(bit)
    active = mc_tables.TRI_COUNT[cfg] > 0
    ax, ay, az = np.nonzero(active)
    args = (
        ax.astype(np.int64),
        ay.astype(np.int64),
        az.astype(np.int64),
        cfg[active].astype(np.int32),
        ny,
        nz,
    )
    return lambda backend: backend.mc_emit(*args)


def _tri_workload(scale):
    n = max(int(round(60000 * scale)), 1000)
    rng = np.random.default_rng(7)
    # half near-coincident pairs (mostly hits), half far apart (misses)
    t1 = rng.normal(size=(n, 3, 3))
    t2 = t1 + rng.normal(scale=0.3, size=(n, 3, 3))
    t2[n // 2 :] += 50.0
    return lambda backend: backend.tri_pair_intersections(t1, t2)


def _best_time(fn, backend, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3, help="take the best of N runs")
    ap.add_argument("--scale", type=float, default=1.0, help="workload size multiplier")
    args = ap.parse_args()

    pure = load_backend("pure")
    try:
        native = load_backend("native")
    except ImportError:
        native = None
        print("native extension not built; timing the pure backend only\n")

    workloads = [
        ("topology_march", _march_workload(args.scale)),
        ("mc_emit", _mc_workload(args.scale)),
        ("tri_pair_intersections", _tri_workload(args.scale)),
    ]

    header = f"{'kernel':<24}{'pure (s)':>12}{'native (s)':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, fn in workloads:
        tp = _best_time(fn, pure, args.repeats)
        if native is None:
            print(f"{name:<24}{tp:>12.4f}{'-':>12}{'-':>10}")
        else:
            tn = _best_time(fn, native, args.repeats)
            print(f"{name:<24}{tp:>12.4f}{tn:>12.4f}{tp / tn:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
