"""Time the numba and numpy flavours of each kernel.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

The numba flavours are compiled once (warm-up call) before timing. With
GEONARROW_NO_NUMBA=1 the ``*_nb`` functions are plain Python loops, so only
the numpy column is meaningful.
"""

import argparse
import json
import timeit

import numpy as np

from geonarrow import kernels
from geonarrow._accel import backend


def cases(rng: np.random.Generator):
    n, d = 200_000, 2
    lo = rng.random((n, d))
    hi = lo + 0.1
    ref = (np.array([0.4, 0.4]), np.array([0.5, 0.5]))
    yield "box_diameters", (lo, hi, *ref)

    pts = rng.uniform(-1, 1, (200_000, 2))
    centers = np.array([[0.3, 0.3], [-0.3, 0.3], [0.3, -0.3]])
    yield "bitten_eval", (pts, 2.0, centers, np.array([0.2, 0.2, 0.2]), np.array([0.05, 0.05, 0.05]))

    cloud = rng.random((20_000, 2))
    yield "greedy_cover", (cloud, 0.02)
    yield "greedy_packing", (cloud, 0.04)


def run(repeat: int = 5, seed: int = 0) -> list[dict]:
    rows = []
    for name, args in cases(np.random.default_rng(seed)):
        f_np = getattr(kernels, f"{name}_np")
        f_nb = getattr(kernels, f"{name}_nb")
        f_nb(*args)  # compile
        t_np = min(timeit.repeat(lambda: f_np(*args), number=1, repeat=repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*args), number=1, repeat=repeat))
        rows.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
    return rows


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="also write the table as JSON")
    args = p.parse_args(argv)
    rows = run(args.repeat)
    print(f"backend: {backend()}")
    print(f"{'kernel':<16}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<16}{1e3 * r['numpy_s']:>12.2f}{1e3 * r['numba_s']:>12.2f}{r['speedup']:>10.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
