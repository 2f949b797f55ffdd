"""Time the ray-march backends on one forward solve.

The jit kernels and the vectorized numpy fallback share the exact same
quadrature, so this only measures speed.  The first jit call compiles;
it is timed separately so the steady-state comparison stays honest.

    python3 benchmarks/forward_backends.py --h 0.05 --repeats 3
"""

import argparse
import time

from rtetomo import Geometry, GridSet, KernelModel, SourceModel, make_phantom, solve_forward
from rtetomo._march import HAS_NUMBA


def time_solve(backend, grid, phantom, source, kernel, repeats):
    best = float("inf")
    sweeps = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        _, info = solve_forward(phantom, source, kernel, grid, backend=backend, return_info=True)
        best = min(best, time.perf_counter() - t0)
        sweeps = info["sweeps"]
    return best, sweeps


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--h", type=float, default=0.05, help="grid step on every axis")
    ap.add_argument("--repeats", type=int, default=3, help="timed repetitions per backend")
    ap.add_argument("--ca", type=float, default=5.0, help="absorber level of the letter phantom")
    args = ap.parse_args()

    grid = GridSet.uniform(Geometry(), args.h)
    phantom = make_phantom("A", args.ca, grid)
    source = SourceModel.build(0.05)
    kernel = KernelModel()
    n1, nz, nk = grid.shape_hull
    print(f"grid: hull {n1} x {nz} spatial nodes, {nk} sources, step {args.h}")

    backends = ["numpy"]
    if HAS_NUMBA:
        t0 = time.perf_counter()
        solve_forward(phantom, source, kernel, grid, backend="numba")
        print(f"numba compile + first solve: {time.perf_counter() - t0:.2f} s")
        backends.insert(0, "numba")
    else:
        print("numba not importable; timing the fallback only")

    results = {}
    for backend in backends:
        best, sweeps = time_solve(backend, grid, phantom, source, kernel, args.repeats)
        results[backend] = best
        print(f"{backend:>6}: best of {args.repeats}  {best:8.3f} s  ({sweeps} sweeps)")
    if len(results) == 2:
        print(f"speedup numba over numpy: {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
