"""Compare the compiled and numpy particle/mesh transfer kernels.

Usage: python3 benchmarks/bench_kernels.py [--particles 420] [--mesh 128] [--repeat 20]

Times each kernel on both backends at the given size, then times one full
forward integration per backend in a subprocess (the backend is fixed at
import, so the end-to-end run needs a fresh interpreter).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pmmatch._backend import get_kernels

E2E = """
import time, numpy as np
from pmmatch import MeshConfig, NormOperator, TimeGrid, make_shape, integrate
from pmmatch.shape import edge_normals
m, n = {m}, {n}
c = make_shape("circle", 0.8, n)
P0 = 0.02 * np.cos(2 * np.linspace(0, 2 * np.pi, n, endpoint=False))[:, None] * edge_normals(c)
t = time.perf_counter()
integrate(c.points, P0, TimeGrid(20), NormOperator(0.4, 2), MeshConfig.square(m))
print(time.perf_counter() - t)
"""


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--particles", type=int, default=420)
    ap.add_argument("--mesh", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end integration")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    m, n = args.mesh, args.particles
    h = 2 * np.pi / m
    pts = rng.uniform(0, 2 * np.pi, (n, 2))
    vecs = rng.standard_normal((n, 2))
    dirs = rng.standard_normal((n, 2))
    field = rng.standard_normal((m, m, 2))

    try:
        cy = get_kernels("cython")
    except ImportError:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py = get_kernels("python")

    cases = {
        "interp": lambda k: k.interp(field, pts, h, h),
        "interp_jac": lambda k: k.interp_jac(field, pts, h, h),
        "interp_hess": lambda k: k.interp_hess(field, pts, h, h),
        "spread": lambda k: k.spread(vecs, pts, m, m, h, h),
        "spread_dir": lambda k: k.spread_dir(vecs, dirs, pts, m, m, h, h),
    }
    print(f"{n} particles, {m}x{m} mesh, best of {args.repeat}")
    print(f"{'kernel':<12} {'cython [us]':>12} {'python [us]':>12} {'speedup':>8}")
    for name, call in cases.items():
        np.testing.assert_allclose(call(cy), call(py), rtol=1e-12, atol=1e-12)
        tc = bench(lambda: call(cy), args.repeat)
        tp = bench(lambda: call(py), args.repeat)
        print(f"{name:<12} {1e6 * tc:12.1f} {1e6 * tp:12.1f} {tp / tc:8.1f}")

    if args.no_e2e:
        return
    code = E2E.format(m=m, n=n)
    times = {}
    for backend in ("cython", "python"):
        env = dict(os.environ, PMMATCH_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        times[backend] = float(out.stdout.strip())
    print(f"\nforward integration, N=20: cython {times['cython']:.3f} s, "
          f"python {times['python']:.3f} s, speedup {times['python'] / times['cython']:.1f}")


if __name__ == "__main__":
    main()
