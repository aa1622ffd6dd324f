"""Time the compiled and numpy point-energy kernels on the default mesh.

    python benchmarks/bench_kernels.py [--n-r 96] [--n-theta 192] [--repeat 20]
"""

import argparse
import time

import numpy as np

from dcone import kernels
from dcone.curve import CurveSpec, make_curve
from dcone.energy import EnergyModel, upper_bound_profile
from dcone.mesh import MeshSpec, build_mesh


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-r", type=int, default=96)
    ap.add_argument("--n-theta", type=int, default=192)
    ap.add_argument("--h", type=float, default=2.0**-6)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    c = make_curve(CurveSpec(resolution=args.n_theta))
    m = build_mesh(MeshSpec(args.n_r, args.n_theta), args.h)
    y = upper_bound_profile(c, args.h, m)
    rng = np.random.default_rng(0)
    x = EnergyModel(m, args.h).free_of(y)
    x += 1e-3 * rng.standard_normal(x.size) * np.repeat(m.radii[1:-1], m.n_theta * 3)

    names = ["python"] + (["cython"] if kernels.compiled_point_energy is not None else [])
    rows = {}
    for name in names:
        em = EnergyModel(m, args.h, kernel=kernels.get_kernel(name))
        f, g = em.fun_and_grad(x, y)
        t = best_of(lambda: em.fun_and_grad(x, y), args.repeat)
        rows[name] = (t, f, g)
        print(f"{name:>7}: {1e3 * t:8.2f} ms per energy+gradient  (E = {f:.15e})")
    if len(rows) == 2:
        (tp, fp, gp), (tc, fc, gc) = rows["python"], rows["cython"]
        print(f"speedup: {tp / tc:.2f}x")
        print(f"max |dE| = {abs(fp - fc):.2e}, max |dG| = {np.max(np.abs(gp - gc)):.2e}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
