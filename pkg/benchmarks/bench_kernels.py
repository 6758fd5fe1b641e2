"""Compare the pure-NumPy and compiled kernel backends.

Times the three hot kernels on representative sizes and one end-to-end
level-0 path solve per backend.  Run after building the extension:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_kernels.py
"""
import os
import subprocess
import sys
import time

import numpy as np


def bench(fn, *args, repeat=200):
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def kernel_table():
    from jumpmlmc import triangulate_uniform
    from jumpmlmc._kernels import pure

    try:
        from jumpmlmc._kernels import _core
    except ImportError:
        print("compiled backend not built; run `python3 setup.py build_ext --inplace`")
        return

    rng = np.random.default_rng(0)
    rows = []
    for npts, m in ((300, 16), (3000, 128)):
        vals = rng.standard_normal((m + 1, m + 1))
        pts = rng.uniform(0.0, 1.0, (npts, 2))
        t_p = bench(pure.interp_lattice, vals, pts)
        t_c = bench(_core.interp_lattice, vals, pts)
        rows.append((f"interp_lattice n={npts} m={m}", t_p, t_c))
        c1 = np.array([[0.3, 0.0], [0.7, 1.0]])
        c2 = np.array([[0.0, 0.4], [1.0, 0.6]])
        t_p = bench(pure.locate_chords, c1, c2, pts)
        t_c = bench(_core.locate_chords, c1, c2, pts)
        rows.append((f"locate_chords  n={npts}", t_p, t_c))
    for h in (0.25, 0.05):
        mesh = triangulate_uniform(h)
        tri = np.ascontiguousarray(mesh.triangles, dtype=np.intp)
        at = rng.uniform(1.0, 12.0, mesh.n_triangles)
        bt = rng.uniform(-5.0, 0.0, mesh.n_triangles)
        t_p = bench(pure.assemble_p1, mesh.vertices, tri, at, bt)
        t_c = bench(_core.assemble_p1, mesh.vertices, tri, at, bt)
        rows.append((f"assemble_p1    nt={mesh.n_triangles}", t_p, t_c))
    print(f"{'kernel':34s} {'pure':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, t_p, t_c in rows:
        print(f"{name:34s} {t_p * 1e6:8.1f}us {t_c * 1e6:8.1f}us {t_p / t_c:7.2f}x")


def path_solve(n_samples=100):
    import jumpmlmc as jm
    from jumpmlmc.fem import PathEvaluator
    from jumpmlmc.mlmc import build_schedule

    cfg = jm.ProblemConfig()
    ev = PathEvaluator(cfg, build_schedule(0, "adapted").level_tuples(), "adapted")
    root = jm.RandomStream(7)
    ev.evaluate([0], root.child(0, 0))
    t0 = time.perf_counter()
    for i in range(n_samples):
        ev.evaluate([0], root.child(0, i))
    per = (time.perf_counter() - t0) / n_samples
    print(f"level-0 path solve [{jm.kernel_backend}]: {per * 1e3:.2f} ms/sample")


if __name__ == "__main__":
    if os.environ.get("JUMPMLMC_PURE") is None and "--single" not in sys.argv:
        kernel_table()
        path_solve()
        env = dict(os.environ, JUMPMLMC_PURE="1")
        subprocess.run([sys.executable, __file__, "--single"], env=env, check=False)
    else:
        path_solve()
