"""Time the numba and pure-numpy paths of the hot kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both paths are called directly, so the SQGLAB_DISABLE_NUMBA flag does not
matter here.  Each row also reports the max abs difference between paths.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sqglab import _accel
from sqglab.estimates import TripleScan, lattice
from sqglab.regularity import _band
from sqglab.spectral import GridSpec, random_field


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_triangle(n_max, repeat):
    scan = TripleScan(n_max)
    vecs = lattice(n_max)
    norms = np.sqrt(np.sum(vecs.astype(float) ** 2, axis=1))
    w = scan.weight(norms)
    args = (vecs.astype(np.int64), norms, w, n_max * n_max)
    _accel.triangle_max_numba(*args)  # compile
    t_nb, r_nb = _best(lambda: _accel.triangle_max_numba(*args), repeat)
    t_np, r_np = _best(lambda: _accel.triangle_max_numpy(*args), repeat)
    return f"triangle N_max={n_max}", t_nb, t_np, abs(r_nb[0] - r_np[0])


def bench_nudft(n, npts, repeat):
    grid = GridSpec(n)
    th = random_field(grid, np.random.default_rng(0), decay=2.0)
    c, k1, k2 = _band(th)
    pts = np.random.default_rng(1).uniform(0, 2 * np.pi, size=(npts, 2))
    args = (c, k1.astype(float), k2.astype(float), pts)
    _accel.nudft_real_numba(*args)
    t_nb, r_nb = _best(lambda: _accel.nudft_real_numba(*args), repeat)
    t_np, r_np = _best(lambda: _accel.nudft_real_numpy(*args), repeat)
    return f"nudft n={n} pts={npts}", t_nb, t_np, float(np.max(np.abs(r_nb - r_np)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rows = [bench_triangle(n, args.repeat) for n in (16, 32, 64)]
    rows += [bench_nudft(n, p, args.repeat) for n, p in ((64, 256), (128, 1024))]
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, t_nb, t_np, diff in rows:
        print(f"{name:<26}{t_nb:>12.4g}{t_np:>12.4g}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
