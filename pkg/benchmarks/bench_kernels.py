"""Time the grid kernels with numba and with the numpy fallback.

    python benchmarks/bench_kernels.py [--h 0.1] [--repeat 5]

Prints one row per kernel: best-of-repeat wall time for each backend and the
speed-up.  The first numba call of each kernel (compilation) is excluded.
"""
import argparse
import timeit

import numpy as np

from nehari_linking import _accel
from nehari_linking.barycenter import ball_offsets, barycenter
from nehari_linking.energy import gradient, total_energy
from nehari_linking.grid import ExteriorGrid
from nehari_linking.limit_problem import shoot_ground_state
from nehari_linking.linking import bump
from nehari_linking.nehari import nehari_time
from nehari_linking.nonlinearity import NonlinearityModel


def cases(grid, model, profile):
    u = bump(profile, grid, (6.0, 3.0), model)
    v = u.values
    a = np.abs(v)
    offs = ball_offsets(grid.h)
    active = grid.interior & (v < 1e-10 * v.max())
    return {
        "laplacian": lambda: _accel.laplacian(v, grid.h),
        "dirichlet form": lambda: _accel.diff_dot(v, v),
        "f(u)": lambda: _accel.sat_f(v, model.s),
        "F(u)": lambda: _accel.sat_F(v, model.s),
        "nehari sum": lambda: _accel.sat_nehari_sum(v, 1.3, model.s),
        "ball sum (box 120^2)": lambda: _accel.ball_sum_box(a, offs, (400, 520, 400, 520)),
        "positive fill (20 sweeps)": lambda: _accel.positive_fill(v.copy(), active, 0.24, 20),
        "energy": lambda: total_energy(u, model),
        "projection": lambda: nehari_time(u, model),
        "barycenter": lambda: barycenter(u),
        "gradient": lambda: gradient(u, model),
    }


def best(fn, repeat):
    fn()  # warm-up (numba compilation, FFT plans)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--R-out", type=float, default=40.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    model = NonlinearityModel()
    profile = shoot_ground_state(model)
    grid = ExteriorGrid(h=args.h, R_out=args.R_out)
    print(f"grid {grid.shape[0]} x {grid.shape[1]}, best of {args.repeat}")
    if not _accel.HAVE_NUMBA:
        print("numba is not importable; numpy timings only")
    work = cases(grid, model, profile)
    timings = {}
    for backend in (["numpy", "numba"] if _accel.HAVE_NUMBA else ["numpy"]):
        prev = _accel.set_backend(backend)
        try:
            timings[backend] = {name: best(fn, args.repeat) for name, fn in work.items()}
        finally:
            _accel.set_backend(prev)
    print(f"{'kernel':28s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speed-up':>9s}")
    for name in work:
        t_np = timings["numpy"][name] * 1e3
        if "numba" in timings:
            t_nb = timings["numba"][name] * 1e3
            print(f"{name:28s} {t_np:11.2f} {t_nb:11.2f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:28s} {t_np:11.2f}")


if __name__ == "__main__":
    main()
