"""Numba vs pure-numpy timings for the scheme's hot loops.

Kernel-level timings call both variants in one process; the end-to-end
timing runs a short simulation in a subprocess per backend, because the
backend is fixed at import time by EBT_RADIAL_BACKEND.

    python benchmarks/bench_accel.py [--sizes 2000,8000] [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from ebt_radial import _accel
from ebt_radial.harness import reference_config
from ebt_radial.scheme import build_band, capacity, init_masses


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_rows(n, repeat):
    cfg = reference_config(3, 2.0 / n)
    state = init_masses(cfg)
    band = build_band(cfg, state.grid)
    s = band.half_width
    mpad = np.zeros(n + 2 * s)
    mpad[s:s + n] = state.masses
    out_np, out_nb = np.empty(n), np.empty(n)
    cap = capacity(state.grid, cfg)
    inv_x = 1.0 / state.grid

    rows = []
    t_np = best_of(lambda: _accel.band_matvec_np(band.values, mpad, out_np), repeat)
    row = [f"band_matvec n={n} s={s}", t_np]
    if _accel.numba is not None:
        _accel.band_matvec_nb(band.values, mpad, out_nb)  # compile
        row.append(best_of(lambda: _accel.band_matvec_nb(band.values, mpad, out_nb), repeat))
        row.append(bool(np.array_equal(out_np, out_nb)))
    rows.append(row)

    m1, m2 = state.masses.copy(), state.masses.copy()
    row = [f"euler_update n={n}",
           best_of(lambda: _accel.euler_update_np(m1.copy(), cap, out_np, inv_x, cfg.dt), repeat)]
    if _accel.numba is not None:
        _accel.euler_update_nb(m2.copy(), cap, out_np, inv_x, cfg.dt)
        row.append(best_of(lambda: _accel.euler_update_nb(m2.copy(), cap, out_np, inv_x, cfg.dt), repeat))
        a, b = m1.copy(), m2.copy()
        _accel.euler_update_np(a, cap, out_np, inv_x, cfg.dt)
        _accel.euler_update_nb(b, cap, out_np, inv_x, cfg.dt)
        row.append(bool(np.array_equal(a, b)))
    rows.append(row)
    return rows


SIM = ("import time; from ebt_radial.harness import reference_config; from ebt_radial.scheme import run;"
       "c = reference_config(3, {dt}, t_end={t_end}); run(c.__class__(**{{**c.as_dict(), 't_end': c.dt}}));"
       "t = time.perf_counter(); r = run(c); print(time.perf_counter() - t, r.final.masses.sum().hex())")


def end_to_end(dt, t_end):
    out = {}
    for backend in ("numpy", "numba"):
        env = {**os.environ, "EBT_RADIAL_BACKEND": backend}
        res = subprocess.run([sys.executable, "-c", SIM.format(dt=dt, t_end=t_end)],
                             env=env, capture_output=True, text=True, check=True)
        secs, total = res.stdout.split()
        out[backend] = (float(secs), total)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", default="2000,8000,32000")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sim-dt", type=float, default=1e-3)
    ap.add_argument("--sim-t-end", type=float, default=1.0)
    args = ap.parse_args()

    print(f"{'loop':<32} {'numpy s':>10} {'numba s':>10} {'speedup':>8}  identical")
    for n in (int(v) for v in args.sizes.split(",")):
        for name, t_np, *rest in kernel_rows(n, args.repeat):
            if rest:
                t_nb, same = rest
                print(f"{name:<32} {t_np:>10.2e} {t_nb:>10.2e} {t_np / t_nb:>8.1f}  {same}")
            else:
                print(f"{name:<32} {t_np:>10.2e} {'-':>10} {'-':>8}  -")

    res = end_to_end(args.sim_dt, args.sim_t_end)
    (a, ha), (b, hb) = res["numpy"], res["numba"]
    print(f"\nrun dt={args.sim_dt:g} t_end={args.sim_t_end:g}: numpy {a:.2f}s, numba {b:.2f}s, "
          f"speedup {a / b:.1f}, same total mass bits: {ha == hb}")


if __name__ == "__main__":
    main()
