"""Compiled vs pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Part 1 times each kernel pair in-process.  Part 2 re-runs end-to-end
operations (F_av, a full-model step, an effective RK4 step) in child
processes with IWSK_NUMBA=1 and IWSK_NUMBA=0, since the backend is chosen
at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from iwatsuka import _kernels as K


def best_of(fn, repeat, number):
    fn()  # warm-up (and JIT compile)
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(rng):
    z = np.linspace(-10, 10, 72)
    g = rng.normal(size=(63, 49, 128)) + 1j * rng.normal(size=(63, 49, 128))
    lam = rng.normal(size=(49, 128))
    g2 = g[0]
    vecs = np.linalg.qr(rng.normal(size=(64, 32, 32)))[0]
    phases = np.exp(1j * rng.uniform(0, 6, size=(64, 32)))
    c = rng.normal(size=(32, 64)) + 1j * rng.normal(size=(32, 64))
    return {
        "hermite_functions (72 pts x 32 modes)": lambda m: m["hermite_functions"](z, 32),
        "power_nonlin (63x49x128, sigma=1)": lambda m: m["power_nonlin"](g, lam[None], 1),
        "phase_rotate (49x128, sigma=1)": lambda m: m["phase_rotate"](g2, lam, 0.01, 1),
        "propagate_columns (64 cols, N_h=32)": lambda m: m["propagate_columns"](vecs, phases, c),
    }


END_TO_END = r"""
import json, sys, timeit
import numpy as np
from iwatsuka import BACKEND, make_grid
from iwatsuka.averaging import F_av
from iwatsuka.field import random_field
from iwatsuka.solvers import ModelParams, solve_effective, solve_full
from iwatsuka.propagators import build_displacement
repeat = int(sys.argv[1])
out = {"backend": BACKEND}
for n_h in (8, 32):
    grid = make_grid(1.0, n_h, 64, 16.0)
    u = random_field(grid, np.random.default_rng(0))
    F_av(u, 1, "tanh(y)+2")
    out[f"F_av N_h={n_h}"] = min(timeit.repeat(lambda: F_av(u, 1, "tanh(y)+2"), repeat=repeat, number=3)) / 3
grid = make_grid(1.0, 32, 64, 16.0)
u = random_field(grid, np.random.default_rng(0))
p = ModelParams(grid, lam="tanh(y)+2", eps=0.1)
table = build_displacement(grid, 0.1)
solve_full(p, u, 1e-3, 1e-3, table=table)
out["full step N_h=32"] = min(timeit.repeat(lambda: solve_full(p, u, 1e-2, 1e-3, 10, table=table),
                                            repeat=repeat, number=1)) / 10
pe = ModelParams(grid, lam="tanh(y)+2")
solve_effective(pe, u, 1e-3, 1e-3)
out["effective RK4 step N_h=32"] = min(timeit.repeat(lambda: solve_effective(pe, u, 5e-3, 1e-3, out_every=5),
                                                     repeat=repeat, number=1)) / 5
print(json.dumps(out))
"""


def end_to_end(flag, repeat):
    env = dict(os.environ, IWSK_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", END_TO_END, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write the timings to this file")
    args = ap.parse_args()
    if not K.HAS_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    impls = {
        "numba": {n: getattr(K, f"numba_{n}") for n in
                  ("hermite_functions", "power_nonlin", "phase_rotate", "propagate_columns")},
        "numpy": {n: getattr(K, f"numpy_{n}") for n in
                  ("hermite_functions", "power_nonlin", "phase_rotate", "propagate_columns")},
    }
    results = {"kernels": {}, "end_to_end": {}}
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fn in kernel_cases(np.random.default_rng(0)).items():
        t = {k: best_of(lambda: fn(m), args.repeat, 5) for k, m in impls.items()}
        results["kernels"][name] = t
        print(f"{name:40s} {1e3 * t['numba']:11.3f} {1e3 * t['numpy']:11.3f} {t['numpy'] / t['numba']:8.2f}")

    fast, slow = end_to_end("1", args.repeat), end_to_end("0", args.repeat)
    print(f"\n{'operation':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name in fast:
        if name == "backend":
            continue
        results["end_to_end"][name] = {"numba": fast[name], "numpy": slow[name]}
        print(f"{name:40s} {1e3 * fast[name]:11.3f} {1e3 * slow[name]:11.3f} {slow[name] / fast[name]:8.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
