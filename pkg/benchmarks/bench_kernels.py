"""
Compare the numba and numpy kernel backends, and time one Strang step with each.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 20]

The step timing re-imports the package in a subprocess with
RANDNLS_DISABLE_NUMBA set, since the backend is bound at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from randnls import _kernels

STEP_SNIPPET = """
import timeit, numpy as np
from randnls.spectral import GridSpec, Field
from randnls.evolution import step_strang
g = GridSpec({n}, 16.0)
r = g.radius()
u = Field.physical(g, np.exp(-r * r / 8).astype(complex))
step_strang(u, 1e-3)
print(min(timeit.repeat(lambda: step_strang(u, 1e-3), number=1, repeat={repeat})))
"""


def time_kernels(n, repeat):
    rng = np.random.default_rng(0)
    shape = (n, n, n)
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    cases = {
        "phase_rotate": lambda k: k["phase_rotate"](u, 1e-3),
        "abs_pow_sum(p=4)": lambda k: k["abs_pow_sum"](u, 4.0),
        "abs_pow_sum(p=3.3)": lambda k: k["abs_pow_sum"](u, 10.0 / 3.0),
        "abs_max": lambda k: k["abs_max"](u),
        "all_finite": lambda k: k["all_finite"](u),
    }
    rows = []
    for name, fn in cases.items():
        t_np = min(timeit.repeat(lambda: fn(_kernels.numpy_kernels), number=1, repeat=repeat))
        if _kernels.numba_kernels is not None:
            fn(_kernels.numba_kernels)  # compile / load cache
            t_nb = min(timeit.repeat(lambda: fn(_kernels.numba_kernels), number=1, repeat=repeat))
        else:
            t_nb = float("nan")
        rows.append((name, t_np, t_nb))
    return rows


def time_step(n, repeat, disable_numba):
    env = dict(os.environ)
    if disable_numba:
        env["RANDNLS_DISABLE_NUMBA"] = "1"
    else:
        env.pop("RANDNLS_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n, repeat=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    print(f"grid {args.n}^3, best of {args.repeat}; numba available: {_kernels.NUMBA_AVAILABLE}")
    print(f"{'kernel':<20} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for name, t_np, t_nb in time_kernels(args.n, args.repeat):
        print(f"{name:<20} {1e3 * t_np:>11.3f} {1e3 * t_nb:>11.3f} {t_np / t_nb:>8.2f}")
    s_np = time_step(args.n, args.repeat, True)
    s_nb = time_step(args.n, args.repeat, False) if _kernels.NUMBA_AVAILABLE else float("nan")
    print(f"{'strang step':<20} {1e3 * s_np:>11.3f} {1e3 * s_nb:>11.3f} {s_np / s_nb:>8.2f}")


if __name__ == "__main__":
    main()
