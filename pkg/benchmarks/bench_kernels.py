"""Compare the compiled and pure-Python banded kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 129] [--batch 65] [--repeat 5]

Times the batched factorization and solve on random diagonally dominant
pentadiagonal systems, then a full solver step on a 64x64 channel with each
backend (the step timing runs in a subprocess so the backend is selected at
import, exactly as in normal use).
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from chnsdbc import kernels

STEP_SNIPPET = """
import timeit
import numpy as np
from chnsdbc import kernels
from chnsdbc.grid import build_domain
from chnsdbc.physics import ModelParams
from chnsdbc.solver import SchemeConfig, step
from chnsdbc.state import random_state
g = build_domain(Lx=8.0, Ly=8.0, Nx=64, Ny=64)
s = random_state(g, np.random.default_rng(0), 0.5, 0.5, 0.1)
p, sc = ModelParams(h="cellular:0.5:1:1"), SchemeConfig(dt=0.005)
s = step(s, p, sc)
print(kernels.BACKEND, min(timeit.repeat(lambda: step(s, p, sc), number=5, repeat={repeat})) / 5)
"""


def bench_banded(backend: str, n: int, batch: int, repeat: int) -> tuple[float, float]:
    rng = np.random.default_rng(0)
    kl = ku = 2
    ab = rng.normal(size=(batch, kl + ku + 1, n))
    ab[:, ku, :] += 10.0
    rhs = rng.normal(size=(batch, n, 2))
    fac = min(timeit.repeat(lambda: kernels.BandedBatch(ab, kl, ku, backend=backend), number=10, repeat=repeat)) / 10
    bb = kernels.BandedBatch(ab, kl, ku, backend=backend)
    sol = min(timeit.repeat(lambda: bb.solve(rhs), number=10, repeat=repeat)) / 10
    return fac, sol


def bench_step(backend: str, repeat: int) -> float:
    env = dict(os.environ, CHNSDBC_PURE_PYTHON="1" if backend == "python" else "0")
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    name, t = out.stdout.split()
    if name != backend:
        raise RuntimeError(f"asked for {backend}, subprocess used {name}")
    return float(t)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=129, help="system size (unknowns per mode)")
    ap.add_argument("--batch", type=int, default=65, help="number of systems (Fourier modes)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)} (default {kernels.BACKEND})")
    print(f"{'backend':<8}{'factor [ms]':>14}{'solve [ms]':>14}{'step [ms]':>14}")
    rows = {}
    for b in backends:
        fac, sol = bench_banded(b, args.n, args.batch, args.repeat)
        st = bench_step(b, args.repeat)
        rows[b] = (fac, sol, st)
        print(f"{b:<8}{1e3 * fac:>14.3f}{1e3 * sol:>14.3f}{1e3 * st:>14.3f}")
    if len(rows) == 2:
        py, cy = rows["python"], rows["cython"]
        print("speedup " + "  ".join(f"{k} {p / c:.1f}x" for k, p, c in zip(("factor", "solve", "step"), py, cy)))


if __name__ == "__main__":
    main()
