"""Compare the compiled core against the NumPy fallback.

Usage::

    python3 benchmarks/bench_core.py [--sizes 250 1000] [--chain-iters 200]

Part 1 times each hot kernel in both backends. Part 2 runs the same short
chain in a subprocess per backend (``DVCM_PURE_PYTHON=1`` forces NumPy), so
the end-to-end effect of the kernel speedup is visible.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dvcm import _numpy_core

try:
    from dvcm import _core as compiled
except ImportError:  # extension not built
    compiled = None

CHAIN_SNIPPET = """
import time
from dvcm import BACKEND
from dvcm.model import ModelSpec
from dvcm.sampler import ChainConfig, run_chain
from dvcm.simgen import generate_simulation
train, test, _ = generate_simulation({n}, 20, seed=1)
spec = ModelSpec.build(3, 3, 2, fitc_rank={rank})
cfg = ChainConfig(n_iterations={iters}, burn_in={iters} // 2, thin=5, theta_sweep="per_coefficient")
t0 = time.perf_counter()
run_chain(train, spec, cfg, test)
print(BACKEND, (time.perf_counter() - t0) / {iters})
"""


def best_of(fn, repeat=5):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_cases(n, rng):
    pts = rng.random((n, 3))
    a = np.ascontiguousarray(pts[:, :2])
    dist = _numpy_core.pairwise_distance(a, a)
    tsq = np.ascontiguousarray((pts[:, 2:] - pts[:, 2:].T) ** 2)
    X = rng.standard_normal((2 * n, 3))
    nu = rng.standard_normal((2 * n, 3))
    return {
        "pairwise_distance": lambda m: m.pairwise_distance(a, a),
        "exp_corr": lambda m: m.exp_corr(dist, 2.0),
        "gneiting_corr": lambda m: m.gneiting_corr(dist, tsq, 1.5, 2.0, 0.5),
        "kron_design": lambda m: m.kron_design(X, nu, 3),
    }


def run_kernels(sizes):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'n':>6} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in sizes:
        for name, call in kernel_cases(n, rng).items():
            t_np = best_of(lambda: call(_numpy_core))
            if compiled is None:
                print(f"{name:<18} {n:>6} {1e3 * t_np:>10.3f} {'-':>10} {'-':>8}")
                continue
            t_cy = best_of(lambda: call(compiled))
            print(f"{name:<18} {n:>6} {1e3 * t_np:>10.3f} {1e3 * t_cy:>10.3f} {t_np / t_cy:>8.2f}")


def run_chains(n, rank, iters):
    code = CHAIN_SNIPPET.format(n=n, rank=rank, iters=iters)
    print(f"\nchain: n={n}, fitc_rank={rank}, {iters} iterations")
    for pure in ("0", "1"):
        env = dict(os.environ, DVCM_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, per_iter = out.stdout.split()
        print(f"  {backend:<7} {1e3 * float(per_iter):8.2f} ms/iteration")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[250, 1000])
    parser.add_argument("--chain-n", type=int, default=250)
    parser.add_argument("--chain-rank", type=int, default=0)
    parser.add_argument("--chain-iters", type=int, default=200)
    args = parser.parse_args(argv)
    run_kernels(args.sizes)
    run_chains(args.chain_n, args.chain_rank or None, args.chain_iters)


if __name__ == "__main__":
    main()
