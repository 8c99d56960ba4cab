"""Time the numba kernels against their numpy twins and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

A second section runs one end-to-end entropic solve in two subprocesses,
once with MK_NUMBA=1 and once with MK_NUMBA=0.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mkot import _kernels as K


def best_of(fn, repeat):
    fn()  # warm-up (compiles the numba version)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(rng, scale):
    m = int(2000 * scale)
    C2 = rng.uniform(0, 1, (m, m))
    P = rng.standard_normal(m)
    logw = np.log(np.full(m, 1.0 / m))
    yield "slice_min", (C2, P), {}
    yield "slice_logsumexp", (C2, P, logw, 0.05), {}

    q, n = int(200_000 * scale), 3
    sizes = np.array([60, 60, 60])
    idx = np.stack([rng.integers(0, s, q) for s in sizes], axis=1)
    offsets = np.r_[0, np.cumsum(sizes)[:-1]]
    y = rng.uniform(-0.5, 0.5, sizes.sum())
    c = rng.uniform(2.5, 4.0, q)
    c[-1] = -10.0  # only the last column prices out, so both scan everything
    yield "first_negative", (c, idx, offsets, y, np.zeros(q, bool), 1e-9), {}

    k = max(4, int(40 * scale))
    pts = rng.standard_normal((3, k, 2))
    yield "coulomb_tensor", (pts, np.array([k, k, k])), {}


def agree(a, b):
    if np.isscalar(a) or isinstance(a, int):
        return a == b
    fin = np.isfinite(a)
    return bool(np.array_equal(fin, np.isfinite(b)) and np.allclose(a[fin], b[fin], rtol=1e-12, atol=1e-12))


END_TO_END = """
import time
from mkot.apps import gen_radial_instance
from mkot.cost import CostSpec
from mkot.solver_sinkhorn import EntropicConfig, solve_entropic
marg, _ = gen_radial_instance([1.0, 2.0, 3.0], 12, 3)
solve_entropic(marg, CostSpec("coulomb"), EntropicConfig(0.5, tol=1e-6, max_iter=5))
t = time.perf_counter()
_, _, rep = solve_entropic(marg, CostSpec("coulomb"), EntropicConfig(0.1, tol=1e-9))
print(f"{time.perf_counter() - t:.4f} {rep.primal_value!r}")
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()

    if not K.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  agree")
    ok = True
    for name, a, kw in cases(rng, args.scale):
        f_np, f_nb = getattr(K, name + "_np"), getattr(K, name + "_nb")
        same = agree(f_np(*a, **kw), f_nb(*a, **kw))
        ok &= same
        t_np = best_of(lambda: f_np(*a, **kw), args.repeat)
        t_nb = best_of(lambda: f_nb(*a, **kw), args.repeat)
        print(f"{name:<18}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>9.1f}x  {same}")

    if not args.skip_end_to_end:
        print("\nend-to-end entropic solve (36 atoms, 3 marginals, eps 0.1)")
        vals = {}
        for flag in ("1", "0"):
            env = dict(os.environ, MK_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                                 capture_output=True, text=True, check=True).stdout.split()
            vals[flag] = float(out[1])
            print(f"  MK_NUMBA={flag}: {float(out[0]):.4f}s  value {out[1]}")
        same = abs(vals["1"] - vals["0"]) <= 1e-9
        ok &= same
        print(f"  values agree: {same}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
