"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--graphs 2000] [--points 20000]

Both backends are also checked for bit-identical output.
"""
import argparse
import time

import numpy as np

from gcurate.dataset import random_dataset
from gcurate.kernels import default_threads, get_backend
from gcurate.structural import pack_graphs


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graphs", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--dim", type=int, default=80)
    ap.add_argument("--centroids", type=int, default=32)
    ap.add_argument("--threads", type=int, default=default_threads())
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    py = get_backend("python")
    try:
        cy = get_backend("compiled")
    except ImportError:
        cy = None
        print("compiled backend not built; timing the python backend only")

    ds = random_dataset(args.graphs, seed=0)
    node_ptr, adj_ptr, nbr = pack_graphs(ds.records)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.points, args.dim))
    c = rng.normal(size=(args.centroids, args.dim))

    cases = [
        (f"rw_signature_batch ({args.graphs} graphs, {args.steps} steps)",
         lambda m, t: m.rw_signature_batch(node_ptr, adj_ptr, nbr, args.steps, t)),
        (f"assign_nearest ({args.points} x {args.dim}, K={args.centroids})",
         lambda m, t: m.assign_nearest(x, c, t)),
    ]
    print(f"threads={args.threads}, best of {args.repeat}")
    for name, call in cases:
        t_py, out_py = best_of(lambda: call(py, 1), args.repeat)
        line = f"{name:<48} python {t_py:8.3f}s"
        if cy is not None:
            t_cy, out_cy = best_of(lambda: call(cy, args.threads), args.repeat)
            a = out_py if isinstance(out_py, tuple) else (out_py,)
            b = out_cy if isinstance(out_cy, tuple) else (out_cy,)
            same = all(np.array_equal(u, v) for u, v in zip(a, b))
            line += f"  compiled {t_cy:8.3f}s  speedup {t_py / t_cy:6.1f}x  identical={same}"
        print(line)


if __name__ == "__main__":
    main()
