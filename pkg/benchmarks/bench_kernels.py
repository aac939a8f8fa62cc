"""Time the numba and numpy kernel backends side by side.

    python benchmarks/bench_kernels.py            # kernel micro-benchmarks
    python benchmarks/bench_kernels.py --train    # plus a short boosting run per backend

The numpy backend is what ``CORRFEAT_DISABLE_NUMBA=1`` selects.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from corrfeat import kernels
from corrfeat.haar import enumerate_filters, integral_images


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng, n, d, K, d_prime):
    X = rng.normal(size=(n, d))
    Xt = np.ascontiguousarray(X.T)
    order = np.argsort(Xt, axis=1, kind="stable").astype(np.int32)
    WY = rng.normal(size=(n, K)) / (n * K)
    member = rng.random(n) < 0.6
    total = WY[member].sum(axis=0)
    cand = np.sort(rng.choice(d, size=d_prime, replace=False)).astype(np.int64)
    scan_args = (Xt, order, cand, member, WY, total)

    nodes = 15
    feature = rng.integers(0, d, nodes)
    threshold = rng.normal(size=nodes)
    left = np.full(nodes, -1)
    right = np.full(nodes, -1)
    for k in range(nodes // 2):
        left[k], right[k] = 2 * k + 1, 2 * k + 2
    route_args = (X, feature, threshold, left, right)

    g = (28, 28, 1)
    ii = np.ascontiguousarray(integral_images(rng.random((min(n, 2000), 784)), g))
    table = enumerate_filters(g)
    rows = table[rng.integers(len(table), size=d_prime)]
    haar_args = (ii, rows)
    return {"stump_scan": scan_args, "route": route_args, "haar_eval": haar_args}


def micro(args):
    rng = np.random.default_rng(0)
    inputs = cases(rng, args.n, args.d, args.K, args.d_prime)
    backends = [("numpy", kernels.numpy_backend)]
    if kernels.numba_backend is not None:
        backends.append(("numba", kernels.numba_backend))
    print(f"n={args.n} d={args.d} K={args.K} d'={args.d_prime} (best of {args.repeat})")
    print(f"{'kernel':<12}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for kernel, kargs in inputs.items():
        secs = [best_of(lambda: getattr(mod, kernel)(*kargs), args.repeat) for _, mod in backends]
        speed = f"{secs[0] / secs[-1]:>9.1f}x" if len(secs) > 1 else ""
        print(f"{kernel:<12}" + "".join(f"{s * 1e3:>10.2f}ms" for s in secs) + speed)


TRAIN_SNIPPET = """
import time, numpy as np
from corrfeat import kernels
from corrfeat.boosting import TrainConfig, train
rng = np.random.default_rng(0)
X = rng.normal(size=({n}, {d}))
y = (X[:, 0] + X[:, 1] > 0).astype(int) + (X[:, 2] > 0.5).astype(int) + 1
train(X[:200], y[:200], 3, TrainConfig(T=2, N=4, d_prime=5))
t0 = time.perf_counter()
train(X, y, 3, TrainConfig(T={T}, N=4, d_prime={dp}))
print(kernels.BACKEND_NAME, time.perf_counter() - t0)
"""


def end_to_end(args):
    code = TRAIN_SNIPPET.format(n=args.n, d=args.d, T=args.T, dp=min(args.d_prime, args.d))
    print(f"\nboosting run: T={args.T}, N=4, n={args.n}, d={args.d}")
    for flag in ("1", "0"):
        env = dict(os.environ, CORRFEAT_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"  {out[0]:<6} {float(out[1]):8.2f} s")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--d", type=int, default=784)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--d-prime", type=int, default=100)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--train", action="store_true")
    p.add_argument("--T", type=int, default=20)
    args = p.parse_args()
    micro(args)
    if args.train:
        end_to_end(args)


if __name__ == "__main__":
    main()
