"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``; prints one row per kernel with
the best-of-repeats wall time of each backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from powerpost._backend import get_kernels


def cases(rng):
    ell = -np.abs(rng.normal(50.0, 20.0, 100_000))
    alphas = np.linspace(0.0, 1.0, 111)
    signs = np.sign(rng.normal(size=200_000))
    logs = rng.normal(0.0, 30.0, 200_000)
    n, T = 2000, 101
    t = np.linspace(0.0, 5.0, T)
    p = rng.random((n, T)) + 1e-12
    q = rng.random((n, T)) + 1e-12
    cum_p = np.cumsum(p, axis=1) / p.sum(axis=1, keepdims=True)
    cum_q = np.cumsum(q, axis=1) / q.sum(axis=1, keepdims=True)
    pts = rng.uniform(0, 10, (20_000, 2))
    data = rng.uniform(0, 10, (1000, 2))
    return {
        "signed_lse (2e5 terms)": lambda k: k.signed_lse(signs, logs),
        "tilted_lse (1e5 x 111 alphas)": lambda k: k.tilted_lse(ell, alphas, 1),
        "w2_batch (2000 pairs x 101)": lambda k: k.w2_batch(t, cum_p, cum_q),
        "mixture_loglik (2e4 x 1000)": lambda k: k.mixture_loglik(pts, data, 0.01),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py = get_kernels("python")
    try:
        cc = get_kernels("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")
    print(f"{'kernel':32s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(0)).items():
        a = np.asarray(fn(py)[0] if isinstance(fn(py), tuple) else fn(py))
        b = np.asarray(fn(cc)[0] if isinstance(fn(cc), tuple) else fn(cc))
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"backends disagree on {name}")
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fn(cc), number=1, repeat=args.repeat))
        print(f"{name:32s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
