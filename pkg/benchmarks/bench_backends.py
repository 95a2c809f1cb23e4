"""Time the compiled and numpy Gram-Schmidt walk kernels on identical inputs.

    python benchmarks/bench_backends.py --n 8 --d 3 --samples 200000
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rctnet import _backend
from rctnet.designs import INTEGRALITY_EPS, GswConfig


def _time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 32, 128])
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--phi", type=float, default=0.5)
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    compiled = "cython" in _backend.AVAILABLE
    if not compiled:
        print("compiled kernel not built; only the numpy kernel can be timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>5} {'samples':>9} {'numpy s':>10} {'cython s':>10} {'speedup':>8} agree")
    for n in args.n:
        cfg = GswConfig(args.phi, rng.standard_normal((n, args.d)))
        xs = cfg.scaled_covariates()
        samples = max(1, args.samples * 8 // n)
        uni = rng.random((samples, 2 * n))
        t_np = _time(lambda: _backend.gsw_walk(xs, cfg.phi, INTEGRALITY_EPS, uni, "numpy"), args.repeats)
        if compiled:
            t_cy = _time(lambda: _backend.gsw_walk(xs, cfg.phi, INTEGRALITY_EPS, uni, "cython"), args.repeats)
            a = _backend.gsw_walk(xs, cfg.phi, INTEGRALITY_EPS, uni, "numpy")
            b = _backend.gsw_walk(xs, cfg.phi, INTEGRALITY_EPS, uni, "cython")
            agree = f"{np.mean(np.all(a == b, axis=1)):.4f}"
            print(f"{n:>5} {samples:>9} {t_np:>10.3f} {t_cy:>10.3f} {t_np / t_cy:>8.1f} {agree}")
        else:
            print(f"{n:>5} {samples:>9} {t_np:>10.3f} {'-':>10} {'-':>8} -")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
