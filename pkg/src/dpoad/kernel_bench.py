"""Micro-benchmark of the compiled kernels against the numpy fallback.

Run as `dpoad-kernel-bench`. Prints per-kernel timings for whichever
implementations are importable; results agree between the two (the KS
arithmetic is identical, the Laplace transform to float round-off).
"""
from __future__ import annotations

import sys
import time

import numpy as np

from ._kernels import _pykern


def _load_compiled():
    try:
        from ._kernels import _ckern
        return _ckern
    except ImportError:
        return None


def _time(fn, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes=(80, 800), ref_size: int = 40_000, rows: int = 100,
        n_laplace: int = 1_000_000) -> list[tuple]:
    rng = np.random.default_rng(7)
    impls = [("python", _pykern)]
    compiled = _load_compiled()
    if compiled is not None:
        impls.append(("compiled", compiled))

    results = []
    u = rng.random(n_laplace) - 0.5
    for name, impl in impls:
        results.append((f"laplace_from_uniform[{n_laplace}]", name,
                        _time(lambda impl=impl: impl.laplace_from_uniform(u, 2.0))))

    ref = np.sort(rng.normal(size=ref_size))
    for n in sizes:
        tests = np.sort(rng.normal(size=(rows, n)), axis=1)
        for name, impl in impls:
            results.append((f"ks_distance_rows[{rows}x{n} vs {ref_size}]", name,
                            _time(lambda impl=impl, t=tests: impl.ks_distance_rows(t, ref))))

    table = np.sort(rng.random(64))
    queries = rng.random(1_000_000)
    for name, impl in impls:
        results.append((f"nearest_index[{queries.size}]", name,
                        _time(lambda impl=impl: impl.nearest_index(table, queries))))
    return results


def main(argv=None) -> int:
    results = run()
    width = max(len(r[0]) for r in results)
    print(f"{'kernel':<{width}}  impl      seconds")
    for kernel, impl, seconds in results:
        print(f"{kernel:<{width}}  {impl:<8}  {seconds:.4f}")
    compiled = _load_compiled()
    if compiled is None:
        print("\ncompiled extension not available; showing fallback only", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
