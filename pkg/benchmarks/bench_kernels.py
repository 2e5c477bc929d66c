"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time for each kernel and backend, the speedup and
the maximum absolute difference between backends (which should be 0).
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from vidplan import _fallback
from vidplan.retarget.smoothing import sg_weights

try:
    from vidplan import _core
except ImportError:  # extension not built
    _core = None


def _fir_args(n=20_000, w=9, d=3):
    steady, warm = sg_weights(w, d)
    return np.random.default_rng(0).standard_normal(n), steady, warm


def _bm_args(size=256, shift=3):
    rng = np.random.default_rng(1)
    a = rng.random((size, size))
    return a, np.roll(a, (shift, -shift), axis=(0, 1)), 16, 8


def bench(repeat: int) -> None:
    cases = {"causal_fir": _fir_args(), "block_match": _bm_args()}
    print(f"{'kernel':<12}{'python ms':>12}{'cython ms':>12}{'speedup':>10}{'max diff':>11}")
    for name, args in cases.items():
        py = getattr(_fallback, name)
        t_py = min(timeit.repeat(lambda: py(*args), number=1, repeat=repeat)) * 1e3
        if _core is None:
            print(f"{name:<12}{t_py:>12.2f}{'n/a':>12}")
            continue
        cy = getattr(_core, name)
        t_cy = min(timeit.repeat(lambda: cy(*args), number=1, repeat=repeat)) * 1e3
        diff = float(np.max(np.abs(np.asarray(py(*args)) - np.asarray(cy(*args)))))
        print(f"{name:<12}{t_py:>12.2f}{t_cy:>12.2f}{t_py / t_cy:>9.1f}x{diff:>11.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    bench(ap.parse_args().repeat)
